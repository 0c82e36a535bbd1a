# ---------- TESTS FOR THE PHYSICS-INFORMED ANSATZ ----------

import pytest
import torch

from dualperm.config.network_schemas import ArchitectureConfig
from dualperm.neural.ansatz import DTYPE, forward, init_params
from dualperm.neural.checkpoint import load_checkpoint, save_checkpoint
from dualperm.neural.gradients import param_gradients
from dualperm.utils.exceptions import NonFiniteGradientError

# --- MOCK DATA ---

SMALL_ARCH = ArchitectureConfig(d_e=8, hidden_widths=[6, 5])


class PickledPayload:
    """Arbitrary object that only a full unpickler can rebuild."""

    def __init__(self):
        self.note = "not a tensor"


@pytest.fixture
def params():
    """Small ansatz with fixed seed."""
    return init_params(SMALL_ARCH, seed=0)


@pytest.fixture
def points():
    """Random interior points."""
    generator = torch.Generator().manual_seed(1)
    return torch.rand(7, 2, generator=generator, dtype=DTYPE)


def autograd_derivatives(params, x):
    """Jacobian and Laplacian of every output by double backpropagation."""
    x = x.clone().requires_grad_(True)
    value = params.evaluate(x, derivatives=False).value
    grads, laps = [], []
    for k in range(value.shape[1]):
        (g,) = torch.autograd.grad(value[:, k].sum(), x, create_graph=True)
        lap = torch.zeros(x.shape[0], dtype=DTYPE)
        for d in range(2):
            (gg,) = torch.autograd.grad(g[:, d].sum(), x, retain_graph=True)
            lap = lap + gg[:, d]
        grads.append(g.detach())
        laps.append(lap)
    return value.detach(), torch.stack(grads, dim=1), torch.stack(laps, dim=1)


# --- TESTS ---


@pytest.mark.parametrize(
    "arch",
    [
        SMALL_ARCH,
        ArchitectureConfig(
            d_e=6,
            hidden_widths=[4],
            velocity_embedding="fourier",
            pressure_embedding="fourier",
            pressure_multiplier="literal",
        ),
    ],
)
def test_closed_form_derivatives_match_autograd(arch, points):
    """Test the propagated Jacobian and Laplacian against double backpropagation."""
    params = init_params(arch, seed=2)
    bundle = forward(params, points)
    value, grad, lap = autograd_derivatives(params, points)
    assert torch.allclose(bundle.value, value, atol=1e-12)
    assert torch.allclose(bundle.grad, grad, atol=1e-10)
    assert torch.allclose(bundle.laplacian, lap, atol=1e-8)


def test_pressure_vanishes_on_inlet_and_outlet(params):
    """Test the hard pressure constraint at x1 = 0 and x1 = 1."""
    x2 = torch.linspace(0.0, 1.0, 9, dtype=DTYPE)
    for x1 in (0.0, 1.0):
        x = torch.stack([torch.full_like(x2, x1), x2], dim=1)
        assert torch.all(forward(params, x).value[:, 2] == 0.0)


def test_velocity_is_periodic(params, points):
    """Test that the velocity repeats under unit shifts."""
    base = forward(params, points).value[:, :2]
    for shift in ([1.0, 0.0], [0.0, 1.0]):
        shifted = forward(params, points + torch.tensor(shift, dtype=DTYPE)).value[:, :2]
        assert torch.allclose(shifted, base, atol=1e-10)


def test_init_params_deterministic():
    """Test that equal seeds give identical parameters."""
    a = init_params(SMALL_ARCH, seed=4)
    b = init_params(SMALL_ARCH, seed=4)
    c = init_params(SMALL_ARCH, seed=5)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
    assert not torch.equal(a.velocity.E, c.velocity.E)


def test_value_only_path_matches(params, points):
    """Test that derivatives=False returns the same values."""
    full = forward(params, points)
    quick = params.evaluate(points, derivatives=False)
    assert quick.grad is None
    assert torch.allclose(full.value, quick.value, atol=1e-14)


def test_checkpoint_roundtrip(params, points, tmp_path):
    """Test bit-exact outputs after save and load."""
    loaded = load_checkpoint(save_checkpoint(params, tmp_path / "params.pt"))
    assert loaded.config == SMALL_ARCH
    assert torch.equal(forward(loaded, points).value, forward(params, points).value)


def test_checkpoint_rejects_other_files(tmp_path):
    """Test that a foreign torch file is rejected."""
    path = tmp_path / "other.pt"
    torch.save({"weights": [1, 2, 3]}, path)
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_checkpoint_refuses_pickled_objects(tmp_path):
    """Test that loading only accepts tensors and plain containers."""
    path = tmp_path / "pickled.pt"
    torch.save({"format": "dualperm-params", "version": 1, "payload": PickledPayload()}, path)
    with pytest.raises(ValueError, match="other than tensors"):
        load_checkpoint(path)


def test_param_gradients_per_term(params, points):
    """Test separate gradients of two terms from one forward pass."""
    bundle = forward(params, points)
    terms = {
        "u": (bundle.value[:, :2] ** 2).mean(),
        "p": (bundle.value[:, 2] ** 2).mean(),
    }
    grads = param_gradients(params, terms)
    assert set(grads) == {"u", "p"}
    # the velocity term does not touch the pressure net
    assert all(torch.all(g == 0) for g in grads["u"].psi)
    assert all(torch.all(g == 0) for g in grads["p"].theta)
    assert grads["u"].norm() > 0
    assert grads["u"].flat().numel() == sum(p.numel() for p in params.parameters())


def test_param_gradients_match_finite_differences(params, points):
    """Test per-term parameter gradients against central finite differences."""

    def loss_terms(net):
        bundle = forward(net, points)
        momentum = bundle.grad[:, 2, :] - 0.1 * bundle.laplacian[:, 0:2]
        return {
            "momentum": (momentum * momentum).sum(dim=1).mean(),
            "u": (bundle.value[:, :2] ** 2).mean(),
        }

    grads = param_gradients(params, loss_terms(params))
    step = 1e-6
    for name in ("momentum", "u"):
        with torch.no_grad():
            scale = max(1.0, float(loss_terms(params)[name]))
        for param, grad in zip(params.theta() + params.psi(), grads[name].tensors()):
            flat = param.data.view(-1)
            for index in range(0, flat.numel(), max(1, flat.numel() // 3)):
                original = flat[index].item()
                with torch.no_grad():
                    flat[index] = original + step
                    plus = float(loss_terms(params)[name])
                    flat[index] = original - step
                    minus = float(loss_terms(params)[name])
                    flat[index] = original
                fd = (plus - minus) / (2 * step)
                assert grad.reshape(-1)[index].item() == pytest.approx(fd, rel=1e-5, abs=1e-6 * scale)


def test_param_gradients_non_finite(params, points):
    """Test that a NaN gradient raises and names the term."""
    bundle = forward(params, points)
    terms = {"r": bundle.value.sum() * float("nan")}
    with pytest.raises(NonFiniteGradientError) as exc_info:
        param_gradients(params, terms)
    assert exc_info.value.term == "r"
