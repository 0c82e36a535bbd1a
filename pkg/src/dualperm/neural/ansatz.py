"""
Physics-Informed Network Ansatz.

Two Fourier-feature networks approximate the microscale flow: a velocity net
with two outputs and a pressure net with one. Each net is

    x -> v(x) -> [sin(2 pi E v), cos(2 pi E v)] -> (Linear, tanh)* -> Linear

followed by a hard output constraint N = g + s * f_NN. The input map v is a
periodic embedding (or the identity in plain Fourier mode):

    periodic_uv: v(x) = [cos 2 pi x1, sin 2 pi x1, cos 2 pi x2, sin 2 pi x2]
    periodic_p:  v(x) = [x1, cos 2 pi x2, sin 2 pi x2]
    fourier:     v(x) = x

The velocity is periodic in both directions and unconstrained (g = 0, s = 1).
The pressure carries g = 0 and s = 4 x1 (1 - x1), which vanishes exactly on the
inlet and outlet; `pressure_multiplier = "literal"` selects s = 4 x1 x2 (1 - x2).

Spatial derivatives are not obtained by differentiating the graph twice.
Every layer propagates the triple (value, Jacobian w.r.t. x, Laplacian w.r.t. x)
in closed form, so one forward pass returns everything the PDE residual needs
and parameter gradients still flow through torch.autograd.
"""

import math
from dataclasses import dataclass
from typing import List, Tuple

import torch
import torch.nn as nn

from dualperm.config.network_schemas import ArchitectureConfig

TWO_PI = 2.0 * math.pi
DTYPE = torch.float64

# Triple of (value (m, k), Jacobian (m, k, 2), Laplacian (m, k))
Triple = Tuple[torch.Tensor, torch.Tensor, torch.Tensor]


@dataclass
class EvalBundle:
    """Constrained outputs and their spatial derivatives.

    Attributes:
        value: (m, k) outputs.
        grad: (m, k, 2) Jacobian with respect to x.
        laplacian: (m, k) trace of the input Hessian per output.
    """

    value: torch.Tensor
    grad: torch.Tensor
    laplacian: torch.Tensor


def _embed(x: torch.Tensor, mode: str) -> Triple:
    """Periodic input embedding with exact derivatives."""
    m = x.shape[0]
    zeros = torch.zeros(m, dtype=x.dtype, device=x.device)
    ones = torch.ones(m, dtype=x.dtype, device=x.device)
    x1, x2 = x[:, 0], x[:, 1]

    if mode == "fourier":
        jac = torch.eye(2, dtype=x.dtype, device=x.device).expand(m, 2, 2)
        return x, jac, torch.zeros_like(x)

    c1, s1 = torch.cos(TWO_PI * x1), torch.sin(TWO_PI * x1)
    c2, s2 = torch.cos(TWO_PI * x2), torch.sin(TWO_PI * x2)
    k2 = TWO_PI**2

    if mode == "periodic_uv":
        value = torch.stack([c1, s1, c2, s2], dim=1)
        d1 = torch.stack([-TWO_PI * s1, TWO_PI * c1, zeros, zeros], dim=1)
        d2 = torch.stack([zeros, zeros, -TWO_PI * s2, TWO_PI * c2], dim=1)
        lap = torch.stack([-k2 * c1, -k2 * s1, -k2 * c2, -k2 * s2], dim=1)
    elif mode == "periodic_p":
        value = torch.stack([x1, c2, s2], dim=1)
        d1 = torch.stack([ones, zeros, zeros], dim=1)
        d2 = torch.stack([zeros, -TWO_PI * s2, TWO_PI * c2], dim=1)
        lap = torch.stack([zeros, -k2 * c2, -k2 * s2], dim=1)
    else:
        raise ValueError(f"Unknown embedding mode '{mode}'")
    return value, torch.stack([d1, d2], dim=2), lap


def _sum_sq(jac: torch.Tensor) -> torch.Tensor:
    return (jac * jac).sum(dim=-1)


def _linear(layer: nn.Linear, triple: Triple) -> Triple:
    value, jac, lap = triple
    w = layer.weight
    return (
        value @ w.T + layer.bias,
        torch.einsum("oi,mid->mod", w, jac),
        lap @ w.T,
    )


def _tanh(triple: Triple) -> Triple:
    a, jac, lap = triple
    s = torch.tanh(a)
    ds = 1.0 - s * s
    dds = -2.0 * s * ds
    return s, ds.unsqueeze(-1) * jac, ds * lap + dds * _sum_sq(jac)


def _multiplier(x: torch.Tensor, kind: str) -> Triple:
    """Constraint factor s(x) with gradient (m, 2) and Laplacian (m,)."""
    x1, x2 = x[:, 0], x[:, 1]
    if kind == "none":
        ones = torch.ones_like(x1)
        return ones, torch.zeros_like(x), torch.zeros_like(x1)
    if kind == "inlet_outlet":
        s = 4.0 * x1 * (1.0 - x1)
        grad = torch.stack([4.0 - 8.0 * x1, torch.zeros_like(x1)], dim=1)
        return s, grad, torch.full_like(x1, -8.0)
    if kind == "literal":
        s = 4.0 * x1 * x2 * (1.0 - x2)
        grad = torch.stack([4.0 * x2 * (1.0 - x2), 4.0 * x1 * (1.0 - 2.0 * x2)], dim=1)
        return s, grad, -8.0 * x1
    raise ValueError(f"Unknown pressure multiplier '{kind}'")


class FourierFeatureNet(nn.Module):
    """Embedding, trainable Fourier feature layer and a tanh MLP.

    Args:
        embedding: "periodic_uv", "periodic_p" or "fourier".
        out_dim: Number of outputs.
        d_e: Fourier feature width (sin and cos halves).
        hidden_widths: Hidden layer widths.
        multiplier: Output constraint ("none", "inlet_outlet", "literal").
    """

    EMBED_DIMS = {"periodic_uv": 4, "periodic_p": 3, "fourier": 2}

    def __init__(
        self,
        embedding: str,
        out_dim: int,
        d_e: int,
        hidden_widths: List[int],
        multiplier: str = "none",
    ):
        super().__init__()
        self.embedding = embedding
        self.multiplier = multiplier
        self.E = nn.Parameter(torch.zeros(d_e // 2, self.EMBED_DIMS[embedding], dtype=DTYPE))
        widths = [d_e] + list(hidden_widths)
        self.hidden = nn.ModuleList(
            nn.Linear(a, b, dtype=DTYPE) for a, b in zip(widths[:-1], widths[1:])
        )
        self.output = nn.Linear(widths[-1], out_dim, dtype=DTYPE)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """h0 = [sin(2 pi E v(x)), cos(2 pi E v(x))]."""
        v, _, _ = _embed(x, self.embedding)
        z = TWO_PI * v @ self.E.T
        return torch.cat([torch.sin(z), torch.cos(z)], dim=1)

    def evaluate(self, x: torch.Tensor, derivatives: bool = True) -> Triple:
        """Constrained output with Jacobian and Laplacian.

        With derivatives=False only the value is computed; the other two
        entries are None.
        """
        if not derivatives:
            h = self.features(x)
            for layer in self.hidden:
                h = torch.tanh(layer(h))
            f = self.output(h)
            s, _, _ = _multiplier(x, self.multiplier)
            return s.unsqueeze(1) * f, None, None

        v, jv, lv = _embed(x, self.embedding)
        z = TWO_PI * v @ self.E.T
        jz = TWO_PI * torch.einsum("kj,mjd->mkd", self.E, jv)
        lz = TWO_PI * lv @ self.E.T
        sz, cz = torch.sin(z), torch.cos(z)
        nz = _sum_sq(jz)
        triple: Triple = (
            torch.cat([sz, cz], dim=1),
            torch.cat([cz.unsqueeze(-1) * jz, -sz.unsqueeze(-1) * jz], dim=1),
            torch.cat([cz * lz - sz * nz, -sz * lz - cz * nz], dim=1),
        )
        for layer in self.hidden:
            triple = _tanh(_linear(layer, triple))
        f, jf, lf = _linear(self.output, triple)

        s, gs, ls = _multiplier(x, self.multiplier)
        value = s.unsqueeze(1) * f
        jac = s[:, None, None] * jf + f.unsqueeze(-1) * gs.unsqueeze(1)
        lap = (
            s.unsqueeze(1) * lf
            + 2.0 * torch.einsum("mkd,md->mk", jf, gs)
            + f * ls.unsqueeze(1)
        )
        return value, jac, lap


class PinnAnsatz(nn.Module):
    """Velocity net (theta) and pressure net (psi) of one flow problem.

    Outputs are ordered (u1, u2, p).
    """

    def __init__(self, config: ArchitectureConfig):
        super().__init__()
        self.config = config
        self.velocity = FourierFeatureNet(
            config.velocity_embedding, 2, config.d_e, config.hidden_widths, "none"
        )
        self.pressure = FourierFeatureNet(
            config.pressure_embedding, 1, config.d_e, config.hidden_widths, config.pressure_multiplier
        )

    def evaluate(self, x: torch.Tensor, derivatives: bool = True) -> EvalBundle:
        u, ju, lu = self.velocity.evaluate(x, derivatives)
        p, jp, lp = self.pressure.evaluate(x, derivatives)
        value = torch.cat([u, p], dim=1)
        if not derivatives:
            return EvalBundle(value=value, grad=None, laplacian=None)
        return EvalBundle(
            value=value,
            grad=torch.cat([ju, jp], dim=1),
            laplacian=torch.cat([lu, lp], dim=1),
        )

    def theta(self) -> List[nn.Parameter]:
        return list(self.velocity.parameters())

    def psi(self) -> List[nn.Parameter]:
        return list(self.pressure.parameters())


def _glorot_(weight: torch.Tensor, generator: torch.Generator) -> None:
    fan_out, fan_in = weight.shape
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    with torch.no_grad():
        weight.uniform_(-bound, bound, generator=generator)


def init_params(config: ArchitectureConfig, seed: int) -> PinnAnsatz:
    """Build the ansatz with Glorot-uniform weights, zero biases and E ~ N(0, 1) * scale.

    Equal seeds give identical parameters.
    """
    ansatz = PinnAnsatz(config)
    generator = torch.Generator().manual_seed(int(seed))
    for net in (ansatz.velocity, ansatz.pressure):
        with torch.no_grad():
            net.E.copy_(
                torch.randn(net.E.shape, generator=generator, dtype=DTYPE) * config.fourier_scale
            )
        for layer in list(net.hidden) + [net.output]:
            _glorot_(layer.weight, generator)
            nn.init.zeros_(layer.bias)
    return ansatz


def forward(params: PinnAnsatz, x) -> EvalBundle:
    """Evaluate the constrained outputs and their spatial derivatives at x (m, 2)."""
    return params.evaluate(torch.as_tensor(x, dtype=DTYPE))
