"""
FlowState Export.

Two formats, selected by file suffix:

- `.npz`: binary arrays `u1`, `u2`, `p` plus a JSON `header` string.
- `.csv`: one header line `# {json header}` followed by long-format rows
  `field,j,i,value`.

Header fields: `format` ("dualperm-flowstate"), `version`, `n`, `layout`
("mac": u1 on vertical faces, u2 on horizontal faces, p at cell centers,
arrays indexed [j, i]), `fields`.
"""

import json
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from dualperm.solvers.grid import FlowState, Grid

FORMAT_NAME = "dualperm-flowstate"
FORMAT_VERSION = 1
FIELDS = ("u1", "u2", "p")


def _header(state: FlowState) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n": state.grid.n,
        "layout": "mac",
        "fields": list(FIELDS),
    }


def _check_header(header: dict) -> int:
    if header.get("format") != FORMAT_NAME:
        raise ValueError(f"Not a flow-state file: format={header.get('format')!r}")
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"Unsupported flow-state version {header.get('version')}")
    return int(header["n"])


def export_flow_state(state: FlowState, path: Union[str, Path]) -> Path:
    """Write a FlowState as .npz or .csv (by suffix)."""
    path = Path(path)
    header = _header(state)
    if path.suffix == ".npz":
        np.savez(path, header=json.dumps(header), u1=state.u1, u2=state.u2, p=state.p)
        return path

    n = state.grid.n
    J, I = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    frames = [
        pd.DataFrame(
            {
                "field": name,
                "j": J.ravel(),
                "i": I.ravel(),
                "value": getattr(state, name).ravel(),
            }
        )
        for name in FIELDS
    ]
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {json.dumps(header)}\n")
        pd.concat(frames, ignore_index=True).to_csv(fh, index=False, float_format="%.17g")
    return path


def load_flow_state(path: Union[str, Path]) -> FlowState:
    """Read a FlowState written by export_flow_state."""
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as data:
            n = _check_header(json.loads(str(data["header"])))
            return FlowState(grid=Grid(n), u1=data["u1"], u2=data["u2"], p=data["p"])

    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
        n = _check_header(json.loads(first.lstrip("# ").strip()))
        frame = pd.read_csv(fh)

    arrays = {}
    for name in FIELDS:
        part = frame[frame["field"] == name]
        arr = np.zeros((n, n))
        arr[part["j"].to_numpy(), part["i"].to_numpy()] = part["value"].to_numpy()
        arrays[name] = arr
    return FlowState(grid=Grid(n), **arrays)
