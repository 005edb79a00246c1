"""Field persistence: raw little-endian doubles plus a JSON sidecar.

On disk the sample order is row-major with x fastest; in memory the package
indexes fields (ix, iy, iz) with C layout, so dumps transpose before writing
and loads undo it.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Field, Grid, make_grid

DUMP_ORDER = "row-major-x-fastest"
DUMP_DTYPE = "f64le"


def dump_field(u: Field, basepath) -> tuple[Path, Path]:
    """Write {basepath}.f64 and {basepath}.json; returns both paths."""
    base = Path(basepath)
    raw = base.with_suffix(".f64")
    sidecar = base.with_suffix(".json")
    data = np.ascontiguousarray(u.values.transpose(2, 1, 0)).astype("<f8")
    raw.write_bytes(data.tobytes())
    sidecar.write_text(json.dumps({
        "n": u.grid.n,
        "L": u.grid.L,
        "order": DUMP_ORDER,
        "dtype": DUMP_DTYPE,
    }, indent=2) + "\n")
    return raw, sidecar


def load_field(basepath) -> Field:
    """Read a dumped field back; validates the sidecar contract."""
    base = Path(basepath)
    meta = json.loads(base.with_suffix(".json").read_text())
    if meta.get("order") != DUMP_ORDER or meta.get("dtype") != DUMP_DTYPE:
        raise ValueError(f"unsupported dump layout: {meta}")
    grid = make_grid(meta["n"], meta["L"])
    flat = np.frombuffer(base.with_suffix(".f64").read_bytes(), dtype="<f8")
    if flat.size != grid.n**3:
        raise ValueError("dump size does not match the sidecar grid")
    vals = flat.reshape(grid.shape).transpose(2, 1, 0)
    return Field(grid, vals)
