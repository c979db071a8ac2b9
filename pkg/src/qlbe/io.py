"""File formats: CSV tables, binary grid snapshots and flat key-value configs."""
from __future__ import annotations

import json
from typing import Mapping, Sequence

import numpy as np

from .diffusive import WignerField
from .errors import ConfigurationError
from .grid import CoherenceSlice, MomentumGrid3D

_FIELD_HEADER = 6
_SLICE_HEADER = 10


def write_csv(path, names: Sequence[str], data: np.ndarray) -> None:
    """CSV with a header row and 17 significant digits."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def read_csv(path):
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    return names, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_field_binary(path, field: WignerField) -> None:
    """Header ``nx, np, x_min, x_max, p_min, p_max`` then row-major values,
    all little-endian float64."""
    header = np.array([field.nx, field.n_p, *field.x_range, *field.p_range], dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field_binary(path) -> WignerField:
    raw = np.fromfile(path, dtype="<f8")
    if raw.size < _FIELD_HEADER:
        raise ConfigurationError(f"{path}: truncated header")
    nx, n_p = int(raw[0]), int(raw[1])
    vals = raw[_FIELD_HEADER:]
    if vals.size != nx * n_p:
        raise ConfigurationError(f"{path}: expected {nx * n_p} values, found {vals.size}")
    return WignerField((raw[2], raw[3]), (raw[4], raw[5]), vals.reshape(nx, n_p))


def write_field_csv(path, field: WignerField) -> None:
    X, P = np.meshgrid(field.x, field.p, indexing="ij")
    write_csv(path, ["x", "p", "W"], np.column_stack([X.ravel(), P.ravel(), field.values.ravel()]))


def write_slice_binary(path, sl: CoherenceSlice) -> None:
    """Header ``N, N, -P_max, P_max, -P_max, P_max, Kx, Ky, Kz, complex_flag``
    then the ``N**3`` values in C order; complex values are stored as
    interleaved real and imaginary parts."""
    g = sl.grid
    cplx = np.iscomplexobj(sl.values)
    header = np.array([g.N, g.N, -g.P_max, g.P_max, -g.P_max, g.P_max, *sl.K, float(cplx)], dtype="<f8")
    vals = np.ascontiguousarray(sl.values, dtype=np.complex128 if cplx else np.float64)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(vals.view("<f8").tobytes() if cplx else vals.astype("<f8").tobytes())


def read_slice_binary(path) -> CoherenceSlice:
    raw = np.fromfile(path, dtype="<f8")
    if raw.size < _SLICE_HEADER:
        raise ConfigurationError(f"{path}: truncated header")
    N = int(raw[0])
    grid = MomentumGrid3D(float(raw[3]), N)
    cplx = bool(raw[9])
    vals = raw[_SLICE_HEADER:]
    expected = N**3 * (2 if cplx else 1)
    if vals.size != expected:
        raise ConfigurationError(f"{path}: expected {expected} values, found {vals.size}")
    vals = vals.view(np.complex128) if cplx else vals
    return CoherenceSlice(grid, raw[6:9].copy(), vals.reshape(grid.shape).copy())


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.  Values are parsed
    as JSON scalars/lists when possible, otherwise kept as strings."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


def parse_value(value: str):
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        low = value.lower()
        if low in ("true", "false"):
            return low == "true"
        return value


def format_config(cfg: Mapping) -> str:
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in sorted(cfg.items()))
