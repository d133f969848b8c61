"""Persistence: binary snapshots, diagnostics CSV, and run configuration.

All writes are atomic (write a temp file in the target directory, then
rename), so partial outputs never parse.  Floats are written with 17
significant digits in text so that 64-bit values round-trip losslessly.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import ConfigError, DimsMismatch, FormatMismatch, IoFailure
from .fields import OneFormField, TwoFormField
from .flow import DiagnosticsRecord, FlowConfig
from .grid import PeriodicGrid
from .state import GKState

MAGIC = b"GKT4"
VERSION = 1
# v1 stores exactly these blocks; the potential parametrization needs the
# Psi_2 base alongside the potential so round trips are bit-identical.
BLOCKS = (("Omega", 6), ("Psi1", 6), ("Psi2_0", 6), ("a", 4))


def _atomic_write(path: str, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    try:
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".gkt4-tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# -- snapshots -----------------------------------------------------------------


def save_snapshot(state: GKState, path: str) -> None:
    """Binary layout: magic, version, dims, t, provenance, named blocks.

    Each block is name length + name bytes + component count + 64-bit
    little-endian floats in component-major order.
    """
    parts = [MAGIC, struct.pack("<I", VERSION)]
    parts.append(struct.pack("<4I", *state.grid.dims))
    parts.append(struct.pack("<d", state.t))
    prov = state.provenance.encode("utf-8")
    parts.append(struct.pack("<I", len(prov)) + prov)
    blocks = {
        "Omega": state.omega.comps,
        "Psi1": state.psi1.comps,
        "Psi2_0": state.psi2_base.comps,
        "a": state.a.comps,
    }
    parts.append(struct.pack("<I", len(BLOCKS)))
    for name, ncomp in BLOCKS:
        nm = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nm)) + nm)
        parts.append(struct.pack("<I", ncomp))
        arr = np.ascontiguousarray(blocks[name], dtype="<f8")
        parts.append(arr.tobytes())
    _atomic_write(path, b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatMismatch("snapshot truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]


def load_snapshot(path: str, scheme: str = "spectral") -> GKState:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise FormatMismatch("bad magic bytes")
    version = r.u32()
    if version != VERSION:
        raise FormatMismatch(f"unknown snapshot version {version}")
    dims = struct.unpack("<4I", r.take(16))
    if any(n < 1 for n in dims):
        raise DimsMismatch(f"invalid dims {dims}")
    grid = PeriodicGrid(dims, scheme=scheme)
    t = r.f64()
    prov = r.take(r.u32()).decode("utf-8")
    nblocks = r.u32()
    if nblocks != len(BLOCKS):
        raise FormatMismatch(f"expected {len(BLOCKS)} blocks, found {nblocks}")
    npts = grid.npoints
    arrays = {}
    for name, ncomp in BLOCKS:
        nm = r.take(r.u32()).decode("utf-8")
        if nm != name:
            raise FormatMismatch(f"expected block {name!r}, found {nm!r}")
        nc = r.u32()
        if nc != ncomp:
            raise DimsMismatch(f"block {name}: expected {ncomp} components, got {nc}")
        raw = r.take(8 * nc * npts)
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape((nc,) + dims).copy()
    if r.pos != len(data):
        raise FormatMismatch("trailing bytes after final block")
    state = GKState(
        grid,
        TwoFormField(grid, arrays["Omega"]).freeze(),
        TwoFormField(grid, arrays["Psi1"]).freeze(),
        TwoFormField(grid, arrays["Psi2_0"]).freeze(),
        OneFormField(grid, arrays["a"]),
        t=t,
        provenance=prov,
        check_closed=False,
    )
    return state


# -- diagnostics CSV --------------------------------------------------------------


CSV_HEADER = ",".join(DiagnosticsRecord.CSV_FIELDS)


def write_diagnostics_csv(records: List[DiagnosticsRecord], path: str) -> None:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join(f"{v:.17g}" for v in r.as_tuple()))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_diagnostics_csv(path: str) -> List[DiagnosticsRecord]:
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise FormatMismatch("diagnostics CSV header mismatch")
    out = []
    for ln in lines[1:]:
        vals = [float(x) for x in ln.split(",")]
        if len(vals) != len(DiagnosticsRecord.CSV_FIELDS):
            raise FormatMismatch("diagnostics CSV row width mismatch")
        out.append(DiagnosticsRecord(*vals))
    return out


# -- run configuration --------------------------------------------------------------


_DEFAULTS = {
    "grid": "32,32,1,1",
    "scheme": "spectral",
    "generator": "cos",
    "amplitude": "0.1",
    "bandlimit": "2",
    "seed": "7",
    "deform_t_end": "0.2",
    "deform_dt": "0.001",
    "dt_mode": "cfl",
    "dt": "0.001",
    "cfl_safety": "0.5",
    "t_end": "1.0",
    "diagnostic_stride": "1",
    "integrator": "rk4",
    "eps_pos": "1e-6",
    "heat_warn": "1e-3",
    "checkpoint_stride": "0",
}


@dataclass
class RunConfig:
    """Flat key = value configuration with documented keys."""

    grid: tuple = (32, 32, 1, 1)
    scheme: str = "spectral"
    generator: str = "cos"
    amplitude: float = 0.1
    bandlimit: int = 2
    seed: int = 7
    deform_t_end: float = 0.2
    deform_dt: float = 1e-3
    dt_mode: str = "cfl"
    dt: float = 1e-3
    cfl_safety: float = 0.5
    t_end: float = 1.0
    diagnostic_stride: int = 1
    integrator: str = "rk4"
    eps_pos: float = 1e-6
    heat_warn: float = 1e-3
    checkpoint_stride: int = 0

    def flow_config(self) -> FlowConfig:
        try:
            return FlowConfig(
                dt_mode=self.dt_mode,
                dt=self.dt,
                cfl_safety=self.cfl_safety,
                t_end=self.t_end,
                diagnostic_stride=self.diagnostic_stride,
                integrator=self.integrator,
                eps_pos=self.eps_pos,
                heat_warn=self.heat_warn,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def parse_config(path: str | None) -> RunConfig:
    """Parse a flat key = value file; unknown keys are rejected.

    Blank lines and lines starting with '#' are ignored.  A missing path
    returns the defaults.
    """
    values = dict(_DEFAULTS)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = fh.readlines()
        except OSError as exc:
            raise IoFailure(f"cannot read config {path}: {exc}") from exc
        for lineno, ln in enumerate(raw, 1):
            s = ln.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, val = s.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in _DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val
    try:
        dims = tuple(int(x) for x in values["grid"].split(","))
        if len(dims) != 4 or any(n < 1 for n in dims):
            raise ValueError("grid must be four positive integers")
        cfg = RunConfig(
            grid=dims,
            scheme=values["scheme"],
            generator=values["generator"],
            amplitude=float(values["amplitude"]),
            bandlimit=int(values["bandlimit"]),
            seed=int(values["seed"]),
            deform_t_end=float(values["deform_t_end"]),
            deform_dt=float(values["deform_dt"]),
            dt_mode=values["dt_mode"],
            dt=float(values["dt"]),
            cfl_safety=float(values["cfl_safety"]),
            t_end=float(values["t_end"]),
            diagnostic_stride=int(values["diagnostic_stride"]),
            integrator=values["integrator"],
            eps_pos=float(values["eps_pos"]),
            heat_warn=float(values["heat_warn"]),
            checkpoint_stride=int(values["checkpoint_stride"]),
        )
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if cfg.scheme not in ("spectral", "fd4"):
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")
    if cfg.generator not in ("cos", "sincos", "random-bandlimited"):
        raise ConfigError(f"unknown generator {cfg.generator!r}")
    cfg.flow_config()  # validates the flow block eagerly
    return cfg


def make_generator(cfg: RunConfig, state: GKState):
    """Build the named analytic generator family on the state's grid."""
    from .deform import HamiltonianGenerator, normalize_generator
    from .fields import ScalarField

    grid = state.grid
    eps = cfg.amplitude
    if cfg.generator == "cos":
        vals = eps * np.cos(grid.coordinate(0))
    elif cfg.generator == "sincos":
        vals = eps * np.sin(grid.coordinate(0)) * np.cos(grid.coordinate(1))
    elif cfg.generator == "random-bandlimited":
        vals = eps * _random_bandlimited(grid, cfg.bandlimit, cfg.seed)
    else:
        raise ConfigError(f"unknown generator {cfg.generator!r}")
    f = normalize_generator(ScalarField(grid, vals), state.omega)
    return HamiltonianGenerator(f)


def _random_bandlimited(grid: PeriodicGrid, kmax: int, seed: int) -> np.ndarray:
    """Random real field supported on modes |k_i| <= kmax, sup-normalized."""
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(grid.dims)
    spec = np.fft.fftn(white)
    mask = np.ones(grid.dims, dtype=bool)
    for ax in range(4):
        k = grid.wavenumbers[ax]
        shape = [1, 1, 1, 1]
        shape[ax] = grid.dims[ax]
        mask &= np.abs(k.reshape(shape)) <= kmax
    zero = tuple([0, 0, 0, 0])
    spec = np.where(mask, spec, 0.0)
    spec[zero] = 0.0
    f = np.real(np.fft.ifftn(spec))
    m = np.max(np.abs(f))
    return f / m if m > 0 else f
