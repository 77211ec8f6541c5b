"""Strang-split integrator for ``d_t f + v . grad_x f + E_f . grad_v f = Q(f, f)``.

One step of size ``dt`` is::

    X(dt/2)  V(dt/2)  C(dt)  V(dt/2)  X(dt/2)

with ``X`` the free transport in space (three conservative sweeps), ``V`` the
acceleration by the self-consistent field, evaluated once per step after the
first ``X`` half-step, and ``C`` the collision step on every velocity fiber.
In homogeneous mode the state is a single radial velocity profile and a step
is just ``C(dt)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fields
from .collision import CollisionSettings, StabilityError, collision_step, velocity_cell_weights
from .diagnostics import DiagnosticsRecord, measure_all
from .grids import Grid3, PhaseGrid, RadialGrid, WeightParams
from .transport import LIMITERS, CFLError, advect_axis

__all__ = [
    "SimConfig",
    "SimState",
    "RunResult",
    "SnapshotError",
    "step",
    "run",
    "write_snapshot",
    "read_snapshot",
    "gaussian_phase",
    "gaussian_radial",
]

SNAPSHOT_VERSION = 1


class SnapshotError(ValueError):
    """Malformed, truncated or incompatible snapshot file."""


@dataclass(frozen=True)
class SimConfig:
    mode: str
    dt: float
    t_end: float
    sign: str | None = None
    phase: PhaseGrid | None = None
    radial: RadialGrid | None = None
    collision: CollisionSettings = CollisionSettings()
    weight: WeightParams = WeightParams()
    diagnostics_every: int = 1
    collisions: bool = True
    field: bool = True
    limiter: str = "mc"
    collision_substeps: int = 1
    snapshot_every: int = 0
    abort_negative_fraction: float = 0.01

    def __post_init__(self):
        if self.mode not in ("homogeneous", "vpil"):
            raise ValueError(f"mode must be 'homogeneous' or 'vpil', got {self.mode!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if self.diagnostics_every < 1:
            raise ValueError("diagnostics_every must be >= 1")
        if self.collision_substeps < 1:
            raise ValueError("collision_substeps must be >= 1")
        if self.limiter not in LIMITERS:
            raise ValueError(f"limiter must be one of {LIMITERS}")
        if self.mode == "vpil":
            if self.phase is None:
                raise ValueError("vpil mode needs a phase grid")
            if self.sign not in ("gravitational", "plasma"):
                raise ValueError("vpil mode needs sign = 'gravitational' or 'plasma'")
        elif self.radial is None:
            raise ValueError("homogeneous mode needs a radial grid")

    @property
    def steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))

    @property
    def record_sign(self):
        return self.sign if (self.mode == "vpil" and self.field) else None

    @property
    def record_collision(self):
        return self.collision if self.collisions else None

    @property
    def grid(self):
        return self.phase if self.mode == "vpil" else self.radial


@dataclass
class SimState:
    f: np.ndarray
    t: float = 0.0
    clipped_mass_total: float = 0.0
    step_index: int = 0
    header: dict = field(default_factory=dict, repr=False)


@dataclass
class RunResult:
    final: SimState
    series: list
    abort_reason: str | None = None


def _collide(f, grid, dt, cfg: SimConfig):
    sub = dt / cfg.collision_substeps
    clipped = 0.0
    for _ in range(cfg.collision_substeps):
        f, c = collision_step(f, grid, sub, cfg.collision)
        clipped += c
    return f, clipped


def _x_sweeps(f, dt, grid: PhaseGrid, limiter):
    hx = grid.space.spacing
    va = grid.velocity.axis()
    for d in range(3):
        shape = [1] * 6
        shape[3 + d] = len(va)
        f = advect_axis(f, (va * dt / hx).reshape(shape), d, limiter)
    return f


def _v_sweeps(f, e_field, dt, grid: PhaseGrid, limiter):
    hv = grid.velocity.spacing
    for d in range(3):
        f = advect_axis(f, (e_field[d] * dt / hv)[..., None, None, None], 3 + d, limiter)
    return f


def _check_cfl(cfg: SimConfig, e_field=None):
    grid = cfg.phase
    vmax = float(np.max(np.abs(grid.velocity.axis())))
    factor = vmax * cfg.dt / grid.space.spacing
    if factor > 1.0 + 1e-12:
        raise CFLError(f"transport CFL violated: max|v| dt / h_x = {factor:.4g} > 1")
    if e_field is not None:
        emax = float(np.max(np.abs(e_field))) if e_field.size else 0.0
        factor = emax * cfg.dt / grid.velocity.spacing
        if factor > 1.0 + 1e-12:
            raise CFLError(f"acceleration CFL violated: max|E| dt / h_v = {factor:.4g} > 1")


def step(state: SimState, cfg: SimConfig) -> SimState:
    """Advance one step of size ``cfg.dt``; returns a new state."""
    dt = cfg.dt
    f = np.array(state.f, dtype=float)
    clipped = 0.0
    if cfg.mode == "homogeneous":
        if cfg.collisions:
            f, clipped = _collide(f, cfg.radial, dt, cfg)
    else:
        grid = cfg.phase
        _check_cfl(cfg)
        half = 0.5 * dt
        f = _x_sweeps(f, half, grid, cfg.limiter)
        e_field = None
        if cfg.field:
            rho, _ = fields.moments(f, grid)
            e_field = fields.self_consistent_field(rho, grid.space, cfg.sign)
            _check_cfl(cfg, e_field)
            f = _v_sweeps(f, e_field, half, grid, cfg.limiter)
        if cfg.collisions:
            for i in range(f.shape[0]):
                f[i], c = _collide(f[i], grid.velocity, dt, cfg)
                clipped += c
        if e_field is not None:
            f = _v_sweeps(f, e_field, half, grid, cfg.limiter)
        f = _x_sweeps(f, half, grid, cfg.limiter)
    n = state.step_index + 1
    return SimState(f=f, t=n * dt, clipped_mass_total=state.clipped_mass_total + clipped, step_index=n)


def _negative_fraction(f, weights):
    total = float(np.sum(np.abs(f) * weights))
    if total == 0.0:
        return 0.0
    return float(np.sum(np.maximum(-f, 0.0) * weights)) / total


def _record(state: SimState, cfg: SimConfig) -> DiagnosticsRecord:
    return measure_all(
        state.f, cfg.grid, state.t, cfg.record_sign, cfg.record_collision, state.clipped_mass_total
    )


def run(cfg: SimConfig, f_init, on_snapshot=None, on_record=None) -> RunResult:
    """Integrate to ``t_end``, recording diagnostics every ``diagnostics_every`` steps.

    The run stops early, keeping every recorded sample, when the solution
    turns non-finite, when the negative mass fraction exceeds
    ``abort_negative_fraction``, or when a step violates a stability bound.
    ``on_snapshot(state)`` is called every ``snapshot_every`` steps (if > 0)
    and ``on_record(record)`` for every new diagnostics record.
    """
    f0 = np.array(f_init, dtype=float)
    expected = cfg.grid.shape if cfg.mode == "vpil" else (cfg.radial.points,)
    if f0.shape != tuple(expected):
        raise ValueError(f"initial data has shape {f0.shape}, expected {tuple(expected)}")
    if not np.all(np.isfinite(f0)):
        raise ValueError("initial data contains non-finite values")
    if np.any(f0 < 0):
        raise ValueError("initial data must be non-negative")
    weights = cfg.phase.cell_volume if cfg.mode == "vpil" else velocity_cell_weights(cfg.radial)

    state = SimState(f=f0)
    series = []

    def emit(s):
        rec = _record(s, cfg)
        series.append(rec)
        if on_record:
            on_record(rec)

    emit(state)
    if on_snapshot and cfg.snapshot_every:
        on_snapshot(state)
    abort = None
    for _ in range(cfg.steps):
        try:
            new = step(state, cfg)
        except (CFLError, StabilityError) as exc:
            abort = f"stability: {exc}"
            break
        if not np.all(np.isfinite(new.f)):
            abort = f"non-finite values at step {new.step_index}"
            break
        state = new
        neg = _negative_fraction(state.f, weights)
        last = state.step_index == cfg.steps
        if state.step_index % cfg.diagnostics_every == 0 or last or neg > cfg.abort_negative_fraction:
            emit(state)
        if on_snapshot and cfg.snapshot_every and state.step_index % cfg.snapshot_every == 0:
            on_snapshot(state)
        if neg > cfg.abort_negative_fraction:
            abort = f"negative mass fraction {neg:.3g} exceeds {cfg.abort_negative_fraction:g}"
            break
    if abort and series[-1].t != state.t:
        emit(state)
    return RunResult(final=state, series=series, abort_reason=abort)


# ---------------------------------------------------------------------------
# snapshots


def write_snapshot(state: SimState, path, cfg: SimConfig) -> None:
    """One JSON header line, then the samples as little-endian float64."""
    if cfg.mode == "vpil":
        nx, nv = cfg.phase.space.points_per_axis, cfg.phase.velocity.points_per_axis
        lx, lv = cfg.phase.space.extent_half, cfg.phase.velocity.extent_half
    else:
        nx, nv, lx, lv = 0, cfg.radial.points, 0.0, cfg.radial.r_max
    header = {
        "version": SNAPSHOT_VERSION,
        "mode": cfg.mode,
        "sign": cfg.sign,
        "t": float(state.t),
        "step_index": int(state.step_index),
        "clipped_mass_total": float(state.clipped_mass_total),
        "nx": nx,
        "nv": nv,
        "Lx": float(lx),
        "Lv": float(lv),
    }
    data = np.ascontiguousarray(state.f, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(data.tobytes())


def read_snapshot(path) -> SimState:
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"{path}: malformed header") from exc
    required = {"version", "mode", "sign", "t", "step_index", "clipped_mass_total", "nx", "nv", "Lx", "Lv"}
    if not isinstance(header, dict) or not required <= header.keys():
        raise SnapshotError(f"{path}: header lacks keys {sorted(required - set(header or {}))}")
    if header["version"] != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported version {header['version']}")
    nx, nv = int(header["nx"]), int(header["nv"])
    shape = (nv,) if header["mode"] == "homogeneous" else (nx,) * 3 + (nv,) * 3
    count = int(np.prod(shape))
    if len(payload) != 8 * count:
        raise SnapshotError(f"{path}: size mismatch, expected {8 * count} bytes, found {len(payload)}")
    f = np.frombuffer(payload, dtype="<f8").astype(float).reshape(shape)
    return SimState(
        f=f, t=float(header["t"]), clipped_mass_total=float(header["clipped_mass_total"]),
        step_index=int(header["step_index"]), header=header,
    )  # fmt: skip


# ---------------------------------------------------------------------------
# initial data


def gaussian_phase(grid: PhaseGrid, mass=1.0, x_width=1.0, v_width=1.0, center=(0.0, 0.0, 0.0), drift=(0.0, 0.0, 0.0)):
    """``mass (pi sx^2)^{-3/2} (pi sv^2)^{-3/2} exp(-|x-c|^2/sx^2 - |v-u|^2/sv^2)``."""
    xa, va = grid.space.axis(), grid.velocity.axis()

    def factor(axis, c, s):
        g = [np.exp(-((axis - ci) ** 2) / s**2) for ci in c]
        return g[0][:, None, None] * g[1][None, :, None] * g[2][None, None, :]

    gx = factor(xa, center, x_width) / (math.pi * x_width**2) ** 1.5
    gv = factor(va, drift, v_width) / (math.pi * v_width**2) ** 1.5
    return mass * gx[:, :, :, None, None, None] * gv[None, None, None]


def gaussian_radial(grid: RadialGrid, amplitude=1.0, width=1.0):
    """``amplitude exp(-r^2 / width^2)`` on the radial nodes."""
    r = grid.nodes()
    return amplitude * np.exp(-((r / width) ** 2))


def with_dt(cfg: SimConfig, dt: float) -> SimConfig:
    return replace(cfg, dt=dt)
