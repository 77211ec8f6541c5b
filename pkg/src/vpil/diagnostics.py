"""Scalar functionals of a distribution function and the virial identities linking them.

Conventions (``s = -1`` gravitational, ``+1`` plasma, 0 without field)::

    KE   = 1/2 sum |v|^2 f            E_E = 1/2 sum rho (G * rho),  G = 1/(4 pi |x|)
    I    = 1/2 sum |x|^2 f            I'  = sum (x.v) f
    I''  = 2 KE + s E_E               I''' = 4 sum a f,   a = (-Delta_v)^{-1} f

so that ``dI/dt = I'``, ``dI'/dt = I''`` and ``d/dt (I'' + s E_E) = I'''``
hold for the continuous dynamics.  ``I'''`` only records the collision
contribution and is 0 when collisions are switched off.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields as dc_fields

import numpy as np

from . import fields
from .collision import CollisionSettings, diffusion_coefficient
from .grids import PhaseGrid, RadialGrid

__all__ = [
    "DiagnosticsRecord",
    "VirialReport",
    "CSV_COLUMNS",
    "ENTROPY_FLOOR",
    "field_sign",
    "measure_all",
    "virial_consistency",
    "entropy_dissipation",
    "cauchy_schwarz_check",
    "write_csv",
    "read_csv",
]

CSV_COLUMNS = (
    "t", "mass", "px", "py", "pz", "ke", "field_energy", "entropy", "inertia",
    "mixed_moment", "inertia_dd", "inertia_ddd", "clipped_mass", "min_f",
)  # fmt: skip
ENTROPY_FLOOR = 1e-30


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    px: float
    py: float
    pz: float
    ke: float
    field_energy: float
    entropy: float
    inertia: float
    mixed_moment: float
    inertia_dd: float
    inertia_ddd: float
    clipped_mass: float
    min_f: float

    @property
    def momentum(self) -> tuple[float, float, float]:
        return (self.px, self.py, self.pz)

    def row(self) -> list[str]:
        return [repr_17(getattr(self, c)) for c in CSV_COLUMNS]


def repr_17(x: float) -> str:
    return format(float(x), ".17g")


def field_sign(sign) -> int:
    """-1 gravitational, +1 plasma, 0 when the field is switched off."""
    if sign is None or sign == "none":
        return 0
    if sign == "gravitational":
        return -1
    if sign == "plasma":
        return 1
    raise ValueError(f"sign must be 'gravitational', 'plasma' or None, got {sign!r}")


def _entropy(f, weights):
    pos = f > ENTROPY_FLOOR
    safe = np.where(pos, f, 1.0)
    return float(np.sum(np.where(pos, f * np.log(safe), 0.0) * weights))


def _measure_radial(f, grid: RadialGrid, t, collision, clipped_mass):
    vol = grid.shell_volumes()
    r = grid.nodes()
    mass = float(vol @ f)
    ke = 0.5 * float(vol @ (r * r * f))
    ddd = 0.0
    if collision is not None:
        a = diffusion_coefficient(f, grid, collision)
        ddd = 4.0 * float(vol @ (a * f))
    return DiagnosticsRecord(
        t=float(t), mass=mass, px=0.0, py=0.0, pz=0.0, ke=ke, field_energy=0.0,
        entropy=_entropy(f, vol), inertia=0.0, mixed_moment=0.0, inertia_dd=2.0 * ke,
        inertia_ddd=ddd, clipped_mass=float(clipped_mass),
        min_f=float(f.min()) if f.size else 0.0,
    )  # fmt: skip


def _measure_phase(f, grid: PhaseGrid, t, sign, collision, clipped_mass):
    nx, nv = grid.space.size, grid.velocity.size
    dx3, dv3 = grid.space.cell_volume, grid.velocity.cell_volume
    flat = f.reshape(nx, nv)
    va = grid.velocity.axis()
    vc = np.stack(np.meshgrid(va, va, va, indexing="ij")).reshape(3, nv)
    xa = grid.space.axis()
    xc = np.stack(np.meshgrid(xa, xa, xa, indexing="ij")).reshape(3, nx)

    rho = flat.sum(axis=1) * dv3
    j = (flat @ vc.T) * dv3  # (nx, 3)
    e_kin = flat @ np.sum(vc * vc, axis=0) * dv3  # int |v|^2 f dv per x
    mass = float(rho.sum() * dx3)
    p = j.sum(axis=0) * dx3
    ke = 0.5 * float(e_kin.sum() * dx3)
    inertia = 0.5 * float(np.sum(xc * xc, axis=0) @ rho * dx3)
    mixed = float(np.sum(xc.T * j) * dx3)
    s = field_sign(sign)
    ee = fields.field_energy(rho.reshape(grid.space.shape), grid.space) if s else 0.0

    ddd = 0.0
    if collision is not None:
        n0 = grid.space.points_per_axis
        acc = 0.0
        for i in range(n0):
            a = diffusion_coefficient(f[i], grid.velocity, collision)
            acc += float(np.sum(a * f[i]))
        ddd = 4.0 * acc * dx3 * dv3

    entropy = sum(_entropy(f[i], 1.0) for i in range(f.shape[0])) * dx3 * dv3
    return DiagnosticsRecord(
        t=float(t), mass=mass, px=float(p[0]), py=float(p[1]), pz=float(p[2]), ke=ke,
        field_energy=float(ee), entropy=float(entropy), inertia=inertia,
        mixed_moment=mixed, inertia_dd=2.0 * ke + s * float(ee), inertia_ddd=ddd,
        clipped_mass=float(clipped_mass), min_f=float(f.min()) if f.size else 0.0,
    )  # fmt: skip


def measure_all(
    f,
    grid,
    t: float = 0.0,
    sign=None,
    collision: CollisionSettings | None = None,
    clipped_mass: float = 0.0,
) -> DiagnosticsRecord:
    """All diagnostics of a phase-space density or a homogeneous radial fiber.

    Parameters
    ----------
    f : ndarray
        ``(nx, nx, nx, nv, nv, nv)`` on a :class:`PhaseGrid`, or ``(N,)`` on a
        :class:`RadialGrid` (spatially homogeneous case).
    sign : {"gravitational", "plasma", None}
        Interaction sign; ``None`` means no self-consistent field.
    collision : CollisionSettings, optional
        Potential used for ``inertia_ddd``; ``None`` records 0 (collisionless).
    """
    f = np.asarray(f, dtype=float)
    if isinstance(grid, RadialGrid):
        if f.shape != (grid.points,):
            raise ValueError(f"radial data has shape {f.shape}, expected ({grid.points},)")
        return _measure_radial(f, grid, t, collision, clipped_mass)
    if f.shape != grid.shape:
        raise ValueError(f"phase data has shape {f.shape}, expected {grid.shape}")
    return _measure_phase(f, grid, t, sign, collision, clipped_mass)


@dataclass(frozen=True)
class VirialReport:
    """Maximum relative mismatch over interior samples for each identity.

    ``inertia``: dI/dt vs I'.  ``mixed``: dI'/dt vs I''.
    ``collision``: d/dt(I'' + s E_E) vs I'''.  ``energy``: d/dt(KE + s E_E) vs I'''/2.
    """

    inertia: float
    mixed: float
    collision: float
    energy: float
    samples: int


def _mismatch(num, ref):
    num, ref = np.asarray(num), np.asarray(ref)
    scale = np.max(np.abs(ref))
    err = np.max(np.abs(num - ref))
    if scale == 0.0:
        return float(err)
    return float(err / scale)


def virial_consistency(series) -> VirialReport:
    """Check the virial identities on a uniformly sampled series by centred differences."""
    series = list(series)
    if len(series) < 3:
        raise ValueError(f"virial_consistency needs at least 3 samples, got {len(series)}")
    t = np.array([r.t for r in series])
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0) or dt[0] <= 0:
        raise ValueError("samples must be uniformly spaced in time")

    def col(name):
        return np.array([getattr(r, name) for r in series])

    def ddt(y):
        return (y[2:] - y[:-2]) / (t[2:] - t[:-2])

    inertia, mixed = col("inertia"), col("mixed_moment")
    idd, iddd, ke = col("inertia_dd"), col("inertia_ddd"), col("ke")
    # I'' - 2 KE = s E_E, so I'' + s E_E = 2 I'' - 2 KE
    return VirialReport(
        inertia=_mismatch(ddt(inertia), mixed[1:-1]),
        mixed=_mismatch(ddt(mixed), idd[1:-1]),
        collision=_mismatch(ddt(2.0 * idd - 2.0 * ke), iddd[1:-1]),
        energy=_mismatch(ddt(idd - ke), 0.5 * iddd[1:-1]),
        samples=len(series),
    )


def entropy_dissipation(f, grid, floor: float = ENTROPY_FLOOR, max_points: int = 256) -> float:
    """Entropy dissipation ``D >= 0`` of a radial density, with ``dH/dt = -D``.

    Evaluates ``(1/8 pi) iint f(u) f(v) |grad log f(u) - grad log f(v)|^2 / |u - v|``
    after doing the angular integrals in closed form::

        D = pi iint r^2 s^2 f(r) f(s) [2 (g_r^2 + g_s^2) / r> - (4/3) g_r g_s r< / r>^2] dr ds

    with ``g = (log f)'`` by centred differences and ``r<, r>`` the smaller
    and larger of ``r, s``.
    """
    if not isinstance(grid, RadialGrid):
        raise TypeError("entropy_dissipation only supports radial grids")
    if grid.points > max_points:
        raise ValueError(f"radial grid limited to {max_points} points for the double quadrature")
    f = np.asarray(f, dtype=float)
    low = f < floor
    if np.count_nonzero(low) > 0.1 * f.size:
        raise ValueError("positivity floor touched more than 10% of the nodes")
    f = np.where(low, floor, f)
    r = grid.nodes()
    g = np.gradient(np.log(f), grid.spacing)
    w = grid.shell_volumes() / (4.0 * np.pi) * f  # r^2 f dr
    rl = np.minimum(r[:, None], r[None, :])
    rg = np.maximum(r[:, None], r[None, :])
    kern = 2.0 * (g[:, None] ** 2 + g[None, :] ** 2) / rg - (4.0 / 3.0) * np.outer(g, g) * rl / rg**2
    return float(math.pi * w @ kern @ w)


def cauchy_schwarz_check(record: DiagnosticsRecord, rtol: float = 1e-12) -> bool:
    """``I'^2 <= 2 I (2 KE)``, the Cauchy-Schwarz bound behind the free-streaming virial."""
    lhs = record.mixed_moment**2
    rhs = 2.0 * record.inertia * 2.0 * record.ke
    return bool(lhs <= rhs + rtol * max(abs(rhs), abs(lhs)) + 1e-300)


def write_csv(series, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in series:
            w.writerow(rec.row())


def read_csv(path) -> list[DiagnosticsRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected CSV header")
    names = [f.name for f in dc_fields(DiagnosticsRecord)]
    out = []
    for row in rows[1:]:
        vals = dict(zip(CSV_COLUMNS, map(float, row)))
        out.append(DiagnosticsRecord(**{n: vals[n] for n in names}))
    return out


def record_dict(record: DiagnosticsRecord) -> dict:
    return asdict(record)
