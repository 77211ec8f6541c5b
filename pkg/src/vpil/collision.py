"""Isotropic Landau collision operator ``Q(f, f) = a Delta f + f^2``, ``a = (-Delta)^{-1} f``.

Works on a Cartesian velocity grid (arrays ``(..., N, N, N)``, leading axes
are independent spatial nodes) or on a radial grid (arrays ``(..., N)``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse import linalg as spla

from . import fields
from .grids import Grid3, RadialGrid, laplacian_zero_ext

__all__ = [
    "CollisionSettings",
    "StabilityError",
    "velocity_cell_weights",
    "diffusion_coefficient",
    "velocity_laplacian",
    "q_iso_apply",
    "stable_dt",
    "collision_step",
]

POTENTIAL_VARIANTS = ("spectral", "conservative")
STEPPERS = ("explicit-euler", "rk2", "semi-implicit-diffusion")


class StabilityError(ValueError):
    """Time step above the explicit stability bound, or a failed implicit solve."""


@dataclass(frozen=True)
class CollisionSettings:
    potential_variant: str = "conservative"
    stepper: str = "explicit-euler"
    positivity_floor: float = 0.0
    c_stab: float = 1.0 / 6.0
    cutoff_epsilon: float | None = None

    def __post_init__(self):
        if self.potential_variant not in POTENTIAL_VARIANTS:
            raise ValueError(
                f"potential_variant must be one of {POTENTIAL_VARIANTS}, got {self.potential_variant!r}"
            )
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}, got {self.stepper!r}")
        if not self.positivity_floor >= 0:
            raise ValueError("positivity_floor must be >= 0")
        if not self.c_stab > 0:
            raise ValueError("c_stab must be positive")


def _is_radial(grid):
    return isinstance(grid, RadialGrid)


def velocity_cell_weights(grid):
    """Quadrature weights: shell volumes (radial) or ``h^3`` (Cartesian)."""
    if _is_radial(grid):
        return grid.shell_volumes()
    return grid.cell_volume


def diffusion_coefficient(f, grid, settings: CollisionSettings):
    """``a = (-Delta)^{-1} f`` with the configured discretisation."""
    if _is_radial(grid):
        if settings.potential_variant == "conservative":
            return fields.inverse_laplacian_radial_fv(f, grid)
        return fields.inverse_laplacian_radial(f, grid)
    if settings.potential_variant == "conservative":
        return fields.inverse_laplacian_conservative(f, grid, settings.cutoff_epsilon)
    return fields.inverse_laplacian_3d(f, grid, "spectral", settings.cutoff_epsilon)


def velocity_laplacian(f, grid):
    if _is_radial(grid):
        return fields.radial_laplacian(f, grid)
    return laplacian_zero_ext(f, grid.spacing, axes=tuple(range(f.ndim - 3, f.ndim)))


def q_iso_apply(f, grid, settings: CollisionSettings | None = None, a=None):
    """Pointwise ``a * Delta_h f + f^2``; ``a`` may be passed in to reuse a solve."""
    settings = settings or CollisionSettings()
    f = np.asarray(f, dtype=float)
    if a is None:
        a = diffusion_coefficient(f, grid, settings)
    return a * velocity_laplacian(f, grid) + f * f


def _spacing(grid):
    return grid.spacing


def stable_dt(f, grid, settings: CollisionSettings, a=None) -> float:
    """Largest explicit step ``c_stab h^2 / max a``."""
    if a is None:
        a = diffusion_coefficient(f, grid, settings)
    amax = float(np.max(a)) if np.size(a) else 0.0
    if amax <= 0:
        return np.inf
    return settings.c_stab * _spacing(grid) ** 2 / amax


def _clip(f, floor, weights):
    bad = f < -floor
    if not np.any(bad):
        return f, 0.0
    w = np.broadcast_to(weights, f.shape)
    clipped = float(-np.sum(f[bad] * w[bad]))
    f = np.where(bad, 0.0, f)
    return f, clipped


def _implicit_radial(f, a, dt, grid):
    vol = grid.shell_volumes()
    face = 4.0 * np.pi * grid.edges()[1:] ** 2 / grid.spacing
    n = grid.points
    left = np.concatenate([[0.0], face[:-1]])
    out = np.empty_like(f)
    for idx in np.ndindex(f.shape[:-1]):
        ai, fi = a[idx], f[idx]
        c = dt * ai / vol
        ab = np.zeros((3, n))
        ab[1] = 1.0 + c * (face + left) - dt * fi
        ab[0, 1:] = -c[:-1] * face[:-1]
        ab[2, :-1] = -c[1:] * face[:-1]
        out[idx] = solve_banded((1, 1), ab, fi)
    return out


def _lap_matrix(grid: Grid3):
    n, h = grid.points_per_axis, grid.spacing
    t = sparse.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1])
    eye = sparse.identity(n)
    lap = (
        sparse.kron(sparse.kron(t, eye), eye)
        + sparse.kron(sparse.kron(eye, t), eye)
        + sparse.kron(sparse.kron(eye, eye), t)
    )
    return (lap / (h * h)).tocsr()


def _implicit_cartesian(f, a, dt, grid, rtol=1e-14):
    lap = _lap_matrix(grid)
    ident = sparse.identity(grid.size, format="csr")
    out = np.empty_like(f)
    for idx in np.ndindex(f.shape[:-3]):
        fi = f[idx].ravel()
        ai = a[idx].ravel()
        mat = ident - dt * (sparse.diags(ai) @ lap + sparse.diags(fi))
        diag = mat.diagonal()
        pre = spla.LinearOperator(mat.shape, matvec=lambda x, d=diag: x / d)
        sol, info = spla.bicgstab(mat, fi, x0=fi, rtol=rtol, atol=0.0, maxiter=500, M=pre)
        res = np.max(np.abs(mat @ sol - fi))
        if info != 0 and res > 1e-10 * max(np.max(np.abs(fi)), 1e-300):
            raise StabilityError(f"implicit collision solve did not converge (residual {res:.3e})")
        out[idx] = sol.reshape(grid.shape)
    return out


def collision_step(f, grid, dt: float, settings: CollisionSettings | None = None):
    """Advance ``df/dt = Q(f, f)`` by one step.

    Returns
    -------
    f_new : ndarray
    clipped_mass : float
        Cell-weighted mass added by setting values below ``-positivity_floor`` to 0.
    """
    settings = settings or CollisionSettings()
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    f = np.asarray(f, dtype=float)
    a = diffusion_coefficient(f, grid, settings)
    if settings.stepper == "semi-implicit-diffusion":
        if _is_radial(grid):
            new = _implicit_radial(f, a, dt, grid)
        else:
            new = _implicit_cartesian(f, a, dt, grid)
    else:
        limit = stable_dt(f, grid, settings, a)
        if dt > limit * (1.0 + 1e-12):
            raise StabilityError(f"dt = {dt:.6g} exceeds the explicit stability bound {limit:.6g}")
        q0 = q_iso_apply(f, grid, settings, a)
        new = f + dt * q0
        if settings.stepper == "rk2":
            new = 0.5 * (f + new + dt * q_iso_apply(new, grid, settings))
    return _clip(new, settings.positivity_floor, velocity_cell_weights(grid))
