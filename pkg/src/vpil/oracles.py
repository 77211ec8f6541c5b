"""Closed-form potentials and the potential self-check used by ``vpil potential-verify``.

Both oracles solve ``-Delta u = f`` in free space:

* unit ball indicator: ``u = (3 - r^2) / 6`` inside, ``1 / (3 r)`` outside;
* ``f = exp(-r^2)``: ``u = (sqrt(pi) / 4) erf(r) / r``, so ``u(0) = 1/2``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from . import fields
from .grids import Grid3, RadialGrid, ball_volume_fraction

__all__ = ["ball_potential", "gaussian_potential", "observed_orders", "verify_potentials"]


def ball_potential(r, radius: float = 1.0):
    """Newtonian potential of the indicator of the ball of ``radius``."""
    r = np.asarray(r, dtype=float)
    inside = (3.0 * radius**2 - r * r) / 6.0
    outside = radius**3 / (3.0 * np.maximum(r, 1e-300))
    return np.where(r <= radius, inside, outside)


def gaussian_potential(r):
    """Newtonian potential of ``exp(-|x|^2)``."""
    r = np.asarray(r, dtype=float)
    small = r < 1e-6
    safe = np.where(small, 1.0, r)
    series = 0.5 - r * r / 6.0  # erf(r)/r near 0
    return np.where(small, series, 0.25 * math.sqrt(math.pi) * erf(safe) / safe)


def observed_orders(errors, spacings) -> np.ndarray:
    """Pairwise convergence orders ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})``."""
    e = np.log(np.asarray(errors, dtype=float))
    h = np.log(np.asarray(spacings, dtype=float))
    return np.diff(e) / np.diff(h)


def verify_potentials(
    radial_points: int = 512,
    cartesian_points: int = 64,
    cartesian_extent: float = 6.0,
    refinement_points=(16, 32, 64),
    refinement_extent: float = 2.0,
) -> dict:
    """Compare the three potential solvers with the closed forms.

    Returns a JSON-ready dict with the measured values, errors and pass flags
    (radial ball to 1e-6, spectral Gaussian at the origin within 1%, and a
    conservative-solver order of 2.0 +- 0.2 on every refinement pair).
    """
    out = {}

    # radial ball: the sphere r = 1 sits on a cell edge
    grid = RadialGrid(2.0, radial_points)
    ball = (grid.nodes() < 1.0).astype(float)
    radii = np.array([0.0, 1.0, 2.0])
    values = fields.radial_potential_at(ball, grid, radii)
    exact = ball_potential(radii)
    err = float(np.max(np.abs(values - exact)))
    out["radial_ball"] = {
        "r": radii.tolist(), "u": values.tolist(), "exact": exact.tolist(),
        "max_error": err, "passed": bool(err <= 1e-6),
    }  # fmt: skip

    # spectral Gaussian, origin value by interpolation (no node at 0 on an even grid)
    g3 = Grid3(cartesian_extent, cartesian_points)
    u = fields.inverse_laplacian_3d(np.exp(-g3.radius() ** 2), g3, method="spectral")
    u0 = fields.sample_at(u, g3, (0.0, 0.0, 0.0))
    rel = abs(u0 - 0.5) / 0.5
    out["spectral_gaussian"] = {
        "u0": float(u0), "exact": 0.5, "relative_error": rel, "passed": bool(rel <= 0.01),
    }  # fmt: skip

    # conservative solver against the ball, RMS error over the box
    errors, spacings = [], []
    for n in refinement_points:
        gb = Grid3(refinement_extent, n)
        ub = fields.inverse_laplacian_conservative(ball_volume_fraction(gb), gb)
        diff = ub - ball_potential(gb.radius())
        errors.append(float(np.sqrt(np.mean(diff * diff))))
        spacings.append(gb.spacing)
    orders = observed_orders(errors, spacings)
    out["conservative_ball"] = {
        "points": list(refinement_points), "rms_errors": errors, "orders": orders.tolist(),
        "passed": bool(np.all(np.abs(orders - 2.0) <= 0.2)),
    }  # fmt: skip
    out["passed"] = all(v["passed"] for v in out.values() if isinstance(v, dict))
    return out
