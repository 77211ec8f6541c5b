"""Uniform grids, polynomial weights, cutoffs and time mollifiers.

All grids are cell centred: a :class:`Grid3` with ``N`` points per axis on
``[-L, L]`` has nodes at ``-L + h (i + 1/2)``, so no node sits on the box
faces and, for even ``N``, none sits at the origin either.  Functions are
treated as zero outside the box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid3",
    "RadialGrid",
    "PhaseGrid",
    "WeightParams",
    "bracket_weight",
    "transport_weight_bound",
    "cutoff_chi",
    "cutoff_profile",
    "time_mollifier_J",
    "time_mollifier_I",
    "weighted_c2_norm",
    "laplacian_zero_ext",
    "centered_gradient",
    "ball_volume_fraction",
]


@dataclass(frozen=True)
class Grid3:
    """Cell-centred uniform grid on ``[-extent_half, extent_half]^3``."""

    extent_half: float
    points_per_axis: int

    def __post_init__(self):
        if self.points_per_axis < 4 or self.points_per_axis % 2:
            raise ValueError(
                f"points_per_axis must be even and >= 4, got {self.points_per_axis}"
            )
        if not self.extent_half > 0:
            raise ValueError(f"extent_half must be positive, got {self.extent_half}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent_half / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def shape(self) -> tuple[int, int, int]:
        n = self.points_per_axis
        return (n, n, n)

    @property
    def size(self) -> int:
        return self.points_per_axis**3

    def axis(self) -> np.ndarray:
        h = self.spacing
        return -self.extent_half + h * (np.arange(self.points_per_axis) + 0.5)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = self.axis()
        return np.meshgrid(a, a, a, indexing="ij", sparse=True)

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(3, N, N, N)``."""
        a = self.axis()
        return np.stack(np.meshgrid(a, a, a, indexing="ij"))

    def radius(self) -> np.ndarray:
        x, y, z = self.mesh()
        return np.sqrt(x * x + y * y + z * z)


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centred grid on ``[0, r_max]`` for radially symmetric 3D functions.

    Node ``i`` sits at ``(i + 1/2) h`` and owns the spherical shell
    ``[i h, (i + 1) h]``.
    """

    r_max: float
    points: int

    def __post_init__(self):
        if self.points < 8:
            raise ValueError(f"radial grid needs at least 8 points, got {self.points}")
        if not self.r_max > 0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")

    @property
    def spacing(self) -> float:
        return self.r_max / self.points

    def nodes(self) -> np.ndarray:
        return self.spacing * (np.arange(self.points) + 0.5)

    def edges(self) -> np.ndarray:
        return self.spacing * np.arange(self.points + 1)

    def shell_volumes(self) -> np.ndarray:
        e = self.edges()
        return 4.0 * np.pi / 3.0 * (e[1:] ** 3 - e[:-1] ** 3)


@dataclass(frozen=True)
class PhaseGrid:
    space: Grid3
    velocity: Grid3

    @property
    def shape(self) -> tuple[int, ...]:
        return self.space.shape + self.velocity.shape

    @property
    def cell_volume(self) -> float:
        return self.space.cell_volume * self.velocity.cell_volume


@dataclass(frozen=True)
class WeightParams:
    """Decay exponent ``m``, horizon ``T`` and cutoff scale ``epsilon``."""

    m: float = 7.0
    T: float = 1.0
    epsilon: float = 1.0

    def __post_init__(self):
        if not self.m > 3:
            raise ValueError(f"weight exponent m must exceed 3, got {self.m}")
        if not self.T > 0:
            raise ValueError(f"time horizon T must be positive, got {self.T}")
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")


def bracket_weight(z) -> np.ndarray:
    """Japanese bracket ``(1 + |z|^2)^(1/2)`` over the last axis of ``z``."""
    z = np.asarray(z, dtype=float)
    return np.sqrt(1.0 + np.sum(z * z, axis=-1))


def cutoff_profile(r) -> np.ndarray:
    """Radial profile of the cutoff: 1 on ``[0, 1/2]``, 0 beyond 1, C^2 quintic blend."""
    r = np.asarray(r, dtype=float)
    s = np.clip(2.0 * r - 1.0, 0.0, 1.0)
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


def cutoff_chi(z) -> np.ndarray:
    """Cutoff ``chi(z)`` for 3-vectors stored along the last axis."""
    z = np.asarray(z, dtype=float)
    return cutoff_profile(np.sqrt(np.sum(z * z, axis=-1)))


def transport_weight_bound(x, v, t, p: WeightParams):
    """Compare ``<x>^-m <v>^-m`` with ``(2<T>)^m <x - chi(eps v) v t>^-m``.

    Inputs broadcast over leading axes (3-vectors on the last axis).
    Returns ``(lhs, rhs, holds)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > p.T):
        raise ValueError(f"t must lie in [0, T={p.T}]")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    m = p.m
    lhs = bracket_weight(x) ** (-m) * bracket_weight(v) ** (-m)
    chi = cutoff_chi(p.epsilon * v)[..., None]
    shifted = x - chi * v * np.asarray(t)[..., None]
    rhs = (2.0 * np.sqrt(1.0 + p.T**2)) ** m * bracket_weight(shifted) ** (-m)
    holds = lhs <= rhs * (1.0 + 1e-12)
    return lhs, rhs, holds


# Cumulative distribution of the bump (35/32)(1 - u^2)^3 on [-1, 1].
def _bump_cdf(u):
    u = np.clip(u, -1.0, 1.0)
    return 0.5 + 35.0 / 32.0 * (u - u**3 + 0.6 * u**5 - u**7 / 7.0)


def _mollified_indicator(t, a, b, width):
    # (1_[a,b] * rho_width)(t) with rho_width supported on [-width/2, width/2]
    t = np.asarray(t, dtype=float)
    half = 0.5 * width
    return _bump_cdf((t - a) / half) - _bump_cdf((t - b) / half)


def time_mollifier_J(t, epsilon: float, T: float):
    """Smoothed indicator of ``[-eps/2, T - eps/2]``: 1 on ``[0, T-eps]``, 0 off ``(-eps, T)``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return _mollified_indicator(t, -0.5 * epsilon, T - 0.5 * epsilon, epsilon)


def time_mollifier_I(t, epsilon: float, kappa: float = 1.0):
    """Smoothed indicator of ``[-d/2, 3d/2]`` with ``d = eps**kappa``; 1 on ``[0, d]``."""
    if not (epsilon > 0 and kappa > 0):
        raise ValueError("epsilon and kappa must be positive")
    d = epsilon**kappa
    return _mollified_indicator(t, -0.5 * d, 1.5 * d, d)


def _shift(a, axis, offset):
    """``a`` shifted by ``offset`` along ``axis`` with zero fill (zero extension)."""
    out = np.zeros_like(a)
    n = a.shape[axis]
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if offset > 0:
        src[axis] = slice(0, n - offset)
        dst[axis] = slice(offset, n)
    else:
        src[axis] = slice(-offset, n)
        dst[axis] = slice(0, n + offset)
    out[tuple(dst)] = a[tuple(src)]
    return out


def laplacian_zero_ext(a: np.ndarray, h: float, axes) -> np.ndarray:
    """Standard (2d+1)-point Laplacian over ``axes``, zero outside the array."""
    out = -2.0 * len(axes) * a
    for ax in axes:
        out += _shift(a, ax, 1)
        out += _shift(a, ax, -1)
    return out / (h * h)


def centered_gradient(a: np.ndarray, h: float, axes) -> list[np.ndarray]:
    """Centred first differences over ``axes``, zero outside the array."""
    return [(_shift(a, ax, -1) - _shift(a, ax, 1)) / (2.0 * h) for ax in axes]


def weighted_c2_norm(f: np.ndarray, grid: PhaseGrid, p: WeightParams) -> float:
    """Grid surrogate of the weighted C^2 norm of a phase-space function.

    Returns ``max <x>^m <v>^{2m} (|f| + |v.grad_x f| + |grad_v f| + |lap_x f|
    + |lap_v f|)`` with centred differences and zero extension.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"f has shape {f.shape}, grid expects {grid.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("f contains non-finite samples")
    hx, hv = grid.space.spacing, grid.velocity.spacing
    xs, vs = (0, 1, 2), (3, 4, 5)
    va = grid.velocity.axis()
    vcomp = [va[:, None, None], va[None, :, None], va[None, None, :]]

    total = np.abs(f)
    gx = centered_gradient(f, hx, xs)
    transport = sum(vc * g for vc, g in zip(vcomp, gx))
    total += np.abs(transport)
    del gx, transport
    gv = centered_gradient(f, hv, vs)
    total += np.sqrt(sum(g * g for g in gv))
    del gv
    total += np.abs(laplacian_zero_ext(f, hx, xs))
    total += np.abs(laplacian_zero_ext(f, hv, vs))

    xa = grid.space.axis()
    x2 = xa[:, None, None] ** 2 + xa[None, :, None] ** 2 + xa[None, None, :] ** 2
    v2 = va[:, None, None] ** 2 + va[None, :, None] ** 2 + va[None, None, :] ** 2
    wx = (1.0 + x2) ** (0.5 * p.m)
    wv = (1.0 + v2) ** p.m
    weighted = total * wx[:, :, :, None, None, None] * wv[None, None, None]
    return float(weighted.max())


def ball_volume_fraction(grid: Grid3, radius: float = 1.0, subsamples: int = 32) -> np.ndarray:
    """Fraction of each cell inside the centred ball of ``radius``.

    Cells cut by the sphere are resolved with ``subsamples**3`` midpoint
    samples; all others are exactly 0 or 1.  Sampling the indicator this way
    keeps the staircase error of a sharp interface out of convergence studies.
    """
    h = grid.spacing
    r = grid.radius()
    out = (r <= radius).astype(float)
    cut = np.argwhere(np.abs(r - radius) <= 0.5 * np.sqrt(3.0) * h)
    a = grid.axis()
    o = h * ((np.arange(subsamples) + 0.5) / subsamples - 0.5)
    for i, j, k in cut:
        x2 = (a[i] + o) ** 2
        y2 = (a[j] + o) ** 2
        z2 = (a[k] + o) ** 2
        d2 = x2[:, None, None] + y2[None, :, None] + z2[None, None, :]
        out[i, j, k] = np.mean(d2 <= radius * radius)
    return out
