"""Newtonian potentials in velocity, hydrodynamic moments and the spatial field.

Arrays follow the grid layout of :mod:`vpil.grids`: a scalar field on a
``Grid3`` is an ``(N, N, N)`` array (possibly with leading batch axes), a
vector field stacks its three components on a leading axis.  Phase-space
densities are ``(nx, nx, nx, nv, nv, nv)`` arrays.

Two discretisations of ``(-Delta)^{-1}`` are provided:

* the free-space convolution with ``1/(4 pi |z|)`` (``method="spectral"`` or
  ``"direct"``), accurate to second order in the spacing;
* :func:`inverse_laplacian_conservative`, the exact inverse of the 7-point
  Laplacian with monopole boundary data.  It is adjoint-consistent with
  :func:`vpil.grids.laplacian_zero_ext`, which is what makes the discrete
  collision operator conserve mass to rounding.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy import fft as sfft

from .grids import Grid3, PhaseGrid, RadialGrid, cutoff_chi, laplacian_zero_ext

__all__ = [
    "SolverError",
    "CUBE_INV_R_INTEGRAL",
    "inverse_laplacian_radial",
    "radial_potential_at",
    "inverse_laplacian_radial_fv",
    "inverse_laplacian_3d",
    "inverse_laplacian_conservative",
    "potential_gradient",
    "potential_at_points",
    "moments",
    "self_consistent_field",
    "field_energy",
    "sample_at",
]

# Integral of 1/|z| over the unit cube centred at the origin:
# 8 * (1/2)^2 * (3/2 log((sqrt3 + 1)/(sqrt3 - 1)) - pi/4).
CUBE_INV_R_INTEGRAL = 2.0 * (
    1.5 * math.log((math.sqrt(3.0) + 1.0) / (math.sqrt(3.0) - 1.0)) - math.pi / 4.0
)

DIRECT_MAX_NODES = 32**3
_CHUNK_ELEMENTS = 1 << 23


class SolverError(RuntimeError):
    """A potential solve failed its residual check or input screening."""


# ---------------------------------------------------------------------------
# radial potentials


def _radial_partial_sums(f, grid):
    e = grid.edges()
    inner = f * (e[1:] ** 3 - e[:-1] ** 3) / 3.0  # int s^2 f ds per shell
    outer = f * (e[1:] ** 2 - e[:-1] ** 2) / 2.0  # int s f ds per shell
    cum_inner = np.concatenate([[0.0], np.cumsum(inner)])
    cum_outer = np.concatenate([[0.0], np.cumsum(outer[::-1])])[::-1]
    return e, cum_inner, cum_outer


def _check_radial_decay(f, threshold):
    scale = np.max(np.abs(f))
    if scale > 0 and abs(f[-1]) > threshold * scale:
        raise SolverError(
            f"density is not negligible at r_max: |f| = {abs(f[-1]):.3e} "
            f"(> {threshold:g} of max |f|)"
        )


def radial_potential_at(f, grid: RadialGrid, r, decay_threshold: float = 1e-8):
    """Newtonian potential of a radial density, evaluated at radii ``r``.

    ``f`` is read as constant on each shell, and the shell integrals in
    ``u(r) = (1/r) int_0^r s^2 f ds + int_r^inf s f ds`` are done exactly.
    """
    f = np.asarray(f, dtype=float)
    _check_radial_decay(f, decay_threshold)
    e, cum_inner, cum_outer = _radial_partial_sums(f, grid)
    r = np.asarray(r, dtype=float)
    h = grid.spacing
    idx = np.clip(np.floor(r / h).astype(int), 0, grid.points)
    fi = np.where(idx < grid.points, f[np.minimum(idx, grid.points - 1)], 0.0)
    lo = e[idx]
    inner = cum_inner[idx] + fi * (r**3 - lo**3) / 3.0
    hi = np.where(idx < grid.points, e[np.minimum(idx + 1, grid.points)], r)
    outer = np.where(idx < grid.points, cum_outer[np.minimum(idx + 1, grid.points)], 0.0)
    outer = outer + fi * (hi**2 - r**2) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(r > 0, inner / np.where(r > 0, r, 1.0), 0.0) + outer
    return u


def inverse_laplacian_radial(f, grid: RadialGrid, decay_threshold: float = 1e-8):
    """Newtonian potential of a radial density at the grid nodes."""
    return radial_potential_at(f, grid, grid.nodes(), decay_threshold)


def _radial_fv_coefficients(grid: RadialGrid):
    e = grid.edges()
    vol = grid.shell_volumes()
    h = grid.spacing
    # flux coefficient through the outer face of shell i
    face = 4.0 * np.pi * e[1:] ** 2 / h
    return vol, face


def radial_laplacian(f, grid: RadialGrid, ghost: float = 0.0):
    """Finite-volume radial Laplacian ``f'' + (2/r) f'``, value ``ghost`` beyond r_max."""
    f = np.asarray(f, dtype=float)
    vol, face = _radial_fv_coefficients(grid)
    nxt = np.empty_like(f)
    nxt[..., :-1] = f[..., 1:]
    nxt[..., -1] = ghost
    flux = face * (nxt - f)  # outward flux through face i+1/2
    div = flux.copy()
    div[..., 1:] -= flux[..., :-1]
    return div / vol


def inverse_laplacian_radial_fv(f, grid: RadialGrid):
    """Exact inverse of :func:`radial_laplacian` with monopole data beyond r_max.

    Solves ``radial_laplacian(u, ghost=M/(4 pi r_ghost)) = -f`` where ``M`` is
    the discrete mass.  Adjoint-consistent with the same stencil applied to f.
    """
    from scipy.linalg import solve_banded

    f = np.asarray(f, dtype=float)
    vol, face = _radial_fv_coefficients(grid)
    n = grid.points
    mass = float(np.dot(vol, f))
    r_ghost = grid.r_max + 0.5 * grid.spacing
    ghost = mass / (4.0 * np.pi * r_ghost)
    # row i: face_i (u_{i+1} - u_i) - face_{i-1} (u_i - u_{i-1}) = -vol_i f_i
    ab = np.zeros((3, n))
    left = np.concatenate([[0.0], face[:-1]])
    ab[1] = -(face + left)
    ab[0, 1:] = face[:-1]
    ab[2, :-1] = face[:-1]
    rhs = -vol * f
    rhs[-1] -= face[-1] * ghost
    u = solve_banded((1, 1), ab, rhs)
    res = radial_laplacian(u, grid, ghost) + f
    scale = max(np.max(np.abs(f)), 1e-300)
    if np.max(np.abs(res)) > 1e-10 * scale:
        raise SolverError("radial Poisson solve residual above 1e-10")
    return u


# ---------------------------------------------------------------------------
# Cartesian free-space convolutions


def _offsets(n, h):
    k = np.arange(2 * n)
    k = np.where(k < n, k, k - 2 * n)
    return h * k


@functools.lru_cache(maxsize=16)
def _kernel_hat(n: int, h: float, kind: str):
    z = _offsets(n, h)
    zx, zy, zz = np.meshgrid(z, z, z, indexing="ij")
    r = np.sqrt(zx * zx + zy * zy + zz * zz)
    r[0, 0, 0] = 1.0
    if kind == "newton":
        k = 1.0 / (4.0 * np.pi * r)
        k[0, 0, 0] = CUBE_INV_R_INTEGRAL / (4.0 * np.pi * h)
        return sfft.rfftn(k, axes=(-3, -2, -1))
    if kind == "grad":
        # gradient of 1/(4 pi |z|); the cell average of an odd kernel is zero
        c = -1.0 / (4.0 * np.pi * r**3)
        comps = np.stack([c * zx, c * zy, c * zz])
        comps[:, 0, 0, 0] = 0.0
        return sfft.rfftn(comps, axes=(-3, -2, -1))
    raise ValueError(kind)


def _convolve(values, n, h, kind):
    """Discrete free-space convolution ``h^3 sum_j K(x_i - x_j) values_j``."""
    values = np.asarray(values, dtype=float)
    khat = _kernel_hat(n, float(h), kind)
    batch_shape = values.shape[:-3]
    flat = values.reshape((-1, n, n, n))
    ncomp = 3 if kind == "grad" else 1
    out = np.empty((ncomp,) + flat.shape)
    chunk = max(1, _CHUNK_ELEMENTS // (8 * n**3 * ncomp))
    shape2 = (2 * n, 2 * n, 2 * n)
    for s in range(0, flat.shape[0], chunk):
        block = flat[s : s + chunk]
        fhat = sfft.rfftn(block, s=shape2, axes=(-3, -2, -1))
        if kind == "grad":
            for c in range(3):
                full = sfft.irfftn(fhat * khat[c], s=shape2, axes=(-3, -2, -1))
                out[c, s : s + chunk] = full[:, :n, :n, :n]
        else:
            full = sfft.irfftn(fhat * khat, s=shape2, axes=(-3, -2, -1))
            out[0, s : s + chunk] = full[:, :n, :n, :n]
    out *= h**3
    if kind == "grad":
        return out.reshape((3,) + batch_shape + (n, n, n))
    return out[0].reshape(batch_shape + (n, n, n))


def _direct_potential(values, grid):
    n = grid.points_per_axis
    if grid.size > DIRECT_MAX_NODES:
        raise ValueError(
            f"direct summation limited to {DIRECT_MAX_NODES} nodes, grid has {grid.size}"
        )
    h = grid.spacing
    pts = grid.coords().reshape(3, -1).T
    flat = values.reshape((-1, grid.size))
    out = np.empty_like(flat)
    self_term = CUBE_INV_R_INTEGRAL / (4.0 * np.pi * h)
    rows = max(1, (1 << 22) // grid.size)
    for s in range(0, grid.size, rows):
        d = pts[s : s + rows, None, :] - pts[None, :, :]
        r = np.sqrt(np.sum(d * d, axis=-1))
        with np.errstate(divide="ignore"):
            k = np.where(r > 0, 1.0 / (4.0 * np.pi * r), self_term)
        out[:, s : s + rows] = flat @ k.T
    return (out * h**3).reshape(values.shape)


def inverse_laplacian_3d(
    f, grid: Grid3, method: str = "spectral", cutoff_epsilon: float | None = None
):
    """Free-space Newtonian potential ``(1/4pi) int f(u)/|u - v| du`` on a Cartesian grid.

    Parameters
    ----------
    f : ndarray, shape (..., N, N, N)
        Samples of the density; leading axes are independent batches.
    method : {"spectral", "direct"}
        Zero-padded FFT convolution on the doubled grid, or the O(N^6)
        direct sum (grids of at most 32^3 nodes).
    cutoff_epsilon : float, optional
        When given, the density is first multiplied by ``chi(eps u)``
        (localised potential).
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-3:] != grid.shape:
        raise ValueError(f"trailing shape {f.shape[-3:]} does not match grid {grid.shape}")
    if cutoff_epsilon is not None:
        f = f * cutoff_chi(cutoff_epsilon * np.moveaxis(grid.coords(), 0, -1))
    if method == "spectral":
        return _convolve(f, grid.points_per_axis, grid.spacing, "newton")
    if method == "direct":
        return _direct_potential(f, grid)
    raise ValueError(f"unknown method {method!r}")


@functools.lru_cache(maxsize=16)
def _conservative_setup(n: int, h: float, extent: float):
    k = np.arange(1, n + 1)
    lam1 = -4.0 * np.sin(np.pi * k / (2.0 * (n + 1))) ** 2
    lam = lam1[:, None, None] + lam1[None, :, None] + lam1[None, None, :]
    axis = -extent + h * (np.arange(n) + 0.5)
    g = extent + 0.5 * h
    a, b = np.meshgrid(axis, axis, indexing="ij")
    face = 1.0 / (4.0 * np.pi * np.sqrt(g * g + a * a + b * b))
    # sum of unit-mass monopole values at the face ghosts adjacent to each node
    bnd = np.zeros((n, n, n))
    for ax in range(3):
        for end in (0, n - 1):
            idx = [slice(None)] * 3
            idx[ax] = end
            bnd[tuple(idx)] += face
    return lam, bnd


def inverse_laplacian_conservative(f, grid: Grid3, cutoff_epsilon: float | None = None):
    """Solve ``Delta_h u = -f`` (7-point stencil) with monopole ghost values.

    Ghost nodes one cell outside the box carry ``M / (4 pi |v|)`` with ``M``
    the discrete mass.  The linear system is diagonalised by a type-I sine
    transform, so the solve is exact up to rounding; the residual is checked
    against 1e-10 of the data scale.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-3:] != grid.shape:
        raise ValueError(f"trailing shape {f.shape[-3:]} does not match grid {grid.shape}")
    if cutoff_epsilon is not None:
        f = f * cutoff_chi(cutoff_epsilon * np.moveaxis(grid.coords(), 0, -1))
    n, h = grid.points_per_axis, grid.spacing
    lam, bnd = _conservative_setup(n, h, grid.extent_half)
    mass = f.sum(axis=(-3, -2, -1)) * h**3
    mass_b = np.asarray(mass)[..., None, None, None]
    rhs = -f * h * h - mass_b * bnd
    axes = (-3, -2, -1)
    u = sfft.idstn(sfft.dstn(rhs, type=1, axes=axes) / lam, type=1, axes=axes)
    res = laplacian_zero_ext(u, h, axes=tuple(range(u.ndim - 3, u.ndim))) + mass_b * bnd / (h * h) + f
    scale = max(float(np.max(np.abs(f))) if f.size else 0.0, 1e-300)
    if np.max(np.abs(res)) > 1e-10 * scale:
        raise SolverError(
            f"conservative Poisson residual {np.max(np.abs(res)):.3e} exceeds 1e-10 x {scale:.3e}"
        )
    return u


def potential_gradient(f, grid: Grid3):
    """Velocity gradient of the Newtonian potential, ``(1/4pi) int (u-v)/|u-v|^3 f(u) du``.

    Returns an array with the three components on a new leading axis.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-3:] != grid.shape:
        raise ValueError(f"trailing shape {f.shape[-3:]} does not match grid {grid.shape}")
    return _convolve(f, grid.points_per_axis, grid.spacing, "grad")


def potential_at_points(f, grid: Grid3, points):
    """Direct-sum Newtonian potential of grid data at arbitrary points (shape (P, 3))."""
    f = np.asarray(f, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nodes = grid.coords().reshape(3, -1).T
    h = grid.spacing
    out = np.empty(len(pts))
    flat = f.reshape(-1)
    for i, p in enumerate(pts):
        r = np.sqrt(np.sum((nodes - p) ** 2, axis=1))
        with np.errstate(divide="ignore"):
            k = np.where(r > 1e-12 * h, 1.0 / (4.0 * np.pi * r), CUBE_INV_R_INTEGRAL / (4.0 * np.pi * h))
        out[i] = h**3 * np.dot(k, flat)
    return out


def sample_at(values, grid: Grid3, point) -> float:
    """Tricubic Lagrange interpolation of grid data at one point."""
    values = np.asarray(values, dtype=float)
    n, h = grid.points_per_axis, grid.spacing
    weights = []
    starts = []
    for c in np.asarray(point, dtype=float):
        s = (c + grid.extent_half) / h - 0.5
        i0 = int(np.clip(np.floor(s) - 1, 0, n - 4))
        nodes = i0 + np.arange(4)
        w = np.ones(4)
        for a in range(4):
            for b in range(4):
                if a != b:
                    w[a] *= (s - nodes[b]) / (nodes[a] - nodes[b])
        weights.append(w)
        starts.append(i0)
    block = values[
        starts[0] : starts[0] + 4, starts[1] : starts[1] + 4, starts[2] : starts[2] + 4
    ]
    return float(np.einsum("i,j,k,ijk->", weights[0], weights[1], weights[2], block))


# ---------------------------------------------------------------------------
# moments and the self-consistent field


def moments(f, grid: PhaseGrid):
    """Density ``rho = int f dv`` and current ``j = int v f dv`` on the space grid."""
    f = np.asarray(f, dtype=float)
    dv3 = grid.velocity.cell_volume
    va = grid.velocity.axis()
    rho = f.sum(axis=(3, 4, 5)) * dv3
    j = np.stack(
        [
            np.einsum("xyzabc,a->xyz", f, va),
            np.einsum("xyzabc,b->xyz", f, va),
            np.einsum("xyzabc,c->xyz", f, va),
        ]
    ) * dv3
    return rho, j


_SIGNS = {"gravitational": 1.0, "plasma": -1.0}


def self_consistent_field(rho, grid: Grid3, sign: str):
    """``E = -+ (x / (4 pi |x|^3)) * rho``; gravitational (-) attracts, plasma (+) repels."""
    if sign not in _SIGNS:
        raise ValueError(f"sign must be 'gravitational' or 'plasma', got {sign!r}")
    grad_phi = _convolve(rho, grid.points_per_axis, grid.spacing, "grad")
    # grad of G*rho with G = 1/(4 pi |x|) is -(x/(4 pi |x|^3)) * rho
    return _SIGNS[sign] * grad_phi


def field_energy(rho, grid: Grid3) -> float:
    """``(1/2) int |grad K * rho|^2 dx``, evaluated as ``(1/8 pi) iint rho rho / |x - y|``.

    The potential-energy form avoids truncating the 1/r field tail at the box.
    """
    phi = _convolve(rho, grid.points_per_axis, grid.spacing, "newton")
    return 0.5 * float(np.sum(phi * rho)) * grid.cell_volume
