"""The linearised iteration ``f^0 = 0, f^1, f^2, ...`` with frozen coefficients.

Iterate ``n`` solves, with ``eps = 1/n`` and ``g = f^{n-1}``::

    d_t f + A_g(t) f = (A_g(t) f_in_eps) I_eps(t)

    A_g(t) f = chi(eps v) v . grad_x f + J_eps(t) chi(eps x) E_g . grad_v f
               - a_g Delta_v f - g f - eps Delta_{x,v} f,
    a_g = (-Delta_v)^{-1} (chi(eps .) g).

Space is discretised with first-order upwinding for the two drift terms and
7-point Laplacians (zero extension), time with forward Euler.  The source is
the same discrete operator applied to ``f_in_eps``, so the discrete solution
equals ``f_in_eps`` to rounding while ``I_eps = 1``; and since the update is
monotone under the step restriction, ``f >= f_in_eps I_eps >= 0`` at every step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import fields
from .criterion import PhiParams, phi_iterate, phi_threshold_and_roots, picard_phi_params, smallness_threshold
from .grids import (
    PhaseGrid,
    WeightParams,
    _shift,
    cutoff_chi,
    cutoff_profile,
    laplacian_zero_ext,
    time_mollifier_I,
    time_mollifier_J,
    weighted_c2_norm,
)
from .transport import CFLError

__all__ = [
    "CoefficientSet",
    "IterationReport",
    "LinearConfig",
    "PicardResult",
    "assemble_coefficients",
    "apply_operator",
    "linear_source",
    "stable_dt",
    "solve_linear_forward",
    "mollified_initial_data",
    "weighted_sup_norm",
    "picard_sequence",
    "small_gaussian_data",
]


@dataclass
class CoefficientSet:
    """Coefficients of the frozen operator at one time.

    ``transport`` has shape ``(3, nv, nv, nv)``, ``acceleration``
    ``(3, nx, nx, nx)``; ``diffusion_coeff`` and ``reaction`` live on the
    phase grid.
    """

    transport: np.ndarray
    acceleration: np.ndarray
    diffusion_coeff: np.ndarray
    reaction: np.ndarray
    epsilon: float
    artificial_diffusion: float


@dataclass(frozen=True)
class LinearConfig:
    phase: PhaseGrid
    weight: WeightParams = WeightParams(m=4.0, T=1.0)
    M: float = 1.0
    kappa: float = 1.0
    sign: str = "gravitational"
    cutoff_radius: float = 4.0
    dt: float | None = None
    safety: float = 0.5
    norm_tolerance: float = 0.05

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.cutoff_radius > 0:
            raise ValueError("cutoff_radius must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.sign not in ("gravitational", "plasma"):
            raise ValueError(f"sign must be 'gravitational' or 'plasma', got {self.sign!r}")


def _velocity_vectors(grid: PhaseGrid):
    va = grid.velocity.axis()
    return np.stack(np.meshgrid(va, va, va, indexing="ij"))


def assemble_coefficients(g, epsilon: float, t: float, cfg: LinearConfig, g_is_zero: bool = False) -> CoefficientSet:
    """Evaluate every coefficient of the frozen operator from ``g`` at time ``t``."""
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    grid = cfg.phase
    vv = _velocity_vectors(grid)
    transport = cutoff_chi(epsilon * np.moveaxis(vv, 0, -1))[None] * vv
    if g_is_zero:
        zero_phase = np.zeros(grid.shape)
        return CoefficientSet(
            transport, np.zeros((3,) + grid.space.shape), zero_phase, zero_phase, epsilon, epsilon
        )
    g = np.asarray(g, dtype=float)
    rho, _ = fields.moments(g, grid)
    e_field = fields.self_consistent_field(rho, grid.space, cfg.sign)
    xx = grid.space.coords()
    damp = time_mollifier_J(t, epsilon, cfg.weight.T) * cutoff_chi(epsilon * np.moveaxis(xx, 0, -1))
    a = fields.inverse_laplacian_3d(g, grid.velocity, "spectral", cutoff_epsilon=epsilon)
    return CoefficientSet(transport, damp[None] * e_field, a, g, epsilon, epsilon)


def _upwind(f, w, h, axis):
    # w . d/dz f with the upwind difference picked by the sign of w
    back = (f - _shift(f, axis, 1)) / h
    fwd = (_shift(f, axis, -1) - f) / h
    return w * np.where(w > 0, back, fwd)


def apply_operator(f, coeffs: CoefficientSet, grid: PhaseGrid):
    """Discrete ``A_g f`` (everything except the time derivative)."""
    f = np.asarray(f, dtype=float)
    hx, hv = grid.space.spacing, grid.velocity.spacing
    out = np.zeros_like(f)
    for d in range(3):
        w = coeffs.transport[d][None, None, None]
        if np.any(w):
            out += _upwind(f, w, hx, d)
        e = coeffs.acceleration[d][..., None, None, None]
        if np.any(e):
            out += _upwind(f, e, hv, 3 + d)
    lap_v = laplacian_zero_ext(f, hv, (3, 4, 5))
    out -= coeffs.diffusion_coeff * lap_v
    out -= coeffs.reaction * f
    out -= coeffs.artificial_diffusion * (lap_v + laplacian_zero_ext(f, hx, (0, 1, 2)))
    return out


def linear_source(f_init_eps, coeffs: CoefficientSet, t: float, kappa: float, grid: PhaseGrid):
    """``(A_g f_in_eps) I_eps(t)``; identically zero once ``t >= 2 eps^kappa``."""
    i_t = float(time_mollifier_I(t, coeffs.epsilon, kappa))
    if i_t == 0.0:
        return np.zeros(np.shape(f_init_eps))
    return apply_operator(f_init_eps, coeffs, grid) * i_t


def _rate_bound(coeffs: CoefficientSet, grid: PhaseGrid) -> float:
    """Sum of the off-diagonal rates: forward Euler is monotone for dt below its inverse."""
    hx, hv = grid.space.spacing, grid.velocity.spacing
    drift = np.sum(np.abs(coeffs.transport), axis=0).max() / hx
    accel = np.sum(np.abs(coeffs.acceleration), axis=0).max() / hv if coeffs.acceleration.size else 0.0
    diff = 6.0 * float(np.max(coeffs.diffusion_coeff, initial=0.0)) / hv**2
    art = 6.0 * coeffs.artificial_diffusion * (1.0 / hx**2 + 1.0 / hv**2)
    return float(drift + accel + diff + art)


def stable_dt(coeffs: CoefficientSet, grid: PhaseGrid) -> float:
    rate = _rate_bound(coeffs, grid)
    return math.inf if rate == 0 else 1.0 / rate


def solve_linear_forward(f_init_eps, coeffs_at, dt: float, T: float, cfg: LinearConfig, source_at=None):
    """Forward-Euler trajectory on the uniform time grid ``t_k = k dt`` up to ``T``.

    Parameters
    ----------
    coeffs_at : callable ``(k, t) -> CoefficientSet``
        Coefficients at step ``k``.
    source_at : callable ``(k, t, coeffs) -> ndarray``, optional
        Defaults to :func:`linear_source` of ``f_init_eps``.

    Returns the list of states ``[f(t_0), ..., f(t_K)]``.
    """
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * T:
        raise ValueError("T must be a positive integer multiple of dt")
    grid = cfg.phase
    f = np.array(f_init_eps, dtype=float)
    traj = [f.copy()]
    for k in range(steps):
        t = k * dt
        coeffs = coeffs_at(k, t)
        limit = stable_dt(coeffs, grid)
        if dt > limit * (1.0 + 1e-12):
            raise CFLError(f"dt = {dt:.6g} exceeds the monotone step bound {limit:.6g} at t = {t:.6g}")
        src = source_at(k, t, coeffs) if source_at else linear_source(f_init_eps, coeffs, t, cfg.kappa, grid)
        f = f - dt * (apply_operator(f, coeffs, grid) - src)
        if not np.all(np.isfinite(f)):
            raise FloatingPointError(f"non-finite values at t = {t + dt:.6g}")
        traj.append(f)
    return traj


def _phase_radius2(grid: PhaseGrid):
    xa, va = grid.space.axis(), grid.velocity.axis()
    x2 = xa[:, None, None] ** 2 + xa[None, :, None] ** 2 + xa[None, None, :] ** 2
    v2 = va[:, None, None] ** 2 + va[None, :, None] ** 2 + va[None, None, :] ** 2
    return x2[:, :, :, None, None, None] + v2[None, None, None]


def mollified_initial_data(f_init, epsilon: float, cfg: LinearConfig):
    """``f_in`` times the 6D cutoff ``chi(eps |(x, v)| / cutoff_radius)``."""
    r = np.sqrt(_phase_radius2(cfg.phase))
    return np.asarray(f_init, dtype=float) * cutoff_profile(epsilon * r / cfg.cutoff_radius)


def weighted_sup_norm(traj, dt: float, n: int, cfg: LinearConfig) -> float:
    """``sup_t <x - chi(v/n) v t>^m <v>^m |f|`` over a stored trajectory."""
    grid, m = cfg.phase, cfg.weight.m
    xa = grid.space.axis()
    vv = _velocity_vectors(grid)
    cv = cutoff_chi(np.moveaxis(vv, 0, -1) / n)[None] * vv  # chi(v/n) v
    wv = (1.0 + np.sum(vv * vv, axis=0)) ** (0.5 * m)
    best = 0.0
    for k, f in enumerate(traj):
        t = k * dt
        s2 = 0.0
        shape_x = [(len(xa), 1, 1), (1, len(xa), 1), (1, 1, len(xa))]
        for d in range(3):
            comp = xa.reshape(shape_x[d])[..., None, None, None] - t * cv[d][None, None, None]
            s2 = s2 + comp * comp
        w = (1.0 + s2) ** (0.5 * m) * wv[None, None, None]
        best = max(best, float(np.max(w * np.abs(f))))
    return best


@dataclass(frozen=True)
class IterationReport:
    n: int
    weighted_sup_norm: float
    min_value: float
    phi_chain_bound: float
    bound_satisfied: bool
    initial_layer_error: float = 0.0

    def to_json(self) -> str:
        keys = ("n", "weighted_sup_norm", "min_value", "phi_chain_bound", "bound_satisfied")
        return json.dumps({k: getattr(self, k) for k in keys})


@dataclass
class PicardResult:
    reports: list
    final: np.ndarray
    dt: float
    norm_c2: float
    phi: PhiParams
    roots: tuple
    trajectory: list = field(repr=False, default_factory=list)


def _default_dt(cfg: LinearConfig) -> float:
    grid = cfg.phase
    vmax = float(np.max(np.abs(grid.velocity.axis())))
    hx, hv = grid.space.spacing, grid.velocity.spacing
    rate = 3.0 * vmax / hx + 6.0 * (1.0 / hx**2 + 1.0 / hv**2)
    raw = cfg.safety / rate
    T = cfg.weight.T
    return T / math.ceil(T / raw)


def picard_sequence(f_init, N: int, cfg: LinearConfig, keep_trajectory: bool = False) -> PicardResult:
    """Run ``N`` iterations and compare each weighted norm with ``Phi^n(0)``.

    The chain uses ``c = ||f_in||_C2 (2<T>)^m`` and ``A = M (T+1)^3``; a report
    satisfies the bound when its weighted norm is within ``norm_tolerance``
    of ``Phi^n(0)`` or below it.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    grid = cfg.phase
    f_init = np.asarray(f_init, dtype=float)
    if f_init.shape != grid.shape:
        raise ValueError(f"f_init has shape {f_init.shape}, expected {grid.shape}")
    if np.any(f_init < 0):
        raise ValueError("initial data must be non-negative")
    T = cfg.weight.T
    dt = cfg.dt if cfg.dt is not None else _default_dt(cfg)
    norm = weighted_c2_norm(f_init, grid, cfg.weight)
    zero_data = norm == 0.0
    phi = picard_phi_params(norm if norm > 0 else 1e-300, cfg.M, cfg.weight.m, T)
    _, roots = phi_threshold_and_roots(phi)
    chain, _ = phi_iterate(phi, 0.0, N)
    if zero_data:
        chain = np.zeros(N)

    prev = None
    reports = []
    for n in range(1, N + 1):
        eps = 1.0 / n
        fin = mollified_initial_data(f_init, eps, cfg)

        def coeffs_at(k, t, prev=prev, eps=eps):
            if prev is None:
                return assemble_coefficients(None, eps, t, cfg, g_is_zero=True)
            return assemble_coefficients(prev[k], eps, t, cfg)

        traj = solve_linear_forward(fin, coeffs_at, dt, T, cfg)
        wnorm = weighted_sup_norm(traj, dt, n, cfg)
        layer = eps**cfg.kappa
        k_layer = min(int(math.floor(layer / dt + 1e-9)), len(traj) - 1)
        layer_err = max(float(np.max(np.abs(traj[k] - fin))) for k in range(k_layer + 1))
        bound = float(chain[n - 1])
        reports.append(
            IterationReport(
                n=n,
                weighted_sup_norm=wnorm,
                min_value=float(min(np.min(f) for f in traj)),
                phi_chain_bound=bound,
                bound_satisfied=bool(wnorm <= bound * (1.0 + cfg.norm_tolerance)),
                initial_layer_error=layer_err,
            )
        )
        prev = traj
    return PicardResult(
        reports=reports, final=prev[-1], dt=dt, norm_c2=norm, phi=phi, roots=roots,
        trajectory=prev if keep_trajectory else [],
    )  # fmt: skip


def small_gaussian_data(cfg: LinearConfig, fraction: float = 0.5, x_width: float = 1.0, v_width: float = 1.0):
    """``exp(-|x|^2/sx^2 - |v|^2/sv^2)`` scaled so its weighted C^2 norm is
    ``fraction`` times the smallness threshold for ``(M, m, T)``."""
    if not fraction > 0:
        raise ValueError("fraction must be positive")
    grid = cfg.phase
    xa, va = grid.space.axis(), grid.velocity.axis()
    gx = np.exp(-(xa[:, None, None] ** 2 + xa[None, :, None] ** 2 + xa[None, None, :] ** 2) / x_width**2)
    gv = np.exp(-(va[:, None, None] ** 2 + va[None, :, None] ** 2 + va[None, None, :] ** 2) / v_width**2)
    f = gx[:, :, :, None, None, None] * gv[None, None, None]
    target = fraction * smallness_threshold(cfg.M, cfg.weight.m, cfg.weight.T)
    return f * (target / weighted_c2_norm(f, grid, cfg.weight))
