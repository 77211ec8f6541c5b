import json
import math

import numpy as np
import pytest

from vpil import fields
from vpil.criterion import PhiParams, phi_threshold_and_roots, s_large_bound
from vpil.grids import Grid3, PhaseGrid, WeightParams, cutoff_chi, time_mollifier_I
from vpil.linear_scheme import (
    LinearConfig,
    apply_operator,
    assemble_coefficients,
    linear_source,
    mollified_initial_data,
    picard_sequence,
    small_gaussian_data,
    solve_linear_forward,
    stable_dt,
)
from vpil.transport import CFLError

TINY = PhaseGrid(Grid3(3.0, 4), Grid3(3.0, 4))
SMALL = PhaseGrid(Grid3(4.0, 6), Grid3(4.0, 6))


def _gaussian(grid, sx=1.0, sv=1.0):
    xa, va = grid.space.axis(), grid.velocity.axis()
    gx = np.exp(-(xa[:, None, None] ** 2 + xa[None, :, None] ** 2 + xa[None, None, :] ** 2) / sx**2)
    gv = np.exp(-(va[:, None, None] ** 2 + va[None, :, None] ** 2 + va[None, None, :] ** 2) / sv**2)
    return gx[:, :, :, None, None, None] * gv[None, None, None]


def test_config_validation():
    with pytest.raises(ValueError):
        LinearConfig(SMALL, M=0.0)
    with pytest.raises(ValueError):
        LinearConfig(SMALL, sign="neutral")
    with pytest.raises(ValueError):
        LinearConfig(SMALL, dt=-1.0)


# --- coefficients --------------------------------------------------------------------


def test_zero_coefficients():
    cfg = LinearConfig(SMALL)
    c = assemble_coefficients(np.zeros(SMALL.shape), 0.5, 0.1, cfg)
    assert np.all(c.diffusion_coeff == 0) and np.all(c.reaction == 0) and np.all(c.acceleration == 0)
    c0 = assemble_coefficients(None, 0.5, 0.1, cfg, g_is_zero=True)
    assert np.array_equal(c.transport, c0.transport)


def test_epsilon_range():
    with pytest.raises(ValueError):
        assemble_coefficients(None, 0.0, 0.0, LinearConfig(SMALL), g_is_zero=True)


def test_transport_bounded_by_cutoff():
    grid = PhaseGrid(Grid3(2.0, 4), Grid3(6.0, 12))
    for eps in (1.0, 0.5, 0.25):
        c = assemble_coefficients(None, eps, 0.0, LinearConfig(grid), g_is_zero=True)
        speed = np.sqrt(np.sum(c.transport**2, axis=0))
        vv = np.stack(np.meshgrid(*(grid.velocity.axis(),) * 3, indexing="ij"))
        vnorm = np.sqrt(np.sum(vv**2, axis=0))
        assert np.all(speed <= vnorm + 1e-15)
        assert np.all(speed <= 1.0 / eps + grid.velocity.spacing)


def test_localized_potential_agrees_on_support():
    grid = PhaseGrid(Grid3(2.0, 4), Grid3(4.0, 16))
    g = np.zeros(grid.shape)
    va = grid.velocity.axis()
    v2 = va[:, None, None] ** 2 + va[None, :, None] ** 2 + va[None, None, :] ** 2
    g[...] = np.where(v2 < 1.0, 1.0 - v2, 0.0)
    eps = 0.4  # chi(eps v) = 1 for |v| <= 1.25
    c = assemble_coefficients(g, eps, 0.0, LinearConfig(grid))
    plain = fields.inverse_laplacian_3d(g, grid.velocity, "spectral")
    assert np.allclose(c.diffusion_coeff, plain, rtol=1e-13, atol=1e-16)


def test_coefficients_scale_linearly():
    cfg = LinearConfig(SMALL)
    g = _gaussian(SMALL) * 0.01
    c1 = assemble_coefficients(g, 0.5, 0.2, cfg)
    c2 = assemble_coefficients(0.3 * g, 0.5, 0.2, cfg)
    assert np.allclose(c2.diffusion_coeff, 0.3 * c1.diffusion_coeff, rtol=1e-12, atol=0)
    assert np.allclose(c2.reaction, 0.3 * c1.reaction, rtol=1e-15)
    assert np.allclose(c2.acceleration, 0.3 * c1.acceleration, rtol=1e-12, atol=1e-300)
    assert np.all(c1.diffusion_coeff >= 0)


# --- source --------------------------------------------------------------------------


def test_source_vanishes_after_layer():
    cfg = LinearConfig(SMALL, kappa=1.0)
    c = assemble_coefficients(None, 0.5, 0.0, cfg, g_is_zero=True)
    f = _gaussian(SMALL)
    assert np.all(linear_source(f, c, 2 * 0.5 + 1e-9, 1.0, SMALL) == 0)
    assert np.all(linear_source(np.zeros(SMALL.shape), c, 0.0, 1.0, SMALL) == 0)


def _dense_operator(f, grid, eps):
    # g = 0: chi(eps v) v . grad_x f (upwind) - eps (Delta_x + Delta_v) f, node by node
    n, nv = grid.space.points_per_axis, grid.velocity.points_per_axis
    hx, hv = grid.space.spacing, grid.velocity.spacing
    va = grid.velocity.axis()
    out = np.zeros_like(f)

    def val(idx):
        lim = (n,) * 3 + (nv,) * 3
        return 0.0 if any(i < 0 or i >= m for i, m in zip(idx, lim)) else f[idx]

    for idx in np.ndindex(*f.shape):
        v = np.array([va[idx[3]], va[idx[4]], va[idx[5]]])
        w = float(cutoff_chi(eps * v)) * v
        acc = 0.0
        for d in range(6):
            up, dn = list(idx), list(idx)
            up[d] += 1
            dn[d] -= 1
            fu, fd, f0 = val(tuple(up)), val(tuple(dn)), f[idx]
            h = hx if d < 3 else hv
            if d < 3:
                acc += w[d] * ((f0 - fd) / h if w[d] > 0 else (fu - f0) / h)
            acc -= eps * (fu - 2 * f0 + fd) / h**2
        out[idx] = acc
    return out


def test_source_matches_dense_loop():
    eps, kappa = 0.5, 1.0
    cfg = LinearConfig(TINY, kappa=kappa)
    c = assemble_coefficients(None, eps, 0.0, cfg, g_is_zero=True)
    f = mollified_initial_data(_gaussian(TINY), eps, cfg)
    t = 0.6 * eps**kappa
    src = linear_source(f, c, t, kappa, TINY)
    dense = _dense_operator(f, TINY, eps) * float(time_mollifier_I(t, eps, kappa))
    assert np.allclose(src, dense, rtol=1e-10, atol=1e-14 * np.max(np.abs(dense)))


# --- forward solver ----------------------------------------------------------------------


def test_forward_zero():
    cfg = LinearConfig(SMALL)
    c = assemble_coefficients(None, 1.0, 0.0, cfg, g_is_zero=True)
    traj = solve_linear_forward(np.zeros(SMALL.shape), lambda k, t: c, 0.01, 0.05, cfg)
    assert len(traj) == 6 and all(np.all(f == 0) for f in traj)


def test_forward_rejects_bad_dt():
    cfg = LinearConfig(SMALL)
    c = assemble_coefficients(None, 1.0, 0.0, cfg, g_is_zero=True)
    f = _gaussian(SMALL)
    with pytest.raises(CFLError):
        solve_linear_forward(f, lambda k, t: c, 0.5, 1.0, cfg)
    with pytest.raises(ValueError):
        solve_linear_forward(f, lambda k, t: c, 0.03, 0.1, cfg)


def test_initial_layer_reproduces_data():
    # inside the layer the source cancels the operator, so f stays at f_in_eps
    eps = 0.5
    cfg = LinearConfig(SMALL, kappa=1.0, weight=WeightParams(m=4, T=1.0))
    fin = mollified_initial_data(_gaussian(SMALL) * 1e-3, eps, cfg)
    g = _gaussian(SMALL) * 1e-4
    for dt in (0.02, 0.01):
        traj = solve_linear_forward(fin, lambda k, t: assemble_coefficients(g, eps, t, cfg), dt, 1.0, cfg)
        k_layer = int(round(eps / dt))
        err = max(np.max(np.abs(traj[k] - fin)) for k in range(k_layer + 1))
        assert err <= 1e-12 * np.max(fin)
        assert min(f.min() for f in traj) >= -SMALL.space.spacing**2 * 1e-10


def test_stable_dt_is_monotone_bound():
    cfg = LinearConfig(SMALL)
    c = assemble_coefficients(_gaussian(SMALL) * 0.01, 0.5, 0.0, cfg)
    dt = stable_dt(c, SMALL)
    f = np.zeros(SMALL.shape)
    f[3, 3, 3, 3, 3, 3] = 1.0
    new = f - dt * apply_operator(f, c, SMALL)
    assert new.min() >= -1e-15


# --- Picard ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def picard_small():
    cfg = LinearConfig(SMALL, weight=WeightParams(m=4, T=0.5))
    f = small_gaussian_data(cfg)
    return cfg, f, picard_sequence(f, 2, cfg)


def test_first_bound_is_phi_of_zero(picard_small):
    cfg, f, res = picard_small
    c = res.norm_c2 * (2 * math.sqrt(1 + 0.25)) ** 4
    A = cfg.M * 1.5**3
    assert res.reports[0].phi_chain_bound == pytest.approx(c * math.exp(A), rel=1e-12)
    assert res.phi == PhiParams(c, A)


def test_picard_bounds_hold(picard_small):
    cfg, f, res = picard_small
    h2 = SMALL.space.spacing**2
    for rep in res.reports:
        assert rep.bound_satisfied
        assert rep.min_value >= -10 * h2 * np.max(f)
        assert rep.weighted_sup_norm <= s_large_bound(*_ab(res, cfg))
    assert len(res.roots) == 2


def _ab(res, cfg):
    b = cfg.M * (cfg.weight.T + 1) ** 3
    return res.phi.c * math.exp(b), b


def test_picard_report_json(picard_small):
    rep = picard_small[2].reports[0]
    assert set(json.loads(rep.to_json())) == {"n", "weighted_sup_norm", "min_value", "phi_chain_bound", "bound_satisfied"}


def test_picard_zero_fixed_point():
    cfg = LinearConfig(TINY, weight=WeightParams(m=4, T=0.25))
    res = picard_sequence(np.zeros(TINY.shape), 2, cfg)
    assert np.all(res.final == 0)
    assert all(r.weighted_sup_norm == 0 and r.bound_satisfied for r in res.reports)


def test_picard_input_validation():
    cfg = LinearConfig(TINY)
    with pytest.raises(ValueError):
        picard_sequence(np.zeros(TINY.shape), 0, cfg)
    with pytest.raises(ValueError):
        picard_sequence(-np.ones(TINY.shape), 1, cfg)
    with pytest.raises(ValueError):
        picard_sequence(np.zeros((2,) * 6), 1, cfg)


def test_small_gaussian_norm():
    from vpil.criterion import smallness_threshold
    from vpil.grids import weighted_c2_norm

    cfg = LinearConfig(TINY, weight=WeightParams(m=4, T=1.0))
    f = small_gaussian_data(cfg, fraction=0.25)
    assert weighted_c2_norm(f, TINY, cfg.weight) == pytest.approx(0.25 * smallness_threshold(1.0, 4, 1.0), rel=1e-12)
    thr, roots = phi_threshold_and_roots(PhiParams(1.0, 1.0))
    assert roots == ()
