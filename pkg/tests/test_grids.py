import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpil.grids import (
    Grid3,
    PhaseGrid,
    RadialGrid,
    WeightParams,
    ball_volume_fraction,
    bracket_weight,
    cutoff_chi,
    cutoff_profile,
    laplacian_zero_ext,
    time_mollifier_I,
    time_mollifier_J,
    transport_weight_bound,
    weighted_c2_norm,
)

vec3 = st.lists(st.floats(-50, 50), min_size=3, max_size=3)


# --- grids -------------------------------------------------------------------


def test_grid3_cell_centred():
    g = Grid3(2.0, 8)
    a = g.axis()
    assert g.spacing == 0.5
    assert a[0] == pytest.approx(-1.75) and a[-1] == pytest.approx(1.75)
    assert not np.any(np.isclose(np.abs(a), 2.0))
    assert not np.any(a == 0.0)


@pytest.mark.parametrize("n", [2, 5, 7, 0])
def test_grid3_rejects_odd_or_small(n):
    with pytest.raises(ValueError):
        Grid3(1.0, n)


def test_grid3_rejects_nonpositive_extent():
    with pytest.raises(ValueError):
        Grid3(0.0, 8)


def test_radial_grid_nodes():
    g = RadialGrid(1.0, 10)
    assert g.nodes()[0] == pytest.approx(0.05)
    assert g.shell_volumes().sum() == pytest.approx(4 * math.pi / 3)
    with pytest.raises(ValueError):
        RadialGrid(1.0, 7)


def test_weight_params_validation():
    with pytest.raises(ValueError):
        WeightParams(m=3.0)
    with pytest.raises(ValueError):
        WeightParams(T=0.0)
    with pytest.raises(ValueError):
        WeightParams(epsilon=1.5)


# --- brackets and cutoffs ----------------------------------------------------


@pytest.mark.parametrize(
    "z, expected",
    [((0, 0, 0), 1.0), ((1, 0, 0), math.sqrt(2)), ((3, 4, 0), math.sqrt(26))],
)
def test_bracket_examples(z, expected):
    assert bracket_weight(z) == pytest.approx(expected, rel=1e-14)
    assert math.sqrt(26) == pytest.approx(5.09902, abs=1e-5)


@given(vec3)
def test_bracket_lower_bounds(z):
    w = bracket_weight(z)
    assert w >= 1.0
    assert w >= np.linalg.norm(z)


def test_cutoff_plateau_and_support():
    assert cutoff_chi([0.4, 0.0, 0.0]) == 1.0
    assert cutoff_chi([0.0, 1.2, 0.0]) == 0.0
    assert cutoff_chi([0.0, 0.0, 0.5]) == 1.0
    assert cutoff_chi([1.0, 0.0, 0.0]) == 0.0


@given(vec3)
def test_cutoff_range(z):
    assert 0.0 <= cutoff_chi(np.array(z) / 25.0) <= 1.0


def test_cutoff_second_derivative_continuous():
    h = 1e-4
    for r0 in (0.5, 1.0):
        left = np.array([r0 - 2 * h, r0 - h, r0])
        right = np.array([r0, r0 + h, r0 + 2 * h])
        d2l = (cutoff_profile(left[0]) - 2 * cutoff_profile(left[1]) + cutoff_profile(left[2])) / h**2
        d2r = (cutoff_profile(right[0]) - 2 * cutoff_profile(right[1]) + cutoff_profile(right[2])) / h**2
        # the quintic blend has zero second derivative at both ends, so
        # one-sided differences agree up to O(h) times the third derivative
        assert abs(d2l - d2r) < 1e3 * h


# --- transport weight --------------------------------------------------------


def test_transport_weight_trivial_cases():
    p = WeightParams(m=7.0, T=1.0)
    v = np.array([0.3, -0.2, 0.1])
    lhs, rhs, holds = transport_weight_bound(v * 0.5, v, 0.5, WeightParams(m=7.0, T=1.0, epsilon=0.1))
    assert holds and rhs == pytest.approx((2 * math.sqrt(2)) ** 7, rel=1e-2)
    lhs, rhs, holds = transport_weight_bound(np.zeros(3), np.zeros(3), 0.0, p)
    assert lhs == 1.0 and rhs >= 2**7 and holds


@pytest.mark.parametrize("m", [4.0, 7.0])
def test_transport_weight_sampling(m):
    rng = np.random.default_rng(7)
    p = WeightParams(m=m, T=1.5, epsilon=0.5)
    x = rng.uniform(-5, 5, (10_000, 3))
    v = rng.uniform(-5, 5, (10_000, 3))
    t = rng.uniform(0, p.T, 10_000)
    _, _, holds = transport_weight_bound(x, v, t, p)
    assert holds.all()


def test_transport_weight_rejects_time_outside():
    with pytest.raises(ValueError):
        transport_weight_bound(np.zeros(3), np.zeros(3), 2.0, WeightParams(T=1.0))


# --- mollifiers ---------------------------------------------------------------


def test_mollifier_J_support():
    eps, T = 0.1, 1.0
    assert time_mollifier_J(T / 2, eps, T) == pytest.approx(1.0, abs=1e-15)
    assert time_mollifier_J(T + eps, eps, T) == 0.0
    assert time_mollifier_J(-1.01 * eps, eps, T) == 0.0
    t = np.linspace(0, T - eps, 101)
    assert np.allclose(time_mollifier_J(t, eps, T), 1.0, atol=1e-15)


def test_mollifier_J_monotone_near_left_edge():
    eps, T = 0.2, 1.0
    mid = time_mollifier_J(-eps / 2, eps, T)
    assert 0.0 < mid < 1.0
    t = np.linspace(-eps, 0, 201)
    assert np.all(np.diff(time_mollifier_J(t, eps, T)) >= -1e-15)


@pytest.mark.parametrize("eps, kappa", [(0.5, 1.0), (0.25, 2.0), (1.0, 0.5)])
def test_mollifier_I(eps, kappa):
    d = eps**kappa
    assert time_mollifier_I(d / 2, eps, kappa) == pytest.approx(1.0, abs=1e-15)
    assert time_mollifier_I(3 * d, eps, kappa) == 0.0
    t = np.linspace(d, 2 * d, 401)
    vals = time_mollifier_I(t, eps, kappa)
    assert np.all(np.diff(vals) <= 1e-15)
    assert np.all((vals >= 0) & (vals <= 1))


@given(st.floats(-3, 3), st.floats(0.01, 1.0))
def test_mollifiers_in_unit_interval(t, eps):
    for val in (time_mollifier_J(t, eps, 1.0), time_mollifier_I(t, eps, 1.0)):
        assert -1e-15 <= val <= 1 + 1e-15


# --- weighted norm -----------------------------------------------------------


def test_weighted_norm_zero():
    g = PhaseGrid(Grid3(3.0, 4), Grid3(3.0, 4))
    assert weighted_c2_norm(np.zeros(g.shape), g, WeightParams(m=4)) == 0.0


def test_weighted_norm_rejects_nonfinite():
    g = PhaseGrid(Grid3(3.0, 4), Grid3(3.0, 4))
    f = np.zeros(g.shape)
    f[0, 0, 0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        weighted_c2_norm(f, g, WeightParams(m=4))


def _dense_norm(f, grid, m):
    # direct per-node loop, no array shifting
    n, nv = grid.space.points_per_axis, grid.velocity.points_per_axis
    hx, hv = grid.space.spacing, grid.velocity.spacing
    xa, va = grid.space.axis(), grid.velocity.axis()

    def val(idx):
        if any(i < 0 or i >= (n if k < 3 else nv) for k, i in enumerate(idx)):
            return 0.0
        return f[idx]

    best = 0.0
    for idx in np.ndindex(*f.shape):
        f0 = f[idx]
        lap_x = lap_v = 0.0
        vgx = 0.0
        gv2 = 0.0
        for d in range(6):
            up = list(idx)
            dn = list(idx)
            up[d] += 1
            dn[d] -= 1
            fu, fd = val(tuple(up)), val(tuple(dn))
            if d < 3:
                lap_x += (fu - 2 * f0 + fd) / hx**2
                vgx += va[idx[3 + d]] * (fu - fd) / (2 * hx)
            else:
                lap_v += (fu - 2 * f0 + fd) / hv**2
                gv2 += ((fu - fd) / (2 * hv)) ** 2
        total = abs(f0) + abs(vgx) + math.sqrt(gv2) + abs(lap_x) + abs(lap_v)
        x2 = sum(xa[i] ** 2 for i in idx[:3])
        v2 = sum(va[i] ** 2 for i in idx[3:])
        best = max(best, total * (1 + x2) ** (m / 2) * (1 + v2) ** m)
    return best


def test_weighted_norm_matches_dense_loop():
    g = PhaseGrid(Grid3(3.0, 8), Grid3(3.0, 8))
    xa, va = g.space.axis(), g.velocity.axis()
    x2 = xa[:, None, None] ** 2 + xa[None, :, None] ** 2 + xa[None, None, :] ** 2
    v2 = va[:, None, None] ** 2 + va[None, :, None] ** 2 + va[None, None, :] ** 2
    f = np.exp(-x2)[:, :, :, None, None, None] * np.exp(-v2)[None, None, None]
    fast = weighted_c2_norm(f, g, WeightParams(m=4))
    assert fast == pytest.approx(_dense_norm(f, g, 4), rel=1e-10)


def test_weighted_norm_monotone_in_m():
    g = PhaseGrid(Grid3(4.0, 8), Grid3(4.0, 8))
    xa, va = g.space.axis(), g.velocity.axis()
    x2 = xa[:, None, None] ** 2 + xa[None, :, None] ** 2 + xa[None, None, :] ** 2
    v2 = va[:, None, None] ** 2 + va[None, :, None] ** 2 + va[None, None, :] ** 2
    f = np.exp(-x2)[:, :, :, None, None, None] * np.exp(-v2)[None, None, None]
    norms = [weighted_c2_norm(f, g, WeightParams(m=m)) for m in (4, 5, 7)]
    assert norms[0] <= norms[1] <= norms[2]


# --- stencils ---------------------------------------------------------------


def test_laplacian_exact_on_quadratic_interior():
    g = Grid3(1.0, 8)
    r2 = g.radius() ** 2
    lap = laplacian_zero_ext(r2, g.spacing, (0, 1, 2))
    assert np.allclose(lap[1:-1, 1:-1, 1:-1], 6.0, rtol=1e-12)


def test_ball_volume_fraction_total():
    g = Grid3(1.5, 16)
    vol = ball_volume_fraction(g).sum() * g.cell_volume
    assert vol == pytest.approx(4 * math.pi / 3, rel=1e-3)
    frac = ball_volume_fraction(g)
    assert frac.min() >= 0 and frac.max() <= 1


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12).map(lambda k: 2 * k), st.floats(0.5, 4.0))
def test_grid_spacing_property(n, L):
    g = Grid3(L, n)
    a = g.axis()
    assert np.allclose(np.diff(a), g.spacing)
    assert a[0] - g.spacing / 2 == pytest.approx(-L)
