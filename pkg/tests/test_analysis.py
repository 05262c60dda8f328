import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from btloc import analysis as an
from btloc.discretize import Grid2D, assemble_schrodinger_1d, graded_grid, make_grid2d, uniform_grid
from btloc.eigensolve import EigenPair, shift_invert_arnoldi
from btloc.fiber import build_u1, fiber_matrix
from btloc.model import (
    E_PI_3,
    E_PI_4,
    catalog_config,
    constant_alpha,
    quadratic_potential,
)
from btloc.specfn import airy_zero

Z1 = abs(airy_zero(1))


@pytest.fixture(scope="module")
def small_point():
    cfg = catalog_config("figure2", 2.0 ** -5, nx=160, ny=80)
    pair, grid = an.solve_lowest(cfg)
    return cfg, pair, grid


def pair_from_nodal(psi, grid):
    v = grid.from_nodal(psi)
    return EigenPair(0j, v / np.linalg.norm(v), 0.0)


def test_gaussian_width_oracle():
    sigma = 0.3
    g = Grid2D(uniform_grid(-4, 4, 2001), uniform_grid(0, 8, 200))
    u = build_u1(g.gy).values
    psi = np.exp(-g.gx.nodes ** 2 / (4 * sigma ** 2))[:, None] * u[None, :]
    w = an.localization_widths(pair_from_nodal(psi, g), g, h=0.01)
    assert w.width_x == pytest.approx(2 * norm.ppf(0.95) * sigma, rel=0.05)
    assert w.width_x == pytest.approx(2 * 1.645 * sigma, rel=1e-3)
    assert 0 < w.mass_outside_box <= 1


def test_single_cell_mass():
    # constant density on one dual cell: the central 90% covers 0.9 of that cell
    g = Grid2D(graded_grid(4.0, 41, 0.05), uniform_grid(0, 8, 30))
    v = np.zeros(g.n, dtype=complex)
    i, j = 20, 10
    v[i * g.gy.n + j] = 1.0
    w = an.localization_widths(EigenPair(0j, v, 0.0), g, h=0.01)
    assert w.width_x == pytest.approx(0.9 * g.gx.weights[i], rel=1e-12)
    assert w.width_y == pytest.approx(0.9 * g.gy.weights[j], rel=1e-12)


def test_marginal_needs_mass():
    with pytest.raises(ValueError):
        an.marginal_quantile_width(uniform_grid(0, 1, 5), np.zeros(5))


@pytest.fixture(scope="module")
def small_fibers(small_point):
    cfg, pair, grid = small_point
    return fiber_matrix(cfg.alpha, grid)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(-math.pi, math.pi))
def test_outputs_invariant_under_scaling(small_point, small_fibers, scale, phase):
    cfg, pair, grid = small_point
    c = scale * cmath.exp(1j * phase)
    other = EigenPair(pair.value, c * pair.vector, pair.residual)
    a, b = an.localization_widths(pair, grid, cfg.h), an.localization_widths(other, grid, cfg.h)
    assert b.width_x == pytest.approx(a.width_x, rel=1e-12)
    assert b.width_y == pytest.approx(a.width_y, rel=1e-12)
    assert b.mass_outside_box == pytest.approx(a.mass_outside_box, rel=1e-9, abs=1e-15)
    r1 = an.agmon_ratio(pair, cfg.potential, 0.5, grid, cfg.h)
    r2 = an.agmon_ratio(other, cfg.potential, 0.5, grid, cfg.h)
    assert r2 == pytest.approx(r1, rel=1e-12)
    d1 = an.projection_deficit(pair, cfg.alpha, grid, fibers=small_fibers)
    d2 = an.projection_deficit(other, cfg.alpha, grid, fibers=small_fibers)
    assert d2 == pytest.approx(d1, rel=1e-9)


def test_symmetric_widths(small_point):
    cfg, pair, grid = small_point
    flipped = grid.to_nodal(pair.vector)[::-1, :]
    other = pair_from_nodal(flipped, grid)
    a = an.localization_widths(pair, grid, cfg.h)
    b = an.localization_widths(other, grid, cfg.h)
    assert b.width_x == pytest.approx(a.width_x, rel=1e-12)
    assert b.width_y == pytest.approx(a.width_y, rel=1e-12)


def test_scaling_fit_exact_laws():
    hs = [2.0 ** -n for n in range(4, 9)]
    f = an.scaling_fit([(h, h ** 0.5) for h in hs])
    assert f.slope == pytest.approx(0.5) and f.r_squared == pytest.approx(1.0)
    f = an.scaling_fit([(h, 3 * h ** (2 / 3)) for h in hs])
    assert f.slope == pytest.approx(0.6667, abs=1e-4)
    assert f.intercept == pytest.approx(math.log(3))
    assert f.predict(0.5) == pytest.approx(3 * 0.5 ** (2 / 3))
    assert len(f.points) == 5


def test_scaling_fit_errors():
    with pytest.raises(ValueError):
        an.scaling_fit([(0.1, 1.0), (0.2, 2.0)])
    with pytest.raises(ValueError):
        an.scaling_fit([(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)])


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=3, max_size=8))
def test_r_squared_in_unit_interval(qs):
    f = an.scaling_fit([(2.0 ** -(i + 1), q) for i, q in enumerate(qs)])
    assert 0.0 <= f.r_squared <= 1.0


def test_agmon_ratio_mu_one(small_point):
    cfg, pair, grid = small_point
    assert an.agmon_ratio(pair, cfg.potential, 1.0, grid, cfg.h) == 1.0


def test_agmon_ratio_monotone_in_mu(small_point):
    cfg, pair, grid = small_point
    r = [an.agmon_ratio(pair, cfg.potential, mu, grid, cfg.h) for mu in (1.0, 0.75, 0.5, 0.25, 0.0)]
    assert all(b >= a for a, b in zip(r, r[1:]))


def test_agmon_weighted_and_plain_solves_agree():
    # two routes to the same number: the plain eigenvector and the
    # eigenvector of the conjugated operator mapped back.  At mu = 0.75 the
    # weight stays below e^23 on the box, so the plain vector's round-off
    # tails do not matter yet.
    cfg = catalog_config("figure2", 2.0 ** -4, nx=200, ny=100)
    plain, grid = an.solve_lowest(cfg)
    conj, _ = an.solve_lowest(cfg, weight_mu=0.75)
    assert conj.value == pytest.approx(plain.value, abs=1e-4 * abs(plain.value))
    r1 = an.agmon_ratio(plain, cfg.potential, 0.75, grid, cfg.h)
    r2 = an.agmon_ratio(conj, cfg.potential, 0.75, grid, cfg.h)
    assert r2 == pytest.approx(r1, rel=1e-3)


def test_plain_vector_inadequate_for_strong_weights():
    # at mu = 0.5 the weight reaches e^45 and amplifies round-off in the
    # plain eigenvector; the conjugated solve is needed there
    cfg = catalog_config("figure2", 2.0 ** -4, nx=200, ny=100)
    plain, grid = an.solve_lowest(cfg)
    conj, _ = an.solve_lowest(cfg, weight_mu=0.5)
    r1 = an.agmon_ratio(plain, cfg.potential, 0.5, grid, cfg.h)
    r2 = an.agmon_ratio(conj, cfg.potential, 0.5, grid, cfg.h)
    assert r2 < 1.5 < 10 < r1
    with pytest.raises(ValueError):
        an.solve_lowest(cfg, mode="T", weight_mu=0.5)


def test_agmon_overflow_reported():
    g = uniform_grid(-4, 4, 101)
    v = np.ones(101, dtype=complex) / math.sqrt(101)
    pair = EigenPair(0j, v, 0.0, np.zeros(101))
    h = 1e-4
    lv = an.log_agmon_ratio(pair, quadratic_potential(), 0.0, g, h)
    assert lv > 709
    with pytest.raises(an.AgmonOverflow) as info:
        an.agmon_ratio(pair, quadratic_potential(), 0.0, g, h)
    assert info.value.log_value == pytest.approx(lv)


def test_quasimode_routes_agree():
    cfg = catalog_config("generic", 2.0 ** -5, nx=120, ny=80)
    g = an._quasimode_grid(cfg, 0, cfg.nx, cfg.ny)
    a = an.quasimode_residual(cfg, g, method="factored")
    b = an.quasimode_residual(cfg, g, method="assembled")
    assert a == pytest.approx(b, rel=1e-8)


def test_quasimode_separable_decays_under_refinement():
    cfg = catalog_config("quadratic", 2.0 ** -5)
    hist = an.quasimode_residual_history(cfg, levels=3, nx=200, ny=100)
    vals = [v for _, _, v in hist]
    assert all(b < a / 3 for a, b in zip(vals, vals[1:]))  # second order in the mesh


def test_quasimode_mesh_convergent():
    cfg = catalog_config("generic", 2.0 ** -6)
    r = an.quasimode_residual(cfg)
    hist = an.quasimode_residual_history(cfg, levels=4, nx=cfg.nx, ny=cfg.ny)
    vals = [v for _, _, v in hist]
    # the accepted value changes by < 5% when the mesh is halved once more
    i = min(range(1, len(vals)), key=lambda k: abs(vals[k - 1] - r))
    assert abs(vals[i] - vals[i - 1]) <= 0.05 * vals[i]


def test_quasimode_refinement_cap():
    cfg = catalog_config("generic", 2.0 ** -6)
    with pytest.raises(an.RefinementCapReached):
        an.quasimode_residual(cfg, max_levels=1)


def test_quasimode_sanity_bound():
    cfg = catalog_config("figure2", 2.0 ** -6)
    assert an.quasimode_residual(cfg) < 0.1 * abs(an.quasimode_eigenvalue(cfg))


def test_projection_exact_tensor():
    cfg = catalog_config("quadratic", 2.0 ** -5, nx=120, ny=100)
    g = make_grid2d(cfg)
    U, _ = fiber_matrix(cfg.alpha, g)
    psi = np.exp(-g.gx.nodes ** 2 / cfg.h)[:, None] * U
    assert an.projection_deficit(pair_from_nodal(psi, g), cfg.alpha, g) <= 1e-12


def test_separable_eigenvalue_is_sum_of_1d_spectra():
    cfg = catalog_config("quadratic", 2.0 ** -5, nx=300, ny=200)
    pair, g = an.solve_lowest(cfg)
    s = cfg.h ** (2 / 3)
    mx = assemble_schrodinger_1d(cfg.h, cfg.potential, g.gx)
    lx = shift_invert_arnoldi(mx, E_PI_4 * cfg.h, k=1)[0].value
    from btloc.discretize import assemble_airy_1d

    ly = shift_invert_arnoldi(assemble_airy_1d(1.0, g.gy), Z1 * E_PI_3, k=1)[0].value
    assert pair.value == pytest.approx(lx + s * ly, abs=1e-10)
    exact = Z1 * E_PI_3 * s + E_PI_4 * cfg.h
    assert abs(pair.value - exact) <= 1e-3 * abs(exact)


def test_eigenvalue_table_and_disk():
    base = catalog_config("figure2", 0.5, nx=160, ny=80)
    tab = an.eigenvalue_asymptotics(base, [4, 5, 6])
    assert [r.n for r in tab.rows] == [4, 5, 6]
    assert all(r.in_disk for r in tab.rows)
    assert tab.fit is not None and tab.fit.slope > 1.0
    for r in tab.rows:
        assert r.error == pytest.approx(abs(r.value - r.mu1))


def test_sweep_parallel_equals_serial():
    base = catalog_config("figure2", 0.5, nx=100, ny=50)
    a = an.run_sweep(base, [6, 4, 5], workers=1)
    b = an.run_sweep(base, [4, 5, 6], workers=2)
    assert [p.n for p in a] == [4, 5, 6]
    for p, q in zip(a, b):
        assert p.pair.value == q.pair.value
        assert np.array_equal(p.pair.vector, q.pair.vector)


def test_shift_policies():
    cfg = catalog_config("figure2", 2.0 ** -5, nx=100, ny=50)
    a, _ = an.solve_lowest(cfg, shift="quasimode")
    b, _ = an.solve_lowest(cfg, shift="leading")
    assert a.value == pytest.approx(b.value, abs=1e-9)
    with pytest.raises(ValueError):
        an.solve_lowest(cfg, shift="zero")


def test_t_mode_solve_matches_rescaled():
    cfg = catalog_config("figure2", 2.0 ** -5, nx=200, ny=100)
    a, _ = an.solve_lowest(cfg, mode="L")
    b, _ = an.solve_lowest(cfg, mode="T")
    assert b.value == pytest.approx(a.value, rel=2e-3)


def test_sharpness_small():
    rep = an.sharpness_experiment([4, 5, 6])
    assert rep.unweighted_increasing
    assert rep.positive_real_parts
    assert rep.variation(0.5) < 3
    for r in rep.rows:
        assert abs(r.eigenvalue - E_PI_4 * r.h) <= 5 * r.h
        assert r.ratios[0.0] >= r.ratios[0.25] >= r.ratios[0.5] >= 1.0
