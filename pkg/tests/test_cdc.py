import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sevenleague.cdc import (CdcMatrix, build_matrix, conditional_points_from_matrix, predicted_speedup,
                             simulate_cdc, simulate_cdc_with_draws)
from sevenleague.models import SdeParams, TimeGrid, exact_quantiles
from sevenleague.paths import normal_draws
from sevenleague.probability import gauss_hermite_normal, ks_two_sample
from sevenleague.seven_league import AnalyticSurrogate, SevenLeagueSampler

RULE = gauss_hermite_normal(5)
OU = SdeParams.ou(lam=0.8, ybar=1.5, sigma=0.4, y0=0.5)


class Counting:
    """Surrogate wrapper that counts predict calls and rows."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.rows = 0

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def predict(self, X):
        X = np.atleast_2d(X)
        self.calls += 1
        self.rows += X.shape[0]
        return self.inner.predict(X)


def oracle(params, m_s=5):
    kind = params.kind.value
    s = SevenLeagueSampler(AnalyticSurrogate(kind, RULE.nodes), RULE, params)
    marginal = AnalyticSurrogate(kind, gauss_hermite_normal(m_s).nodes)
    return s, marginal


def test_single_step_matrix(gbm):
    s, mar = oracle(gbm)
    m = build_matrix(s, mar, TimeGrid(0.5, 1))
    assert m.marginal.shape == (1, 5) and m.conditional.shape == (1, 5, 5)
    assert np.all(m.marginal[0] == gbm.y0)
    assert np.allclose(m.conditional[0], exact_quantiles(gbm, 1.0, 0.5, RULE.nodes), rtol=1e-14)


def test_oracle_matrix_matches_analytic_quantiles(gbm):
    s, mar = oracle(gbm)
    grid = TimeGrid.uniform(4.0, 0.5)
    m = build_matrix(s, mar, grid)
    assert (m.n_times, m.m_s, m.m_c) == (8, 5, 5)
    for i in range(1, m.n_times):
        assert np.allclose(m.marginal[i], exact_quantiles(gbm, gbm.y0, grid.times[i], RULE.nodes), rtol=1e-13)
        for j in range(m.m_s):
            assert np.allclose(m.conditional[i, j], exact_quantiles(gbm, m.marginal[i, j], 0.5, RULE.nodes),
                               rtol=1e-13)


def test_surrogate_calls(gbm):
    s, mar = oracle(gbm)
    s.surrogate = Counting(s.surrogate)
    mar = Counting(mar)
    grid = TimeGrid.uniform(3.0, 0.5)
    m = build_matrix(s, mar, grid)
    assert (mar.calls, mar.rows) == (1, 6)
    assert (s.surrogate.calls, s.surrogate.rows) == (1, 6 * 5)
    simulate_cdc(m, 1000, 0)
    assert s.surrogate.calls == 1 and mar.calls == 1


def test_knot_realization_gives_row(gbm):
    s, mar = oracle(gbm)
    m = build_matrix(s, mar, TimeGrid.uniform(2.0, 0.5))
    for j in range(5):
        c = conditional_points_from_matrix(m, 2, m.marginal[2, j])
        assert np.array_equal(c.y_points, m.conditional[2, j])


def test_outside_hull_clamps_to_nearest_row(gbm):
    s, mar = oracle(gbm)
    m = build_matrix(s, mar, TimeGrid.uniform(2.0, 0.5))
    lo, hi = m.marginal[3, 0], m.marginal[3, -1]
    assert np.array_equal(conditional_points_from_matrix(m, 3, 10 * hi).y_points, m.conditional[3, -1])
    assert np.array_equal(conditional_points_from_matrix(m, 3, lo / 10).y_points, m.conditional[3, 0])


def test_linear_anchors_exact_for_gbm(gbm):
    # GBM conditional quantiles are proportional to the realization, so linear extension is exact
    s, mar = oracle(gbm)
    m = build_matrix(s, mar, TimeGrid.uniform(2.0, 0.5), anchor_extrapolation="linear")
    for y in (0.05, 0.9, 7.0):
        got = conditional_points_from_matrix(m, 3, y).y_points
        assert np.allclose(got, exact_quantiles(gbm, y, 0.5, RULE.nodes), rtol=1e-12)


@pytest.mark.parametrize("anchors", ["clamp", "linear"])
def test_ou_affine_decompression_exact(anchors):
    s, mar = oracle(OU)
    grid = TimeGrid.uniform(2.0, 0.25)
    m = build_matrix(s, mar, grid, anchor_extrapolation=anchors)
    rng = np.random.default_rng(0)
    for i in range(1, m.n_times):
        ys = rng.uniform(m.marginal[i, 0], m.marginal[i, -1], 5)
        if anchors == "linear":
            ys = np.append(ys, [m.marginal[i, 0] - 2.0, m.marginal[i, -1] + 3.0])
        for y in ys:
            want = exact_quantiles(OU, y, 0.25, RULE.nodes)
            assert np.allclose(conditional_points_from_matrix(m, i, y).y_points, want, atol=1e-12)


def test_oracle_cdc_equals_7l_with_linear_anchors(gbm):
    s, mar = oracle(gbm)
    grid = TimeGrid.uniform(4.0, 0.5)
    z = normal_draws(3, 2000, grid.n_steps)
    m = build_matrix(s, mar, grid, anchor_extrapolation="linear")
    a = simulate_cdc_with_draws(m, z).states
    b = s.simulate_with_draws(grid, z).states
    assert np.allclose(a, b, rtol=1e-11)


def test_more_anchors_approach_7l(gbm):
    grid = TimeGrid.uniform(4.0, 0.5)
    z = normal_draws(4, 10_000, grid.n_steps)
    ks = []
    for m_s in (2, 3, 5, 9):
        s, mar = oracle(gbm, m_s)
        ref = s.simulate_with_draws(grid, z).terminal
        ks.append(ks_two_sample(simulate_cdc_with_draws(build_matrix(s, mar, grid), z).terminal, ref)[0])
    # non-increasing within sampling noise of order 1e-3
    assert all(b <= a + 2e-3 for a, b in zip(ks, ks[1:]))
    assert ks[-1] < ks[0]


def test_deterministic_and_round_trip(tmp_path, gbm):
    s, mar = oracle(gbm)
    m = build_matrix(s, mar, TimeGrid.uniform(2.0, 0.5), anchor_extrapolation="linear")
    head, binp = m.save(tmp_path / "c")
    assert binp.stat().st_size == 8 * 4 * 5 * 6
    back = CdcMatrix.load(tmp_path / "c")
    assert np.array_equal(back.marginal, m.marginal) and np.array_equal(back.conditional, m.conditional)
    assert back.anchor_extrapolation == m.anchor_extrapolation and back.params == gbm
    a, b = simulate_cdc(m, 500, 7), simulate_cdc(back, 500, 7)
    assert np.array_equal(a.states, b.states)
    binp.write_bytes(binp.read_bytes()[:-8])
    with pytest.raises(ValueError, match="size"):
        CdcMatrix.load(tmp_path / "c")


def test_invariants_enforced():
    x = RULE.nodes
    with pytest.raises(ValueError, match="non-decreasing"):
        CdcMatrix([0.0], 0.5, x, x, np.array([[1.0, 0.9, 1.1, 1.2, 1.3]]), np.ones((1, 5, 5)))
    with pytest.raises(ValueError, match="shapes"):
        CdcMatrix([0.0, 0.5], 0.5, x, x, np.ones((1, 5)), np.ones((1, 5, 5)))


def test_predicted_speedup_values():
    assert predicted_speedup(1.0, 1.0, 5, 10 ** 7) == pytest.approx(1.0, abs=1e-6)
    assert predicted_speedup(0.1, 1.0, 5, 10_000) == pytest.approx(0.1005)
    with pytest.raises(ValueError):
        predicted_speedup(0.0, 1.0, 5, 10)


@settings(max_examples=25, deadline=None)
@given(y=st.floats(0.01, 50.0), i=st.integers(1, 7))
def test_decompressed_points_sorted(gbm, y, i):
    s, mar = oracle(gbm)
    m = build_matrix(s, mar, TimeGrid.uniform(4.0, 0.5))
    p = conditional_points_from_matrix(m, i, y).y_points
    assert np.all(np.diff(p) >= 0)
    assert m.conditional[i, 0, 0] <= p[0] and p[-1] <= m.conditional[i, -1, -1]


# trained desk-scale surrogates

def test_trained_cdc_matches_7l(desk_sampler, cdc_model):
    grid = TimeGrid.uniform(4.0, 0.5)
    z = normal_draws(5, 10_000, grid.n_steps)
    seven = desk_sampler.simulate_with_draws(grid, z).terminal
    for anchors in ("clamp", "linear"):
        m = build_matrix(desk_sampler, cdc_model, grid, anchor_extrapolation=anchors)
        assert ks_two_sample(simulate_cdc_with_draws(m, z).terminal, seven)[0] < 0.02
