import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sevenleague.models import SdeParams, TimeGrid
from sevenleague.neural import glorot_init
from sevenleague.paths import normal_draws
from sevenleague.pricing import OptionSpec
from sevenleague.probability import gauss_hermite_normal
from sevenleague.sensitivity import (asian_vega, asian_vega_fd_exact, asian_vega_from_paths,
                                     exact_path_sensitivity, path_sensitivity, step_sensitivity, theta_index)
from sevenleague.seven_league import AnalyticSurrogate, SevenLeagueSampler

RULE = gauss_hermite_normal(5)
VEGA_GBM = SdeParams.gbm(0.05, 0.3, 1.0)
VEGA_SPEC = OptionSpec("asian", 1.0, 0.05, 4, 1.0)


def oracle(params=VEGA_GBM, kind="pchip"):
    return SevenLeagueSampler(AnalyticSurrogate("GBM", RULE.nodes), RULE, params, kind)


def test_constant_surrogate_has_zero_sensitivity():
    net = glorot_init((5, 4, 5), 0)
    net.weights = [np.zeros_like(W) for W in net.weights]
    net.biases[-1] = np.linspace(0.5, 1.5, 5)
    s = SevenLeagueSampler(net, RULE, VEGA_GBM)
    _, d = step_sensitivity(s, np.ones(4), 0.0, 0.0, 1.0, np.array([-1.0, 0.0, 0.3, 2.0]), 1)
    assert np.array_equal(d, np.zeros(4))


@pytest.mark.parametrize("kind", ["pchip", "barycentric", "chebyshev"])
def test_oracle_step_matches_analytic_vega(kind):
    s = oracle(kind=kind)
    z = np.linspace(-2.5, 2.5, 41)
    grid = TimeGrid(1.0, 1)
    y, d = step_sensitivity(s, np.ones_like(z), 0.0, 0.0, 1.0, z, theta_index(VEGA_GBM, "sigma"))
    want = exact_path_sensitivity(VEGA_GBM, grid, z[:, None])
    assert np.allclose(y, want.states[:, 1], rtol=0.01)
    assert np.allclose(d, want.dstate_dtheta[:, 1], rtol=0.02, atol=0.02 * np.abs(want.dstate_dtheta).max())


def test_nodes_give_exact_vega():
    # at a collocation node the interpolant returns the knot, so the derivative is the knot derivative
    s = oracle()
    y, d = step_sensitivity(s, np.ones(5), 0.0, 0.0, 1.0, RULE.nodes, 1)
    want = exact_path_sensitivity(VEGA_GBM, TimeGrid(1.0, 1), RULE.nodes[:, None])
    assert np.allclose(d, want.dstate_dtheta[:, 1], rtol=1e-10)


def test_oracle_path_vega_tracks_analytic():
    s = oracle()
    grid = TimeGrid(1.0, 4)
    z = normal_draws(0, 2000, 4)
    got = path_sensitivity(s, grid, z)
    want = exact_path_sensitivity(VEGA_GBM, grid, z)
    assert np.all(got.dstate_dtheta[:, 0] == 0)
    inner = np.all(np.abs(z) < 2.5, axis=1)
    err = np.abs(got.dstate_dtheta[inner] - want.dstate_dtheta[inner]).mean()
    assert err < 0.02 * np.abs(want.dstate_dtheta).mean()


def test_zero_and_huge_strike_vega():
    s = oracle(SdeParams.gbm(0.0, 0.3, 1.0))
    sens = path_sensitivity(s, TimeGrid(1.0, 4), normal_draws(1, 3000, 4))
    assert asian_vega_from_paths(sens, OptionSpec("asian", 1e6, 0.0, 4, 1.0)) == 0.0
    v = asian_vega_from_paths(sens, OptionSpec("asian", 1e-12, 0.0, 4, 1.0))
    assert v == pytest.approx(sens.dstate_dtheta[:, 1:].mean(), rel=1e-12)


def test_oracle_vega_matches_finite_differences():
    v = asian_vega(oracle(), VEGA_SPEC, 100_000, 2)
    fd = asian_vega_fd_exact(VEGA_GBM, VEGA_SPEC, 100_000, 2)
    assert v == pytest.approx(fd, rel=0.02)


def test_exact_pathwise_vega_matches_fd():
    # analytic pathwise route against the bump route on identical exact paths
    grid = TimeGrid(1.0, 4)
    sens = exact_path_sensitivity(VEGA_GBM, grid, normal_draws(2, 100_000, 4))
    v = asian_vega_from_paths(sens, VEGA_SPEC)
    assert v == pytest.approx(asian_vega_fd_exact(VEGA_GBM, VEGA_SPEC, 100_000, 2), rel=2e-3)


def test_rejections():
    with pytest.raises(ValueError):
        theta_index(VEGA_GBM, "lam")

    class NoJacobian:
        n_inputs, n_outputs = 5, 5
        input_bounds = (np.full(5, -np.inf), np.full(5, np.inf))

        def predict(self, X):
            return np.sort(np.atleast_2d(X)[:, :5], axis=1)

    s = SevenLeagueSampler(NoJacobian(), RULE, VEGA_GBM)
    with pytest.raises(TypeError):
        step_sensitivity(s, np.ones(2), 0.0, 0.0, 1.0, np.zeros(2), 1)
    with pytest.raises(ValueError):
        asian_vega_from_paths(path_sensitivity(oracle(), TimeGrid(1.0, 3), normal_draws(0, 10, 3)), VEGA_SPEC)


@settings(max_examples=20, deadline=None)
@given(y=st.floats(0.3, 3.0), z=st.floats(-2.5, 2.5), dy=st.floats(-1.0, 1.0))
def test_chain_rule_term(y, z, dy):
    # for GBM dY/dy_prev = Y / y_prev, so the incoming sensitivity enters scaled by that ratio
    s = oracle()
    y1, d0 = step_sensitivity(s, np.array([y]), 0.0, 0.0, 0.5, np.array([z]), 1)
    _, d1 = step_sensitivity(s, np.array([y]), dy, 0.0, 0.5, np.array([z]), 1)
    assert d1[0] - d0[0] == pytest.approx(dy * y1[0] / y, rel=1e-9, abs=1e-12)


# trained desk-scale surrogate

def test_trained_path_sensitivity_matches_bump(desk_model):
    rule = gauss_hermite_normal(desk_model.n_outputs)
    grid = TimeGrid(1.0, 4)
    z = normal_draws(3, 500, 4)
    base = SevenLeagueSampler(desk_model, rule, VEGA_GBM)
    d = path_sensitivity(base, grid, z).dstate_dtheta
    h = 1e-4
    up = SevenLeagueSampler(desk_model, rule, SdeParams.gbm(0.05, 0.3 + h, 1.0)).simulate_with_draws(grid, z)
    dn = SevenLeagueSampler(desk_model, rule, SdeParams.gbm(0.05, 0.3 - h, 1.0)).simulate_with_draws(grid, z)
    fd = (up.states - dn.states) / (2 * h)
    assert np.allclose(d, fd, rtol=1e-2, atol=1e-2 * np.abs(fd).max())


def test_trained_vega_within_five_percent(desk_model):
    s = SevenLeagueSampler(desk_model, gauss_hermite_normal(desk_model.n_outputs), VEGA_GBM)
    v = asian_vega(s, VEGA_SPEC, 100_000, 1)
    fd = asian_vega_fd_exact(VEGA_GBM, VEGA_SPEC, 100_000, 1)
    assert abs(v - fd) / abs(fd) < 0.05
