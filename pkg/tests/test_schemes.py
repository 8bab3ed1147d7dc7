import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sevenleague.harness import strong_weak_errors
from sevenleague.models import SdeParams, TimeGrid
from sevenleague.paths import PathEnsemble, normal_draws
from sevenleague.schemes import (Scheme, coarsen_draws, euler_step, eval_polynomial, milstein_step,
                                 simulate_paths, simulate_with_draws, step_coefficients)


def test_euler_values():
    assert euler_step(SdeParams.gbm(0.1, 0.3), 0, 1.0, 0.01, 0.0) == pytest.approx(1.001)
    assert euler_step(SdeParams.gbm(0.0, 1.0), 0, 1.0, 1.0, 1.0) == pytest.approx(2.0)
    assert euler_step(SdeParams.ou(0.5, 1.0, 0.3), 0, 2.5, 0.0, 1.3) == 2.5


def test_milstein_values():
    g = SdeParams.gbm(0.0, 1.0)
    assert milstein_step(g, 0, 1.0, 1.0, 1.0) == pytest.approx(2.0)
    assert milstein_step(g, 0, 1.0, 1.0, 0.0) == pytest.approx(0.5)


def test_milstein_equals_euler_for_ou(rng):
    ou = SdeParams.ou(0.7, 1.2, 0.4)
    y, dt, z = rng.normal(size=50), rng.uniform(0.01, 2, 50), rng.normal(size=50)
    assert np.array_equal(milstein_step(ou, 0, y, dt, z), euler_step(ou, 0, y, dt, z))


def test_step_coefficient_values():
    assert np.allclose(step_coefficients(SdeParams.gbm(0.1, 0.3), 0, 1.0, 1.0, "euler"), (1.1, 0.3))
    assert np.allclose(step_coefficients(SdeParams.gbm(0.0, 1.0), 0, 1.0, 1.0, "milstein"), (0.5, 1.0, 0.5))
    with pytest.raises(ValueError):
        step_coefficients(SdeParams.gbm(0.0, 1.0), 0, 1.0, 1.0, "exact")


def test_polynomial_form_matches_steps(rng):
    for p in (SdeParams.gbm(0.08, 0.45), SdeParams.ou(0.6, 0.5, 0.3)):
        y, dt, z = rng.uniform(0.1, 3, 100), rng.uniform(1e-3, 2, 100), rng.normal(size=100)
        for scheme, fn in (("euler", euler_step), ("milstein", milstein_step)):
            alpha = step_coefficients(p, 0.0, y, dt, scheme)
            assert np.allclose(eval_polynomial(alpha, z), fn(p, 0.0, y, dt, z), rtol=1e-13, atol=1e-13)


def test_zero_vol_limit_deterministic_path():
    g = SdeParams.gbm(0.1, 1e-12)
    ens = simulate_paths(g, TimeGrid(0.5, 4), "exact", 1, 0)
    assert np.allclose(ens.states[0], np.exp(0.1 * ens.times), rtol=1e-10)


def test_same_seed_bitwise_identical():
    g = SdeParams.gbm(0.1, 0.3)
    a = simulate_paths(g, TimeGrid(0.1, 10), "milstein", 100, 7)
    b = simulate_paths(g, TimeGrid(0.1, 10), "milstein", 100, 7)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.draws, b.draws)
    c = simulate_paths(g, TimeGrid(0.1, 10), "milstein", 100, 8)
    assert not np.array_equal(a.states, c.states)


def test_draws_independent_of_path_count():
    # path k uses the same draws whether 10 or 1000 paths are requested
    assert np.array_equal(normal_draws(3, 10, 5), normal_draws(3, 1000, 5)[:10])


def test_draw_shape_checked():
    with pytest.raises(ValueError):
        simulate_with_draws(SdeParams.gbm(0.1, 0.3), TimeGrid(0.1, 10), "euler", np.zeros((3, 9)))


def test_coarsen_draws_preserves_brownian_increments():
    z = normal_draws(0, 5, 8)
    zc = coarsen_draws(z, 4)
    assert zc.shape == (5, 2)
    assert np.allclose(zc * np.sqrt(4 * 0.1), (z * np.sqrt(0.1)).reshape(5, 2, 4).sum(axis=2))
    with pytest.raises(ValueError):
        coarsen_draws(z, 3)


def test_euler_error_shrinks_by_sqrt2():
    rep = strong_weak_errors("euler", SdeParams.gbm(0.1, 0.3), 1.0, [1 / 64, 1 / 128], 4000, 0)
    ratio = rep.strong_errors[1] / rep.strong_errors[0]
    assert ratio == pytest.approx(np.sqrt(2), rel=0.1)


def test_ensemble_csv_and_binary_round_trip(tmp_path):
    ens = simulate_paths(SdeParams.ou(0.5, 1.0, 0.3), TimeGrid(0.25, 4), "euler", 6, 1)
    ens.to_csv(tmp_path / "p.csv")
    ens.to_binary(tmp_path / "p.bin")
    for back in (PathEnsemble.from_csv(tmp_path / "p.csv"), PathEnsemble.from_binary(tmp_path / "p.bin")):
        assert np.array_equal(back.states, ens.states)
        assert np.array_equal(back.draws, ens.draws)
        assert np.array_equal(back.times, ens.times)
    (tmp_path / "bad.bin").write_bytes(b"nope" + bytes(20))
    with pytest.raises(ValueError):
        PathEnsemble.from_binary(tmp_path / "bad.bin")


@settings(max_examples=50, deadline=None)
@given(y=st.floats(0.01, 10), dt=st.floats(1e-4, 2), z=st.floats(-6, 6),
       mu=st.floats(-0.5, 0.5), sigma=st.floats(0.01, 1.0))
def test_milstein_gbm_polynomial_property(y, dt, z, mu, sigma):
    p = SdeParams.gbm(mu, sigma)
    alpha = step_coefficients(p, 0.0, y, dt, Scheme.MILSTEIN)
    assert eval_polynomial(alpha, z) == pytest.approx(milstein_step(p, 0.0, y, dt, z), rel=1e-12, abs=1e-12)
