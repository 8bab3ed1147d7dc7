"""End-to-end acceptance checks, one test per criterion.

Criteria 4 to 11 use the desk-scale surrogates built (and cached) by the
``desk_dir`` fixture. The full-scale training run is opt-in through
``SEVENLEAGUE_FULL_SCALE=1`` because it takes hours.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from sevenleague import cli
from sevenleague.cdc import build_matrix, simulate_cdc_with_draws
from sevenleague.config import read_config
from sevenleague.harness import ks_over_time, strong_weak_errors, timing_benchmark
from sevenleague.interpolation import InterpKind, eval_rows
from sevenleague.models import SdeParams, TimeGrid
from sevenleague.neural import (MinMaxScaler, TrainConfig, forward, glorot_init, input_gradient, loss_and_grads,
                                train)
from sevenleague.paths import normal_draws
from sevenleague.pricing import OptionSpec, price
from sevenleague.probability import gauss_hermite_normal, ks_one_sample
from sevenleague.schemes import Scheme, simulate_with_draws
from sevenleague.scmc import CollocationSet, scmc_sample
from sevenleague.sensitivity import asian_vega, asian_vega_fd_exact
from sevenleague.seven_league import SevenLeagueSampler

GBM = SdeParams.gbm(0.1, 0.3, 1.0)


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_01_classical_convergence():
    t0 = time.perf_counter()
    dts = [2.0 ** -k for k in range(1, 7)]
    e = strong_weak_errors("euler", GBM, 1.0, dts, 1000, 0)
    m = strong_weak_errors("milstein", GBM, 1.0, dts, 1000, 0)
    print(f"euler slope {e.strong_slope:.3f}, milstein slope {m.strong_slope:.3f}")
    assert abs(e.strong_slope - 0.5) <= 0.1
    assert abs(m.strong_slope - 1.0) <= 0.15
    assert time.perf_counter() - t0 < 60


def test_criterion_02_scmc_exactness():
    rule = gauss_hermite_normal(5)
    z = normal_draws(0, 1000, 1)[:, 0]
    inner = z[(z >= rule.nodes[0]) & (z <= rule.nodes[-1])]
    for kind in InterpKind:
        c = CollocationSet(rule.nodes, 0.7 * rule.nodes - 2.0, kind)
        assert np.max(np.abs(scmc_sample(c, inner) - (0.7 * inner - 2.0))) < 1e-10
    c = CollocationSet(rule.nodes, np.exp(0.055 + 0.3 * rule.nodes), InterpKind.BARYCENTRIC)
    y = scmc_sample(c, normal_draws(3, 100_000, 1)[:, 0])
    d = ks_one_sample(y, stats.lognorm(0.3, scale=np.exp(0.055)).cdf)
    print(f"lognormal KS {d:.5f}")
    assert d < 0.01


def _random_net(seed):
    rng = np.random.default_rng(seed)
    net = glorot_init((4, 7, 6, 3), seed)
    net.biases = [rng.normal(scale=0.3, size=b.shape) for b in net.biases]
    net.input_scaler = MinMaxScaler(rng.uniform(-1, 0, 4), rng.uniform(1, 3, 4))
    net.output_scaler = MinMaxScaler(rng.uniform(-1, 0, 3), rng.uniform(0.5, 2, 3))
    return net


def test_criterion_03_network_gradients_and_determinism():
    for seed in range(20):
        net = _random_net(seed)
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.2, 1.5, 4)
        J = input_gradient(net, x)
        h = 1e-5
        fd = np.stack([(forward(net, x + h * e) - forward(net, x - h * e)) / (2 * h) for e in np.eye(4)], axis=1)
        assert np.allclose(J, fd, rtol=1e-4, atol=1e-8 * np.abs(fd).max())
        U, T = rng.uniform(size=(9, 4)), rng.uniform(size=(9, 3))
        _, gW, _ = loss_and_grads(net, U, T)
        W = net.weights[1]
        i, j = rng.integers(W.shape[0]), rng.integers(W.shape[1])
        old = W[i, j]
        W[i, j] = old + 1e-6
        up = loss_and_grads(net, U, T)[0]
        W[i, j] = old - 1e-6
        dn = loss_and_grads(net, U, T)[0]
        W[i, j] = old
        assert gW[1][i, j] == pytest.approx((up - dn) / 2e-6, rel=1e-4, abs=1e-9)
    rng = np.random.default_rng(1)
    x, y = rng.uniform(size=(200, 3)), rng.uniform(size=(200, 2))
    cfg = TrainConfig(epochs_phase1=4, epochs_phase2=2, batch_size=32, seed=2)
    a, ha = train(glorot_init((3, 8, 8, 2), 0), x, y, cfg)
    b, hb = train(glorot_init((3, 8, 8, 2), 0), x, y, cfg)
    assert np.array_equal(ha, hb)
    assert all(np.array_equal(p, q) for p, q in zip(a.weights + a.biases, b.weights + b.biases))


def test_criterion_04_desk_training(desk_dir):
    data, _ = read_config("builtin:gbm_desk_data")
    d = data["domains"][0]
    assert (d["n_lhs"], d["n_tau"], d["n_mc_paths"]) == (100, 160, 10_000)
    tr, _ = read_config("builtin:gbm_desk_train")
    assert (tr["epochs_phase1"], tr["epochs_phase2"]) == (300, 150)
    m = json.loads((desk_dir / "desk_model.metrics.json").read_text())
    print("held-out R2 ", " ".join(f"{v:.6f}" for v in m["r2"]))
    print("held-out MAE", " ".join(f"{v:.4f}" for v in m["mae"]))
    assert min(m["r2"]) >= 0.995
    assert max(m["mae"]) <= 0.15


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("SEVENLEAGUE_FULL_SCALE"), reason="full-scale run takes hours; "
                    "set SEVENLEAGUE_FULL_SCALE=1 to enable")
def test_criterion_04_full_scale(tmp_path_factory):
    out = os.environ.get("SEVENLEAGUE_OUTPUT_DIR") or str(tmp_path_factory.mktemp("full"))
    assert cli.main(["gen-data", "builtin:gbm_full_data", "--out-dir", out]) == 0
    assert cli.main(["train", "builtin:gbm_full_train", "--out-dir", out]) == 0
    m = json.loads((Path(out) / "gbm_full_model.metrics.json").read_text())
    assert min(m["r2"]) >= 0.9998
    assert max(m["mae"]) <= 0.075


def test_criterion_05_flat_strong_error(desk_sampler, cdc_model):
    t0 = time.perf_counter()
    dts = [0.25, 0.5, 1.0]
    mil = strong_weak_errors("milstein", GBM, 4.0, dts, 10_000, 1)
    for scheme in ("7l", "7lcdc"):
        r = strong_weak_errors(scheme, GBM, 4.0, dts, 10_000, 1, sampler=desk_sampler,
                               marginal_surrogate=cdc_model, anchor_extrapolation="linear")
        print(f"{scheme}: errors {np.round(r.strong_errors, 4)}, slope {r.strong_slope:.3f}; "
              f"milstein {np.round(mil.strong_errors, 4)}")
        assert abs(r.strong_slope) < 0.25
        assert np.all(r.strong_errors[1:] < mil.strong_errors[1:])
    assert time.perf_counter() - t0 < 300


def test_criterion_06_ks_study(desk_sampler, cdc_model):
    t0 = time.perf_counter()
    mil = ks_over_time("milstein", GBM, 0.5, 4.0, 10_000, 1)
    cdc = ks_over_time("7lcdc", GBM, 0.5, 4.0, 10_000, 1, sampler=desk_sampler, marginal_surrogate=cdc_model,
                       anchor_extrapolation="linear")
    print("milstein KS", np.round(mil.statistics, 4))
    print("7l-cdc   KS", np.round(cdc.statistics, 4))
    assert np.all(cdc.statistics < mil.statistics)
    assert cdc.statistics.max() < 2 * cdc.statistics.min()
    assert np.all(np.diff(mil.statistics) > 0)
    assert time.perf_counter() - t0 < 120


def _pricing_errors(sampler, marginal, spec, n_paths=100_000, seed=0):
    grid = TimeGrid(spec.dt, spec.n_dates)
    z = normal_draws(seed, n_paths, spec.n_dates)
    ref = price(simulate_with_draws(GBM, grid, Scheme.EXACT, z), spec).price
    mil = price(simulate_with_draws(GBM, grid, Scheme.MILSTEIN, z), spec).relative_error(ref)
    m = build_matrix(sampler, marginal, grid, anchor_extrapolation="linear")
    cdc = price(simulate_cdc_with_draws(m, z), spec).relative_error(ref)
    print(f"{spec.kind.value}: 7L-CDC {100 * cdc:.3f}%, Milstein {100 * mil:.3f}%")
    return cdc, mil


def test_criterion_07_asian_pricing(desk_sampler, cdc_model):
    cdc, mil = _pricing_errors(desk_sampler, cdc_model, OptionSpec("asian", 1.0, 0.1, 8, 0.5))
    assert cdc < 0.015 and cdc < mil


def test_criterion_08_bermudan_pricing(desk_sampler, cdc_model):
    t0 = time.perf_counter()
    cdc, mil = _pricing_errors(desk_sampler, cdc_model, OptionSpec("bermudan_put", 1.1, 0.1, 4, 1.0))
    assert cdc < 0.015 and cdc < mil
    assert time.perf_counter() - t0 < 300


def test_criterion_09_pathwise_vega(desk_model):
    params = SdeParams.gbm(0.05, 0.3, 1.0)
    spec = OptionSpec("asian", 1.0, 0.05, 4, 1.0)
    s = SevenLeagueSampler(desk_model, gauss_hermite_normal(desk_model.n_outputs), params)
    v = asian_vega(s, spec, 100_000, 1)
    fd = asian_vega_fd_exact(params, spec, 100_000, 1)
    print(f"pathwise vega {v:.5f}, finite-difference {fd:.5f}")
    assert rel(v, fd) < 0.05


def test_criterion_10_cdc_speedup(desk_sampler, cdc_model):
    out = timing_benchmark(desk_sampler, cdc_model, 4.0, 1.0, 10_000, 0)
    totals = {r["scheme"]: r["total"] for r in out["rows"]}
    g = out["gamma"][0]
    print(f"7L {totals['7l']:.4f}s, 7L-CDC {totals['7lcdc']:.4f}s; gamma measured {g['gamma_measured']:.4f}, "
          f"predicted {g['gamma_predicted']:.4f}")
    assert totals["7lcdc"] < totals["7l"]
    assert 0.5 < g["gamma_measured"] / g["gamma_predicted"] < 2.0


def test_criterion_11_pathwise_error_bound(desk_model):
    # random single GBM steps inside the trained domain
    rng = np.random.default_rng(11)
    lo, hi = desk_model.input_bounds
    X = rng.uniform(lo, hi, size=(1000, desk_model.n_inputs))
    y, dt, mu, sigma = X[:, 0], X[:, 2], X[:, 3], X[:, 4]
    rule = gauss_hermite_normal(desk_model.n_outputs)

    def exact(x):
        x = np.asarray(x, dtype=float)
        return y[:, None] * np.exp(((mu - 0.5 * sigma ** 2) * dt)[:, None] + (sigma * np.sqrt(dt))[:, None] * x)

    exact_pts = exact(rule.nodes[None, :])
    ann_pts = np.sort(desk_model.predict(X), axis=1)
    z = rng.standard_normal(1000)
    g = exact(z[:, None])[:, 0]
    g_ann = eval_rows("pchip", rule.nodes, ann_pts, z)
    measured = np.mean(np.abs(g - g_ann))

    # squared SCMC error with exact points, integrated against the normal density
    xq, wq = np.polynomial.hermite_e.hermegauss(120)
    wq = wq / wq.sum()
    g_m = np.stack([eval_rows("pchip", rule.nodes, exact_pts, np.full(1000, xk)) for xk in xq], axis=1)
    eps_m = ((exact(xq[None, :]) - g_m) ** 2) @ wq
    mae = np.mean(np.abs(ann_pts - exact_pts), axis=0)
    bound = np.mean(np.sqrt(eps_m)) + mae.max()
    print(f"mean pathwise error {measured:.4f} <= sqrt(eps_m) {np.mean(np.sqrt(eps_m)):.4f} "
          f"+ max point MAE {mae.max():.4f} = {bound:.4f}")
    assert measured <= bound
