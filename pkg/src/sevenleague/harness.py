"""Experiment drivers: convergence, KS-over-time and timing studies, plus run manifests.

Every study feeds the same normal draws to all schemes it compares, so
differences between schemes are not masked by sampling noise.
"""
from __future__ import annotations

import csv
import hashlib
import json
import platform
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cdc import build_matrix, decompress, predicted_speedup, simulate_cdc_with_draws
from .interpolation import InterpKind
from .models import SdeParams, TimeGrid
from .paths import PathEnsemble, normal_draws
from .probability import ks_two_sample
from .schemes import Scheme, coarsen_draws, simulate_with_draws
from .seven_league import SevenLeagueSampler

SCHEME_IDS = ("euler", "milstein", "exact", "7l", "7lcdc")


def make_runner(scheme: str, params: SdeParams, sampler: SevenLeagueSampler | None = None,
                marginal_surrogate=None, interpolant_kind=None, anchor_extrapolation="clamp"):
    """Callable ``(grid, z) -> PathEnsemble`` for a scheme id in :data:`SCHEME_IDS`."""
    if scheme not in SCHEME_IDS:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEME_IDS}")
    if scheme in ("euler", "milstein", "exact"):
        return lambda grid, z: simulate_with_draws(params, grid, Scheme(scheme), z)
    if sampler is None:
        raise ValueError(f"scheme {scheme!r} needs a trained sampler")
    if scheme == "7l":
        return sampler.simulate_with_draws
    if marginal_surrogate is None:
        raise ValueError("scheme '7lcdc' needs a marginal surrogate")

    def run(grid, z):
        m = build_matrix(sampler, marginal_surrogate, grid, anchor_extrapolation=anchor_extrapolation)
        ens = simulate_cdc_with_draws(m, z, interpolant_kind)
        ens.meta["timings"]["build"] = m.meta["build_seconds"]
        return ens
    return run


def fit_slope(dt, err, stderr=None, floor_sigmas: float = 3.0) -> float:
    """Least-squares slope of ``log err`` on ``log dt``.

    Points whose error is within ``floor_sigmas`` standard errors of zero are
    noise-dominated and left out; ``nan`` if fewer than two remain.
    """
    dt = np.asarray(dt, dtype=float)
    err = np.asarray(err, dtype=float)
    keep = err > 0
    if stderr is not None:
        keep &= err > floor_sigmas * np.asarray(stderr, dtype=float)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(dt[keep]), np.log(err[keep]), 1)[0])


@dataclass
class ConvergenceReport:
    scheme: str
    dt_values: np.ndarray
    strong_errors: np.ndarray
    strong_stderr: np.ndarray
    weak_errors: np.ndarray
    weak_stderr: np.ndarray
    seed: int
    n_paths: int
    horizon: float
    strong_slope: float = float("nan")
    weak_slope: float = float("nan")

    def __post_init__(self):
        self.strong_slope = fit_slope(self.dt_values, self.strong_errors, self.strong_stderr)
        self.weak_slope = fit_slope(self.dt_values, self.weak_errors, self.weak_stderr)

    def rows(self) -> list[dict]:
        return [{"scheme": self.scheme, "dt": float(d), "strong_error": float(s), "strong_stderr": float(ss),
                 "weak_error": float(w), "weak_stderr": float(ws)}
                for d, s, ss, w, ws in zip(self.dt_values, self.strong_errors, self.strong_stderr,
                                           self.weak_errors, self.weak_stderr)]

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "seed": self.seed, "n_paths": self.n_paths, "horizon": self.horizon,
                "strong_slope": self.strong_slope, "weak_slope": self.weak_slope, "rows": self.rows()}


def _fine_draws(dt_values, horizon, n_paths, seed):
    dt_min = min(dt_values)
    n_fine = int(round(horizon / dt_min))
    factors = []
    for dt in dt_values:
        f = dt / dt_min
        if abs(f - round(f)) > 1e-9 or abs(n_fine * dt_min - horizon) > 1e-9:
            raise ValueError("every dt must be an integer multiple of the smallest, which must divide the horizon")
        factors.append(int(round(f)))
    return TimeGrid(dt_min, n_fine), normal_draws(seed, n_paths, n_fine), factors


def strong_weak_errors(scheme: str, params: SdeParams, horizon: float, dt_values, n_paths: int,
                       seed: int, **runner_kw) -> ConvergenceReport:
    """Strong ``mean|Y - Y_ex|`` and weak ``|mean Y - mean Y_ex|`` errors at ``horizon``.

    All ``dt`` share one Brownian path per sample: coarse draws aggregate the
    fine ones. The reference is the exact scheme on the finest grid.
    """
    dt_values = sorted(float(d) for d in dt_values)
    fine, z_fine, factors = _fine_draws(dt_values, horizon, n_paths, seed)
    ref = simulate_with_draws(params, fine, Scheme.EXACT, z_fine).terminal
    run = make_runner(scheme, params, **runner_kw)
    se, ses, we, wes = [], [], [], []
    for dt, f in zip(dt_values, factors):
        y = run(TimeGrid(dt, fine.n_steps // f, fine.t0), coarsen_draws(z_fine, f)).terminal
        diff = y - ref
        a = np.abs(diff)
        se.append(a.mean())
        ses.append(a.std(ddof=1) / np.sqrt(n_paths))
        we.append(abs(diff.mean()))
        wes.append(diff.std(ddof=1) / np.sqrt(n_paths))
    return ConvergenceReport(scheme, np.array(dt_values), np.array(se), np.array(ses),
                             np.array(we), np.array(wes), seed, n_paths, horizon)


@dataclass
class KsReport:
    scheme: str
    times: np.ndarray
    statistics: np.ndarray
    p_values: np.ndarray
    reference: str
    seed: int

    def rows(self) -> list[dict]:
        return [{"scheme": self.scheme, "t": float(t), "statistic": float(d), "p_value": float(p)}
                for t, d, p in zip(self.times, self.statistics, self.p_values)]

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "reference": self.reference, "seed": self.seed, "rows": self.rows()}


def ks_over_time(scheme: str, params: SdeParams, dt: float, horizon: float, n_samples: int, seed: int,
                 reference: str = "crn", **runner_kw) -> KsReport:
    """Two-sample KS between scheme and exact samples at each grid time after ``t_0``.

    ``reference="crn"`` drives the exact paths with the scheme's own draws,
    which removes most sampling noise from the comparison; ``"independent"``
    uses fresh draws (seed + 1) and shows the plain two-sample behaviour.
    """
    if reference not in ("crn", "independent"):
        raise ValueError("reference must be 'crn' or 'independent'")
    grid = TimeGrid.uniform(horizon, dt)
    z = normal_draws(seed, n_samples, grid.n_steps)
    ens = make_runner(scheme, params, **runner_kw)(grid, z)
    z_ref = z if reference == "crn" else normal_draws(seed + 1, n_samples, grid.n_steps)
    ex = simulate_with_draws(params, grid, Scheme.EXACT, z_ref)
    stats = [ks_two_sample(ens.states[:, i], ex.states[:, i]) for i in range(1, grid.n_steps + 1)]
    d, p = np.array(stats).T
    return KsReport(scheme, grid.times[1:], d, p, reference, seed)


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        c = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - c)
    return best


def timing_benchmark(sampler: SevenLeagueSampler, marginal_surrogate, horizon: float, dt: float,
                     n_paths: int, seed: int, interpolants=(InterpKind.PCHIP,), repeats: int = 3) -> dict:
    """Wall-clock of 7L against 7L-CDC (matrix build, decompression, total) on one grid.

    ``gamma_measured`` compares the conditional-point phases (CDC build plus
    decompression against the 7L network calls); ``gamma_predicted`` plugs
    per-path micro timings of one interpolation and one network call into the
    cost model. ``total_ratio`` also includes the identical sampling phase.
    """
    grid = TimeGrid.uniform(horizon, dt)
    z = normal_draws(seed, n_paths, grid.n_steps)
    rows = []
    t0 = time.perf_counter()
    e7 = sampler.simulate_with_draws(grid, z)
    total_7l = time.perf_counter() - t0
    t_points_7l = e7.meta["timings"]["conditional_points"]
    rows.append({"scheme": "7l", "interpolant": sampler.interpolant_kind.value, "create_c": 0.0,
                 "decompress": 0.0, "conditional_points": t_points_7l, "total": total_7l})

    # probe one step past t_0 where the marginal has spread; a one-step grid only has t_0
    i_probe = min(1, grid.n_steps - 1)
    y_probe = e7.states[:, i_probe]
    t_ann = _best_of(lambda: sampler.points(y_probe, grid.times[i_probe], dt), repeats) / n_paths
    out = {"n_paths": n_paths, "dt": dt, "horizon": horizon, "seed": seed, "rows": rows,
           "platform": platform.platform()}
    for kind in interpolants:
        kind = InterpKind(kind)
        t0 = time.perf_counter()
        m = build_matrix(sampler, marginal_surrogate, grid)
        build = time.perf_counter() - t0
        ec = simulate_cdc_with_draws(m, z, kind)
        total = time.perf_counter() - t0
        dec = ec.meta["timings"]["decompression"]
        t_interp = _best_of(lambda: decompress(m, i_probe, y_probe, kind), repeats) / n_paths
        rows.append({"scheme": "7lcdc", "interpolant": kind.value, "create_c": build, "decompress": dec,
                     "conditional_points": build + dec, "total": total})
        out.setdefault("gamma", []).append({
            "interpolant": kind.value,
            "gamma_measured": (build + dec) / t_points_7l,
            "gamma_predicted": predicted_speedup(t_interp, t_ann, m.m_s, n_paths),
            "total_ratio": total / total_7l,
            "t_interp_per_path": t_interp, "t_ann_per_path": t_ann})
    return out


def write_rows_csv(path, rows: list[dict]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    return path


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command: str, config: dict, seed: int, artifacts,
                   name: str = "manifest.json") -> Path:
    """Manifest with the effective config, seed and a SHA-256 per artifact."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "seed": seed,
        "config": config,
        "artifacts": {Path(a).name: file_sha256(a) for a in artifacts},
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = out_dir / name
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def terminal_ks(a: PathEnsemble, b: PathEnsemble) -> tuple[float, float]:
    return ks_two_sample(a.terminal, b.terminal)
