"""Large-time-step simulation with learned conditional collocation points."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .interpolation import Extrapolation, InterpKind, eval_rows, make_aux
from .models import ModelKind, SdeParams, TimeGrid
from .paths import PathEnsemble, normal_draws
from .probability import QuadratureRule
from .scmc import CollocationSet

log = logging.getLogger(__name__)


class AnalyticSurrogate:
    """Exact conditional quantiles in the surrogate interface (``predict`` / ``input_jacobian``).

    Input columns follow the network layout ``(y_prev, t, dt, theta...)``.
    """

    def __init__(self, kind, nodes):
        self.kind = ModelKind(kind)
        self.nodes = np.asarray(nodes, dtype=float)
        self.n_inputs = 5 if self.kind is ModelKind.GBM else 6
        self.n_outputs = self.nodes.size
        self.input_bounds = (np.full(self.n_inputs, -np.inf), np.full(self.n_inputs, np.inf))

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        y, dt = X[:, :1], X[:, 2:3]
        x = self.nodes[None, :]
        if self.kind is ModelKind.GBM:
            mu, s = X[:, 3:4], X[:, 4:5]
            out = y * np.exp((mu - 0.5 * s * s) * dt + s * np.sqrt(dt) * x)
        else:
            ybar, s, lam = X[:, 3:4], X[:, 4:5], X[:, 5:6]
            e = np.exp(-lam * dt)
            sd = np.sqrt(-np.expm1(-2.0 * lam * dt) / (2.0 * lam))
            out = y * e + ybar * (1.0 - e) + s * sd * x
        return out[0] if single else out

    def input_jacobian(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        q = self.predict(X)
        y, dt = X[:, :1], X[:, 2:3]
        x = self.nodes[None, :]
        J = np.zeros((X.shape[0], self.n_outputs, self.n_inputs))
        if self.kind is ModelKind.GBM:
            mu, s = X[:, 3:4], X[:, 4:5]
            sq = np.sqrt(dt)
            J[:, :, 0] = q / y
            with np.errstate(divide="ignore", invalid="ignore"):
                J[:, :, 2] = q * ((mu - 0.5 * s * s) + s * x / (2.0 * sq))
            J[:, :, 3] = q * dt
            J[:, :, 4] = q * (-s * dt + sq * x)
        else:
            ybar, s, lam = X[:, 3:4], X[:, 4:5], X[:, 5:6]
            e = np.exp(-lam * dt)
            e2 = e * e
            sd = np.sqrt(-np.expm1(-2.0 * lam * dt) / (2.0 * lam))
            dsd_dlam = (dt * e2 / lam - (1.0 - e2) / (2.0 * lam * lam)) / (2.0 * sd)
            dsd_ddt = e2 / (2.0 * sd)
            J[:, :, 0] = e
            J[:, :, 2] = -lam * y * e + ybar * lam * e + s * x * dsd_ddt
            J[:, :, 3] = 1.0 - e
            J[:, :, 4] = sd * x
            J[:, :, 5] = -dt * y * e + ybar * dt * e + s * x * dsd_dlam
        return J[0] if single else J


@dataclass
class SevenLeagueSampler:
    """Algorithm: at each step predict ``m`` conditional points, then map a normal draw through them.

    ``prescale`` (GBM only) evaluates the surrogate at ``y_ref`` and rescales
    by ``y_prev / y_ref``, which removes any dependence on the trained ``Y0``
    range since GBM conditional quantiles are proportional to ``y_prev``.
    """

    surrogate: object
    rule: QuadratureRule
    params: SdeParams
    interpolant_kind: InterpKind = InterpKind.PCHIP
    extrapolation: Extrapolation = Extrapolation.CLAMP
    clamp_inputs: bool = True
    prescale: bool = False
    y_ref: float = 1.0
    stats: dict = field(default_factory=lambda: {"inversions": 0, "out_of_domain": 0})

    def __post_init__(self):
        self.interpolant_kind = InterpKind(self.interpolant_kind)
        self.extrapolation = Extrapolation(self.extrapolation)
        k = len(self.params.theta())
        if self.surrogate.n_inputs != 3 + k:
            raise ValueError(f"surrogate takes {self.surrogate.n_inputs} inputs, model needs {3 + k}")
        if self.surrogate.n_outputs != self.rule.m:
            raise ValueError(f"surrogate predicts {self.surrogate.n_outputs} points, rule has {self.rule.m}")
        if self.prescale and self.params.kind is not ModelKind.GBM:
            raise ValueError("prescale mode is only valid for GBM")
        meta = getattr(self.surrogate, "meta", {})
        if meta.get("model_kind") not in (None, self.params.kind.value):
            raise ValueError(f"surrogate was trained on {meta['model_kind']}, model is {self.params.kind.value}")
        if meta.get("nodes") is not None and not np.allclose(meta["nodes"], self.rule.nodes):
            raise ValueError("surrogate was trained at different collocation nodes")
        self._aux = make_aux(self.interpolant_kind, self.rule.nodes)

    @property
    def nodes(self) -> np.ndarray:
        return self.rule.nodes

    @property
    def max_dt(self) -> float:
        return float(self.surrogate.input_bounds[1][2])

    def build_inputs(self, y_prev, t, dt, theta=None) -> np.ndarray:
        y_prev = np.atleast_1d(np.asarray(y_prev, dtype=float))
        theta = self.params.theta() if theta is None else np.asarray(theta, dtype=float)
        X = np.empty((y_prev.size, 3 + theta.size))
        X[:, 0] = self.y_ref if self.prescale else y_prev
        X[:, 1] = t
        X[:, 2] = dt
        X[:, 3:] = theta
        return self._clamp(X)

    def _clamp(self, X):
        lo, hi = self.surrogate.input_bounds
        # the time column carries no information for time-homogeneous models
        check = np.ones(X.shape[1], dtype=bool)
        check[1] = False
        outside = ((X < lo) | (X > hi))[:, check]
        n_out = int(outside.any(axis=1).sum())
        if n_out:
            if not self.clamp_inputs:
                raise ValueError(f"{n_out} surrogate inputs outside the trained domain")
            self.stats["out_of_domain"] += n_out
        return np.clip(X, lo, hi)

    def _scale(self, y_prev):
        return np.atleast_1d(np.asarray(y_prev, dtype=float))[:, None] / self.y_ref

    def points(self, y_prev, t, dt) -> np.ndarray:
        """Conditional collocation points for a batch of previous states, shape ``(n, m)``."""
        Y = self.surrogate.predict(self.build_inputs(y_prev, t, dt))
        if self.prescale:
            Y = Y * self._scale(y_prev)
        return self._sorted(Y)

    def _sorted(self, Y):
        bad = np.any(np.diff(Y, axis=1) < 0, axis=1)
        if bad.any():
            self.stats["inversions"] += int(bad.sum())
            Y = np.sort(Y, axis=1)
        return Y

    def points_and_jacobian(self, y_prev, t, dt):
        """Points and ``d points / d (y_prev, t, dt, theta...)``, shapes ``(n, m)`` and ``(n, m, d)``."""
        X = self.build_inputs(y_prev, t, dt)
        Y = self.surrogate.predict(X)
        J = self.surrogate.input_jacobian(X)
        J = np.array(J.reshape(Y.shape[0], Y.shape[1], -1))
        if self.prescale:
            s = self._scale(y_prev)
            J = J * s[:, :, None]
            J[:, :, 0] = Y / self.y_ref
            Y = Y * s
        order = np.argsort(Y, axis=1, kind="stable")
        if np.any(np.diff(Y, axis=1) < 0):
            rows = np.arange(Y.shape[0])[:, None]
            Y = Y[rows, order]
            J = J[rows, order]
        return Y, J

    def conditional_points(self, y_prev: float, t: float, dt: float) -> CollocationSet:
        y = self.points(y_prev, t, dt)[0]
        return CollocationSet(self.nodes.copy(), y, self.interpolant_kind, self.extrapolation)

    def sample_from_points(self, Y, z) -> np.ndarray:
        return eval_rows(self.interpolant_kind, self.nodes, Y, np.asarray(z, dtype=float),
                         self.extrapolation, aux=self._aux)

    def step(self, y_prev, t, dt, z):
        z = np.asarray(z, dtype=float)
        out = self.sample_from_points(self.points(y_prev, t, dt), np.atleast_1d(z))
        return float(out[0]) if z.ndim == 0 else out

    def simulate_with_draws(self, grid: TimeGrid, z: np.ndarray) -> PathEnsemble:
        if grid.dt > self.max_dt * (1 + 1e-9):
            raise ValueError(f"dt={grid.dt} exceeds the trained maximum {self.max_dt}; "
                             "use more, smaller steps")
        z = np.atleast_2d(np.asarray(z, dtype=float))
        y = np.empty((z.shape[0], grid.n_steps + 1))
        y[:, 0] = self.params.y0
        times = grid.times
        t_points = t_sample = 0.0
        for i in range(grid.n_steps):
            c0 = time.perf_counter()
            P = self.points(y[:, i], times[i], grid.dt)
            c1 = time.perf_counter()
            y[:, i + 1] = self.sample_from_points(P, z[:, i])
            t_points += c1 - c0
            t_sample += time.perf_counter() - c1
        if self.stats["out_of_domain"] or self.stats["inversions"]:
            log.debug("7L stats: %s", self.stats)
        return PathEnsemble(times, y, z, scheme="7l",
                            meta={"timings": {"conditional_points": t_points, "sampling": t_sample}})

    def simulate(self, grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
        ens = self.simulate_with_draws(grid, normal_draws(seed, n_paths, grid.n_steps))
        ens.meta["seed"] = seed
        return ens
