"""Scalar SDE models (GBM, Ornstein-Uhlenbeck) with their exact solutions."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np


class ModelKind(str, Enum):
    GBM = "GBM"
    OU = "OU"


@dataclass(frozen=True)
class SdeParams:
    """Parameters of a one-dimensional SDE ``dY = a dt + b dW``.

    GBM uses ``mu`` and ``sigma``; OU uses ``lam``, ``ybar`` and ``sigma``.
    Unused fields are ignored for the other kind.
    """

    kind: ModelKind
    sigma: float
    y0: float
    mu: float = 0.0
    lam: float = 0.0
    ybar: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.kind is ModelKind.GBM and not self.y0 > 0:
            raise ValueError(f"GBM requires y0 > 0, got {self.y0}")
        if self.kind is ModelKind.OU and not self.lam > 0:
            raise ValueError(f"OU requires lam > 0, got {self.lam}")

    @classmethod
    def gbm(cls, mu: float, sigma: float, y0: float = 1.0) -> "SdeParams":
        return cls(ModelKind.GBM, sigma=sigma, y0=y0, mu=mu)

    @classmethod
    def ou(cls, lam: float, ybar: float, sigma: float, y0: float = 1.0) -> "SdeParams":
        return cls(ModelKind.OU, sigma=sigma, y0=y0, lam=lam, ybar=ybar)

    def theta(self) -> np.ndarray:
        """Flattened parameter vector used as network input.

        Order is ``(mu, sigma)`` for GBM and ``(ybar, sigma, lam)`` for OU.
        """
        if self.kind is ModelKind.GBM:
            return np.array([self.mu, self.sigma])
        return np.array([self.ybar, self.sigma, self.lam])

    def with_theta(self, theta) -> "SdeParams":
        theta = [float(v) for v in theta]
        if self.kind is ModelKind.GBM:
            return SdeParams.gbm(theta[0], theta[1], self.y0)
        return SdeParams.ou(theta[2], theta[0], theta[1], self.y0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        if self.kind is ModelKind.GBM:
            del d["lam"], d["ybar"]
        else:
            del d["mu"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SdeParams":
        d = dict(d)
        kind = ModelKind(d.pop("kind"))
        allowed = {"sigma", "y0", "mu"} if kind is ModelKind.GBM else {"sigma", "y0", "lam", "ybar"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown fields for {kind.value}: {sorted(unknown)}")
        return cls(kind, **d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SdeParams":
        return cls.from_dict(json.loads(text))


THETA_NAMES = {
    ModelKind.GBM: ("mu", "sigma"),
    ModelKind.OU: ("ybar", "sigma", "lam"),
}


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def horizon(self) -> float:
        return self.t0 + self.dt * self.n_steps

    @classmethod
    def uniform(cls, horizon: float, dt: float, t0: float = 0.0) -> "TimeGrid":
        n = int(round((horizon - t0) / dt))
        if not np.isclose(t0 + n * dt, horizon, rtol=0, atol=1e-9 * max(1.0, horizon)):
            raise ValueError(f"horizon {horizon} is not a multiple of dt {dt}")
        return cls(dt=dt, n_steps=n, t0=t0)


def drift(params: SdeParams, t, y):
    if params.kind is ModelKind.GBM:
        return params.mu * y
    return -params.lam * (y - params.ybar)


def diffusion(params: SdeParams, t, y):
    """Return ``(b, db/dy)``."""
    if params.kind is ModelKind.GBM:
        return params.sigma * y, params.sigma * np.ones_like(y, dtype=float)
    return params.sigma * np.ones_like(y, dtype=float), np.zeros_like(y, dtype=float)


def exact_sample(params: SdeParams, t_from, y_from, dt, z):
    """Draw ``Y(t_from + dt) | Y(t_from) = y_from`` from the closed-form solution.

    ``z`` are standard normal draws; the map is increasing in ``z``.
    """
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise ValueError("dt must be non-negative")
    if params.kind is ModelKind.GBM:
        s = params.sigma
        return y_from * np.exp((params.mu - 0.5 * s * s) * dt + s * np.sqrt(dt) * z)
    lam = params.lam
    decay = np.exp(-lam * dt)
    sd = params.sigma * np.sqrt(-np.expm1(-2.0 * lam * dt) / (2.0 * lam))
    return y_from * decay + params.ybar * (1.0 - decay) + sd * z


def exact_quantiles(params: SdeParams, y_from, dt, x):
    """Conditional quantiles at normal levels ``Phi(x)``; same map as :func:`exact_sample`."""
    y_from = np.asarray(y_from, dtype=float)[..., None]
    dt = np.asarray(dt, dtype=float)[..., None]
    return exact_sample(params, 0.0, y_from, dt, np.asarray(x, dtype=float))


def exact_vega_path(params: SdeParams, t, y_t, z, t0: float = 0.0):
    """Pathwise ``dY(t)/dsigma`` for GBM given the terminal value and its driving draw."""
    if params.kind is not ModelKind.GBM:
        raise ValueError("exact pathwise vega is only defined for GBM")
    tau = np.asarray(t, dtype=float) - t0
    return y_t * (-params.sigma * tau + np.sqrt(tau) * z)


def exact_paths(params: SdeParams, grid: TimeGrid, z: np.ndarray) -> np.ndarray:
    """Exact GBM/OU paths on ``grid`` driven by ``z`` of shape ``(n_paths, n_steps)``."""
    z = np.atleast_2d(z)
    out = np.empty((z.shape[0], grid.n_steps + 1))
    out[:, 0] = params.y0
    for i in range(grid.n_steps):
        out[:, i + 1] = exact_sample(params, grid.times[i], out[:, i], grid.dt, z[:, i])
    return out


def milstein_anchor(kind, X, nodes):
    """One-step Milstein quantiles at ``nodes`` and a residual scale, per input row.

    ``X`` has the network input layout ``(y_prev, t, dt, theta...)``. Returns
    ``(M, S, dM, dS)`` with ``M`` of shape ``(n, m)``, ``S = b(y) dt`` of
    shape ``(n, 1)`` and their input Jacobians of shapes ``(n, m, d)`` and
    ``(n, 1, d)``. Scaling by ``dt`` rather than ``sqrt(dt)`` makes a constant
    error in the learned residual cost ``O(dt)`` per step, so it does not
    accumulate as steps get shorter.
    """
    kind = ModelKind(kind)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    x = np.asarray(nodes, dtype=float)
    y, dt = X[:, :1], X[:, 2:3]
    sq = np.sqrt(dt)
    n, d = X.shape
    dM = np.zeros((n, x.size, d))
    dS = np.zeros((n, 1, d))
    if kind is ModelKind.GBM:
        mu, s = X[:, 3:4], X[:, 4:5]
        g = 1.0 + mu * dt + s * sq * x + 0.5 * s * s * dt * (x * x - 1.0)
        M = y * g
        S = s * y * dt
        dM[:, :, 0] = g
        dM[:, :, 2] = y * (mu + 0.5 * s * x / sq + 0.5 * s * s * (x * x - 1.0))
        dM[:, :, 3] = y * dt
        dM[:, :, 4] = y * (sq * x + s * dt * (x * x - 1.0))
        dS[:, 0, 0] = (s * dt)[:, 0]
        dS[:, 0, 2] = (s * y)[:, 0]
        dS[:, 0, 4] = (y * dt)[:, 0]
    else:
        ybar, s, lam = X[:, 3:4], X[:, 4:5], X[:, 5:6]
        M = y - lam * (y - ybar) * dt + s * sq * x
        S = s * dt
        dM[:, :, 0] = np.broadcast_to(1.0 - lam * dt, (n, x.size))
        dM[:, :, 2] = -lam * (y - ybar) + 0.5 * s * x / sq
        dM[:, :, 3] = np.broadcast_to(lam * dt, (n, x.size))
        dM[:, :, 4] = sq * x
        dM[:, :, 5] = np.broadcast_to(-(y - ybar) * dt, (n, x.size))
        dS[:, 0, 2] = s[:, 0]
        dS[:, 0, 4] = dt[:, 0]
    return M, S, dM, dS
