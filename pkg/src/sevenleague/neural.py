"""Fully connected Softplus network with hand-written backprop, Adam and input Jacobians.

Layer ``l`` maps ``z -> softplus(z @ W_l + b_l)`` with ``W_l`` of shape
``(fan_in, fan_out)``; the last layer is affine. Inputs and outputs pass
through min-max scalers fitted on the training set.

``output_mode`` optionally makes the network learn a transformed target:
``"ratio"`` predicts ``y / y_prev``, ``"log_ratio"`` predicts
``log(y / y_prev)`` (positive targets only) and ``"difference"`` predicts
``y - y_prev``, where ``y_prev`` is input column 0. ``"milstein_residual"``
predicts ``(y - M) / S`` where ``M`` are the one-step Milstein quantiles at the
collocation nodes and ``S = b(y_prev) dt``; it needs ``model_kind`` and
``nodes`` in ``meta``. :meth:`MlpSurrogate.predict` always returns the
untransformed target.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .models import milstein_anchor

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
OUTPUT_MODES = ("absolute", "ratio", "log_ratio", "difference", "milstein_residual")


def softplus(x):
    return np.logaddexp(0.0, x)


@dataclass
class MinMaxScaler:
    """Affine map ``(v - lo) / scale`` onto the unit interval; constant features keep ``scale = 1``."""

    lo: np.ndarray
    hi: np.ndarray

    @property
    def scale(self) -> np.ndarray:
        span = self.hi - self.lo
        return np.where(span > 0, span, 1.0)

    @classmethod
    def fit(cls, data) -> "MinMaxScaler":
        data = np.asarray(data, dtype=float)
        return cls(data.min(axis=0), data.max(axis=0))

    @classmethod
    def identity(cls, d: int) -> "MinMaxScaler":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, v):
        return (v - self.lo) / self.scale

    def inverse(self, u):
        return u * self.scale + self.lo


@dataclass
class TrainConfig:
    epochs_phase1: int = 1000
    epochs_phase2: int = 500
    lr_phase1: float = 1e-3
    lr_phase2: float = 1e-4
    batch_size: int = 512
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs_phase1 < 0 or self.epochs_phase2 < 0 or self.batch_size < 1:
            raise ValueError("epoch counts must be >= 0 and batch_size >= 1")
        if self.lr_phase1 < 0 or self.lr_phase2 < 0:
            raise ValueError("learning rates must be non-negative")


@dataclass
class MlpSurrogate:
    layer_sizes: tuple
    weights: list
    biases: list
    input_scaler: MinMaxScaler
    output_scaler: MinMaxScaler
    output_mode: str = "absolute"
    meta: dict = field(default_factory=dict)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    @property
    def input_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.input_scaler.lo, self.input_scaler.hi

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} input features, got {X.shape[1]}")
        return X, single

    def forward_scaled(self, U):
        """Network output in scaled units for scaled inputs ``U`` (no target transform)."""
        a = U
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = softplus(a @ W + b)
        return a @ self.weights[-1] + self.biases[-1]

    def predict(self, X):
        X, single = self._check(X)
        out = self.output_scaler.inverse(self.forward_scaled(self.input_scaler.transform(X)))
        out = _untransform(out, X, self.output_mode, self.meta)
        return out[0] if single else out

    def input_jacobian(self, X):
        """``d predict_j / d input_i`` with shape ``(n, n_outputs, n_inputs)``."""
        X, single = self._check(X)
        U = self.input_scaler.transform(X)
        n = U.shape[0]
        J = np.broadcast_to(np.diag(1.0 / self.input_scaler.scale), (n, self.n_inputs, self.n_inputs))
        a = U
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            pre = a @ W + b
            J = (J @ W) * expit(pre)[:, None, :]
            a = softplus(pre)
        raw = a @ self.weights[-1] + self.biases[-1]
        J = (J @ self.weights[-1]) * self.output_scaler.scale[None, None, :]
        J = np.swapaxes(J, 1, 2)
        r = self.output_scaler.inverse(raw)
        if self.output_mode == "ratio":
            J = J * X[:, :1, None]
            J[:, :, 0] += r
        elif self.output_mode == "log_ratio":
            g = np.exp(r)
            J = J * (X[:, :1] * g)[:, :, None]
            J[:, :, 0] += g
        elif self.output_mode == "difference":
            J = J.copy()
            J[:, :, 0] += 1.0
        elif self.output_mode == "milstein_residual":
            _, S, dM, dS = _anchor(X, self.meta)
            J = dM + S[:, :, None] * J + r[:, :, None] * dS
        return J[0] if single else J

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "activation": "softplus",
            "output_mode": self.output_mode,
            "weights": [W.ravel().tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "input_scaler": {"lo": self.input_scaler.lo.tolist(), "hi": self.input_scaler.hi.tolist()},
            "output_scaler": {"lo": self.output_scaler.lo.tolist(), "hi": self.output_scaler.hi.tolist()},
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSurrogate":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('format_version')}")
        sizes = tuple(d["layer_sizes"])
        weights = [np.array(w, dtype=float).reshape(sizes[i], sizes[i + 1])
                   for i, w in enumerate(d["weights"])]
        biases = [np.array(b, dtype=float) for b in d["biases"]]
        return cls(sizes, weights, biases,
                   MinMaxScaler(np.array(d["input_scaler"]["lo"]), np.array(d["input_scaler"]["hi"])),
                   MinMaxScaler(np.array(d["output_scaler"]["lo"]), np.array(d["output_scaler"]["hi"])),
                   d.get("output_mode", "absolute"), d.get("meta", {}))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "MlpSurrogate":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _anchor(X, meta):
    if "model_kind" not in meta or "nodes" not in meta:
        raise ValueError("milstein_residual output mode needs model_kind and nodes in meta")
    return milstein_anchor(meta["model_kind"], X, meta["nodes"])


def _transform(Y, X, mode, meta):
    y_prev = X[:, :1]
    if mode == "milstein_residual":
        M, S, _, _ = _anchor(X, meta)
        if np.any(S <= 0):
            raise ValueError("milstein_residual output mode needs b(y_prev) dt > 0")
        return (Y - M) / S
    if mode == "ratio":
        return Y / y_prev
    if mode == "log_ratio":
        if np.any(Y <= 0) or np.any(y_prev <= 0):
            raise ValueError("log_ratio output mode needs positive targets and y_prev")
        return np.log(Y / y_prev)
    if mode == "difference":
        return Y - y_prev
    return Y


def _untransform(R, X, mode, meta):
    y_prev = X[:, :1]
    if mode == "milstein_residual":
        M, S, _, _ = _anchor(X, meta)
        return M + S * R
    if mode == "ratio":
        return R * y_prev
    if mode == "log_ratio":
        return y_prev * np.exp(R)
    if mode == "difference":
        return R + y_prev
    return R


def glorot_init(layer_sizes, seed: int = 0, output_mode: str = "absolute", meta: dict | None = None) -> MlpSurrogate:
    """Glorot-uniform weights, zero biases, identity scalers."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {sizes}")
    if output_mode not in OUTPUT_MODES:
        raise ValueError(f"output_mode must be one of {OUTPUT_MODES}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpSurrogate(sizes, weights, biases, MinMaxScaler.identity(sizes[0]),
                        MinMaxScaler.identity(sizes[-1]), output_mode, dict(meta or {}))


def default_layer_sizes(n_inputs: int, n_outputs: int, hidden=(50, 50, 50, 50)) -> tuple:
    return (n_inputs, *hidden, n_outputs)


def forward(net: MlpSurrogate, x):
    return net.predict(x)


def input_gradient(net: MlpSurrogate, x):
    return net.input_jacobian(x)


def loss_and_grads(net: MlpSurrogate, U, T):
    """MSE in scaled units and its gradients w.r.t. every weight and bias."""
    acts = [U]
    pres = []
    a = U
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        pre = a @ W + b
        pres.append(pre)
        a = softplus(pre)
        acts.append(a)
    out = a @ net.weights[-1] + net.biases[-1]
    diff = out - T
    loss = float(np.mean(diff * diff))
    delta = 2.0 * diff / diff.size
    gW = [None] * len(net.weights)
    gb = [None] * len(net.biases)
    for layer in range(len(net.weights) - 1, -1, -1):
        gW[layer] = acts[layer].T @ delta
        gb[layer] = delta.sum(axis=0)
        if layer:
            delta = (delta @ net.weights[layer].T) * expit(pres[layer - 1])
    return loss, gW, gb


def prepare(net: MlpSurrogate, X, Y) -> tuple[np.ndarray, np.ndarray]:
    """Fit the scalers on ``(X, Y)`` and return the scaled arrays."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Yt = _transform(Y, X, net.output_mode, net.meta)
    net.input_scaler = MinMaxScaler.fit(X)
    net.output_scaler = MinMaxScaler.fit(Yt)
    return net.input_scaler.transform(X), net.output_scaler.transform(Yt)


def train(net: MlpSurrogate, inputs, targets, cfg: TrainConfig, fit_scalers: bool = True):
    """Minibatch Adam on the MSE in scaled units; two learning-rate phases.

    Returns ``(net, history)`` where ``history`` is the mean training loss per
    epoch. ``net`` is updated in place.
    """
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if X.shape[0] == 0 or X.shape[0] != Y.shape[0]:
        raise ValueError("dataset must be non-empty with matching row counts")
    if X.shape[1] != net.n_inputs or Y.shape[1] != net.n_outputs:
        raise ValueError("dataset shape does not match the network")
    if fit_scalers:
        U, T = prepare(net, X, Y)
    else:
        U = net.input_scaler.transform(X)
        T = net.output_scaler.transform(_transform(Y, X, net.output_mode, net.meta))
    params = net.weights + net.biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(cfg.seed)
    n = U.shape[0]
    step = 0
    history = []
    schedule = [(cfg.lr_phase1, cfg.epochs_phase1), (cfg.lr_phase2, cfg.epochs_phase2)]
    for lr, epochs in schedule:
        for _ in range(epochs):
            perm = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = perm[start:start + cfg.batch_size]
                loss, gW, gb = loss_and_grads(net, U[idx], T[idx])
                if not np.isfinite(loss):
                    raise FloatingPointError(
                        f"non-finite loss at epoch {len(history)}, batch starting {start}; "
                        f"try a smaller learning rate (current {lr})")
                total += loss * idx.size
                step += 1
                c1 = 1.0 - cfg.beta1 ** step
                c2 = 1.0 - cfg.beta2 ** step
                for p, g, a, v in zip(params, gW + gb, m1, m2):
                    a *= cfg.beta1
                    a += (1.0 - cfg.beta1) * g
                    v *= cfg.beta2
                    v += (1.0 - cfg.beta2) * g * g
                    p -= lr * (a / c1) / (np.sqrt(v / c2) + cfg.epsilon)
            history.append(total / n)
            if len(history) % 50 == 0:
                log.info("epoch %d loss %.3e", len(history), history[-1])
    return net, np.array(history)


def metrics(net: MlpSurrogate, inputs, targets) -> tuple[np.ndarray, np.ndarray]:
    """Per-output R^2 and mean absolute error on a test set."""
    Y = np.asarray(targets, dtype=float)
    if Y.shape[0] == 0:
        raise ValueError("empty test set")
    pred = net.predict(inputs)
    return r2_mae(Y, pred)


def r2_mae(Y, pred) -> tuple[np.ndarray, np.ndarray]:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    ss_res = ((Y - pred) ** 2).sum(axis=0)
    ss_tot = ((Y - Y.mean(axis=0)) ** 2).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / ss_tot, np.where(ss_res == 0, 1.0, 0.0))
    return r2, np.abs(Y - pred).mean(axis=0)
