"""Compression-decompression (CDC) variant of the large-time-step sampler.

The surrogate is evaluated only at ``M_s`` marginal collocation points per time
(compression). Paths then recover their conditional points by interpolating
over those anchors (decompression), so no network call depends on ``n_paths``.

Binary layout of a saved matrix (``<stem>.bin``, little-endian float64)::

    marginal     [N, M_s]        row i holds the marginal points at times[i]
    conditional  [N, M_s, M_c]   entry (i, j, k) is point k given Y(t_i) = marginal[i, j]

The ``<stem>.json`` header carries the dimensions, grid, nodes and model.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .interpolation import Extrapolation, InterpKind, eval_rows, make_aux
from .models import SdeParams, TimeGrid
from .paths import PathEnsemble, normal_draws
from .probability import gauss_hermite_normal
from .scmc import CollocationSet
from .seven_league import SevenLeagueSampler

FORMAT_VERSION = 1


def _pair(stem) -> tuple[Path, Path]:
    """Header and binary paths for a matrix stem; a trailing .json or .bin is dropped."""
    stem = Path(stem)
    if stem.suffix in (".json", ".bin"):
        stem = stem.with_suffix("")
    return stem.parent / (stem.name + ".json"), stem.parent / (stem.name + ".bin")


@dataclass
class CdcMatrix:
    times: np.ndarray
    dt: float
    x_nodes: np.ndarray
    x_cond_nodes: np.ndarray
    marginal: np.ndarray
    conditional: np.ndarray
    params: SdeParams | None = None
    interpolant_kind: InterpKind = InterpKind.PCHIP
    extrapolation: Extrapolation = Extrapolation.CLAMP
    meta: dict = field(default_factory=dict)
    anchor_extrapolation: Extrapolation = Extrapolation.CLAMP

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.x_nodes = np.asarray(self.x_nodes, dtype=float)
        self.x_cond_nodes = np.asarray(self.x_cond_nodes, dtype=float)
        self.marginal = np.asarray(self.marginal, dtype=float)
        self.conditional = np.asarray(self.conditional, dtype=float)
        self.interpolant_kind = InterpKind(self.interpolant_kind)
        self.extrapolation = Extrapolation(self.extrapolation)
        self.anchor_extrapolation = Extrapolation(self.anchor_extrapolation)
        n, ms, mc = self.n_times, self.x_nodes.size, self.x_cond_nodes.size
        if self.marginal.shape != (n, ms) or self.conditional.shape != (n, ms, mc):
            raise ValueError(f"matrix shapes {self.marginal.shape}, {self.conditional.shape} "
                             f"do not match N={n}, M_s={ms}, M_c={mc}")
        if np.any(np.diff(self.marginal, axis=1) < 0) or np.any(np.diff(self.conditional, axis=2) < 0):
            raise ValueError("marginal and conditional rows must be non-decreasing")

    @property
    def n_times(self) -> int:
        return self.times.size

    @property
    def m_s(self) -> int:
        return self.x_nodes.size

    @property
    def m_c(self) -> int:
        return self.x_cond_nodes.size

    def save(self, stem) -> tuple[Path, Path]:
        head, binp = _pair(stem)
        header = {
            "format_version": FORMAT_VERSION,
            "n_times": self.n_times, "m_s": self.m_s, "m_c": self.m_c,
            "times": self.times.tolist(), "dt": self.dt,
            "x_nodes": self.x_nodes.tolist(), "x_cond_nodes": self.x_cond_nodes.tolist(),
            "params": None if self.params is None else self.params.to_dict(),
            "interpolant_kind": self.interpolant_kind.value,
            "extrapolation": self.extrapolation.value,
            "anchor_extrapolation": self.anchor_extrapolation.value,
            "layout": "marginal[N,M_s] then conditional[N,M_s,M_c], row-major, <f8",
            "meta": self.meta,
        }
        head.write_text(json.dumps(header, indent=2))
        with open(binp, "wb") as fh:
            fh.write(np.ascontiguousarray(self.marginal, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.conditional, dtype="<f8").tobytes())
        return head, binp

    @classmethod
    def load(cls, stem) -> "CdcMatrix":
        head, binp = _pair(stem)
        h = json.loads(head.read_text())
        if h.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported matrix format {h.get('format_version')}")
        n, ms, mc = h["n_times"], h["m_s"], h["m_c"]
        buf = np.fromfile(binp, dtype="<f8")
        if buf.size != n * ms * (1 + mc):
            raise ValueError("matrix binary size does not match its header")
        params = None if h["params"] is None else SdeParams.from_dict(h["params"])
        return cls(h["times"], h["dt"], h["x_nodes"], h["x_cond_nodes"],
                   buf[:n * ms].reshape(n, ms), buf[n * ms:].reshape(n, ms, mc), params,
                   h["interpolant_kind"], h["extrapolation"], h.get("meta", {}),
                   h.get("anchor_extrapolation", "clamp"))


def _strictly_increasing(row: np.ndarray) -> np.ndarray:
    """Separate tied anchors by a relative hair so they can act as knots."""
    out = row.copy()
    eps = 1e-12 * max(1.0, float(np.abs(row).max()))
    for j in range(1, out.size):
        if out[j] <= out[j - 1]:
            out[j] = out[j - 1] + eps
    return out


def build_matrix(sampler: SevenLeagueSampler, marginal_surrogate, grid: TimeGrid,
                 marginal_nodes=None, anchor_extrapolation="clamp") -> CdcMatrix:
    """Compression: marginal points at every ``t_i`` and conditional points for each step from them.

    The marginal surrogate is called with ``(Y0, t0, t_i - t0, theta)`` and the
    conditional one with ``(marginal_j, t_i, dt, theta)``; both batched. At
    ``t_0`` the marginal distribution is the point mass ``Y0``, so that row is
    set exactly (the surrogate row is still evaluated to keep the call count
    uniform). ``marginal_nodes`` defaults to the Gauss-Hermite nodes matching
    the marginal surrogate's output width. ``anchor_extrapolation`` sets how
    decompression treats realizations outside the marginal points: ``"clamp"``
    reuses the nearest row, ``"linear"`` extends the end segments.
    """
    params = sampler.params
    if marginal_surrogate.n_inputs != sampler.surrogate.n_inputs:
        raise ValueError("marginal and conditional surrogates take different inputs")
    times = grid.times[:-1]
    n = times.size
    t0 = time.perf_counter()
    Xm = np.empty((n, marginal_surrogate.n_inputs))
    Xm[:, 0] = params.y0
    Xm[:, 1] = grid.t0
    Xm[:, 2] = times - grid.t0
    Xm[:, 3:] = params.theta()
    lo, hi = marginal_surrogate.input_bounds
    if np.any(Xm[1:, 2] > hi[2] * (1 + 1e-9)):
        raise ValueError(f"horizon {times[-1] - grid.t0} exceeds the marginal surrogate range {hi[2]}")
    marginal = np.sort(marginal_surrogate.predict(np.clip(Xm, lo, hi)), axis=1)
    marginal[0] = params.y0
    cond = sampler.points(marginal.ravel(), np.repeat(times, marginal.shape[1]), grid.dt)
    conditional = cond.reshape(n, marginal.shape[1], -1)
    build_s = time.perf_counter() - t0
    if marginal_nodes is None:
        marginal_nodes = gauss_hermite_normal(marginal_surrogate.n_outputs).nodes
    return CdcMatrix(times, grid.dt, np.asarray(marginal_nodes, dtype=float), sampler.nodes.copy(),
                     marginal, conditional, params, sampler.interpolant_kind, sampler.extrapolation,
                     meta={"build_seconds": build_s, "marginal_evaluations": n,
                           "conditional_evaluations": n * marginal.shape[1]},
                     anchor_extrapolation=anchor_extrapolation)


def decompress(matrix: CdcMatrix, i: int, y_star: np.ndarray, kind: InterpKind) -> np.ndarray:
    """Conditional points for realizations ``y_star`` at time index ``i``, shape ``(n, M_c)``."""
    anchors = matrix.marginal[i]
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    if anchors[-1] - anchors[0] <= 1e-12 * max(1.0, abs(anchors[0])):
        return np.broadcast_to(matrix.conditional[i, 0], (y_star.size, matrix.m_c)).copy()
    anchors = _strictly_increasing(anchors)
    aux = make_aux(kind, anchors)
    out = np.empty((y_star.size, matrix.m_c))
    for k in range(matrix.m_c):
        out[:, k] = eval_rows(kind, anchors, matrix.conditional[i, :, k], y_star,
                              matrix.anchor_extrapolation, aux=aux)
    return np.sort(out, axis=1)


def conditional_points_from_matrix(matrix: CdcMatrix, t_index: int, y_star,
                                   interpolant_kind=None) -> CollocationSet:
    """Decompression at a single realization ``y_star``."""
    kind = matrix.interpolant_kind if interpolant_kind is None else InterpKind(interpolant_kind)
    if not 0 <= t_index < matrix.n_times:
        raise IndexError(f"t_index {t_index} outside 0..{matrix.n_times - 1}")
    y = decompress(matrix, t_index, np.asarray([float(y_star)]), kind)[0]
    return CollocationSet(matrix.x_cond_nodes.copy(), y, matrix.interpolant_kind, matrix.extrapolation)


def simulate_cdc_with_draws(matrix: CdcMatrix, z: np.ndarray, interpolant_kind=None) -> PathEnsemble:
    kind = matrix.interpolant_kind if interpolant_kind is None else InterpKind(interpolant_kind)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != matrix.n_times:
        raise ValueError(f"need {matrix.n_times} draws per path, got {z.shape[1]}")
    if matrix.params is None:
        raise ValueError("matrix carries no model parameters")
    y = np.empty((z.shape[0], matrix.n_times + 1))
    y[:, 0] = matrix.params.y0
    aux = make_aux(matrix.interpolant_kind, matrix.x_cond_nodes)
    t_dec = t_smp = 0.0
    for i in range(matrix.n_times):
        c0 = time.perf_counter()
        P = decompress(matrix, i, y[:, i], kind)
        c1 = time.perf_counter()
        y[:, i + 1] = eval_rows(matrix.interpolant_kind, matrix.x_cond_nodes, P, z[:, i],
                                matrix.extrapolation, aux=aux)
        t_dec += c1 - c0
        t_smp += time.perf_counter() - c1
    times = np.append(matrix.times, matrix.times[-1] + matrix.dt)
    return PathEnsemble(times, y, z, scheme="7l-cdc",
                        meta={"timings": {"decompression": t_dec, "sampling": t_smp}})


def simulate_cdc(matrix: CdcMatrix, n_paths: int, seed: int, interpolant_kind=None) -> PathEnsemble:
    ens = simulate_cdc_with_draws(matrix, normal_draws(seed, n_paths, matrix.n_times), interpolant_kind)
    ens.meta["seed"] = seed
    return ens


def predicted_speedup(t_interp: float, t_ann: float, m_s: int, m_paths: int) -> float:
    """Cost ratio CDC / plain: ``t_I / t_A + M_s / M`` (per-path interpolation vs network time)."""
    if t_interp <= 0 or t_ann <= 0 or m_s < 1 or m_paths < 1:
        raise ValueError("timings must be positive and counts at least one")
    return t_interp / t_ann + m_s / m_paths
