"""Gauss-Hermite rules, empirical quantiles and the two-sample KS test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def m(self) -> int:
        return self.nodes.size


def gauss_hermite_normal(m: int) -> QuadratureRule:
    """Gauss rule for the standard normal weight (probabilists' Hermite).

    Golub-Welsch: the nodes are the eigenvalues of the Jacobi matrix with
    zero diagonal and off-diagonal ``sqrt(k)``; the weights are the squared
    first components of the normalised eigenvectors.
    """
    if not 2 <= m <= 25:
        raise ValueError(f"m must lie in [2, 25], got {m}")
    off = np.sqrt(np.arange(1, m, dtype=float))
    nodes, vecs = linalg.eigh_tridiagonal(np.zeros(m), off)
    weights = vecs[0] ** 2
    # symmetrise away the eigensolver's last-bit asymmetry
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(nodes, weights / weights.sum())


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_inv_cdf(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("inverse normal CDF needs 0 < p < 1")
    out = special.ndtri(p)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EmpiricalDistribution:
    sorted_samples: np.ndarray

    def __post_init__(self):
        if self.sorted_samples.size < 2:
            raise ValueError("need at least two samples")

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalDistribution":
        return cls(np.sort(np.asarray(samples, dtype=float).ravel()))

    @property
    def n(self) -> int:
        return self.sorted_samples.size

    def cdf(self, x):
        return np.searchsorted(self.sorted_samples, x, side="right") / self.n


def empirical_quantile(dist: EmpiricalDistribution, p):
    """Quantile with plotting position ``k/(n+1)`` and clamping at the extremes.

    The k-th order statistic (1-based) sits at level ``k/(n+1)``; levels in
    between are linearly interpolated, levels outside ``[1/(n+1), n/(n+1)]``
    return the min/max sample.
    """
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("quantile level must satisfy 0 < p < 1")
    return quantiles_sorted(dist.sorted_samples, p)


def quantiles_sorted(sorted_samples: np.ndarray, p) -> np.ndarray:
    """Vectorised core of :func:`empirical_quantile` along the last axis.

    ``sorted_samples`` may be 2-D (one sorted sample per row).
    """
    n = sorted_samples.shape[-1]
    pos = np.clip(np.asarray(p, dtype=float) * (n + 1) - 1.0, 0.0, n - 1.0)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    a = np.take(sorted_samples, lo, axis=-1)
    b = np.take(sorted_samples, hi, axis=-1)
    return a + frac * (b - a)


def ks_statistic(a, b) -> float:
    """Exact ``sup |F_a - F_b|`` over the merged sample."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = a.sorted_samples if isinstance(a, EmpiricalDistribution) else np.asarray(a, dtype=float)
    b = b.sorted_samples if isinstance(b, EmpiricalDistribution) else np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    d = ks_statistic(a, b)
    en = np.sqrt(a.size * b.size / (a.size + b.size))
    # Stephens' small-sample correction to the Kolmogorov limit law
    p = float(special.kolmogorov((en + 0.12 + 0.11 / en) * d))
    return d, min(max(p, 0.0), 1.0)


def ks_one_sample(samples, cdf) -> float:
    """``sup |F_n - F|`` against a continuous reference CDF."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    f = cdf(x)
    return float(max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n)))
