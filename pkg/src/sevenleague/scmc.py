"""Stochastic Collocation Monte Carlo: map cheap normal draws through a collocation interpolant."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interpolation import Extrapolation, InterpKind, eval_rows
from .probability import EmpiricalDistribution, QuadratureRule, quantiles_sorted, std_normal_cdf

DEFAULT_M = 5


@dataclass(frozen=True)
class CollocationSet:
    x_points: np.ndarray
    y_points: np.ndarray
    interpolant_kind: InterpKind = InterpKind.PCHIP
    extrapolation: Extrapolation = Extrapolation.CLAMP

    @property
    def m(self) -> int:
        return self.x_points.size


def extract_collocation(samples: EmpiricalDistribution, rule: QuadratureRule,
                        interpolant_kind=InterpKind.PCHIP) -> CollocationSet:
    """Collocation points ``y_j = F^{-1}(Phi(x_j))`` estimated from a sample cloud."""
    if samples.n < 10 * rule.m:
        raise ValueError(f"need at least {10 * rule.m} samples for m={rule.m}, got {samples.n}")
    y = quantiles_sorted(samples.sorted_samples, std_normal_cdf(rule.nodes))
    return CollocationSet(rule.nodes.copy(), np.asarray(y), InterpKind(interpolant_kind))


def collocation_rows(sorted_rows: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Collocation points for each row of a stack of sorted samples, shape ``(n_rows, m)``."""
    return quantiles_sorted(sorted_rows, std_normal_cdf(nodes))


def scmc_sample(colloc: CollocationSet, z_draws) -> np.ndarray:
    """Samples ``g_m(z)`` through the interpolant of ``(x_j, y_j)``."""
    z = np.asarray(z_draws, dtype=float)
    out = eval_rows(colloc.interpolant_kind, colloc.x_points, colloc.y_points, z.ravel(),
                    colloc.extrapolation)
    return out.reshape(z.shape)
