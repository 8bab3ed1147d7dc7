"""Pathwise parameter sensitivities of 7L paths and of Asian option values."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .interpolation import knot_sensitivities
from .models import THETA_NAMES, ModelKind, SdeParams, TimeGrid, exact_paths
from .paths import normal_draws
from .pricing import OptionKind, OptionSpec
from .seven_league import SevenLeagueSampler


@dataclass
class SensitivityPath:
    states: np.ndarray
    dstate_dtheta: np.ndarray
    theta_name: str = ""


def theta_index(params: SdeParams, name: str) -> int:
    names = THETA_NAMES[params.kind]
    if name not in names:
        raise ValueError(f"{params.kind.value} has no parameter {name!r}; choose from {names}")
    return names.index(name)


def _check(sampler: SevenLeagueSampler):
    if not hasattr(sampler.surrogate, "input_jacobian"):
        raise TypeError("surrogate does not provide input derivatives")


def step_sensitivity(sampler: SevenLeagueSampler, y_prev, dy_prev_dtheta, t, dt, z,
                     theta_index: int):
    """One step of the chain rule ``dY_{i+1}/dtheta``.

    ``sum_j (dH_j/dtheta + dH_j/dy_prev * dY_i/dtheta) * p_j(z)`` where
    ``p_j(z) = d g(z) / d y_j`` at fixed nodes. Returns ``(y_next, dy_next)``.
    Inputs clamped to the trained domain still use the surrogate slope there.
    """
    _check(sampler)
    y_prev = np.atleast_1d(np.asarray(y_prev, dtype=float))
    dy = np.broadcast_to(np.asarray(dy_prev_dtheta, dtype=float), y_prev.shape)
    z = np.broadcast_to(np.asarray(z, dtype=float), y_prev.shape)
    Y, J = sampler.points_and_jacobian(y_prev, t, dt)
    dH = J[:, :, 3 + theta_index] + J[:, :, 0] * dy[:, None]
    P = knot_sensitivities(sampler.interpolant_kind, sampler.nodes, Y, z, sampler.extrapolation)
    y_next = sampler.sample_from_points(Y, z)
    return y_next, np.einsum("nm,nm->n", dH, P)


def path_sensitivity(sampler: SevenLeagueSampler, grid: TimeGrid, z: np.ndarray,
                     theta_name: str = "sigma") -> SensitivityPath:
    """States and ``dY_i/dtheta`` along 7L paths driven by ``z`` (``(n_paths, n_steps)``)."""
    k = theta_index(sampler.params, theta_name)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = z.shape[0]
    Y = np.empty((n, grid.n_steps + 1))
    D = np.zeros_like(Y)
    Y[:, 0] = sampler.params.y0
    for i in range(grid.n_steps):
        Y[:, i + 1], D[:, i + 1] = step_sensitivity(sampler, Y[:, i], D[:, i], grid.times[i],
                                                    grid.dt, z[:, i], k)
    return SensitivityPath(Y, D, theta_name)


def exact_path_sensitivity(params: SdeParams, grid: TimeGrid, z: np.ndarray) -> SensitivityPath:
    """Analytic ``dY(t_i)/dsigma`` of exact GBM paths driven by ``z``."""
    if params.kind is not ModelKind.GBM:
        raise ValueError("analytic pathwise vega is only available for GBM")
    z = np.atleast_2d(np.asarray(z, dtype=float))
    Y = exact_paths(params, grid, z)
    W = np.zeros_like(Y)
    W[:, 1:] = np.sqrt(grid.dt) * np.cumsum(z, axis=1)
    tau = grid.times - grid.t0
    return SensitivityPath(Y, Y * (W - params.sigma * tau), "sigma")


def asian_vega_from_paths(sens: SensitivityPath, spec: OptionSpec) -> float:
    """``e^{-rT} mean(1{A > K} * mean_i dY_i/dsigma)`` over ``t_1..t_N``."""
    if spec.kind is not OptionKind.ASIAN:
        raise ValueError("vega is wired for the Asian option only")
    n = sens.states.shape[1] - 1
    if n != spec.n_dates:
        raise ValueError(f"paths have {n} steps but the contract has {spec.n_dates} dates")
    avg = sens.states[:, 1:].mean(axis=1)
    dA = sens.dstate_dtheta[:, 1:].mean(axis=1)
    return float(np.exp(-spec.rate * spec.maturity) * np.mean((avg > spec.strike) * dA))


def asian_vega(sampler: SevenLeagueSampler, spec: OptionSpec, n_paths: int, seed: int) -> float:
    """Pathwise Asian vega through the surrogate; the model drift should equal ``spec.rate``."""
    if sampler.params.kind is not ModelKind.GBM:
        raise ValueError("Asian vega assumes a GBM model")
    grid = TimeGrid(spec.dt, spec.n_dates)
    z = normal_draws(seed, n_paths, spec.n_dates)
    return asian_vega_from_paths(path_sensitivity(sampler, grid, z, "sigma"), spec)


def asian_vega_fd_exact(params: SdeParams, spec: OptionSpec, n_paths: int, seed: int,
                        h: float = 1e-3) -> float:
    """Central finite-difference Asian vega on exact GBM paths with matched draws."""
    grid = TimeGrid(spec.dt, spec.n_dates)
    z = normal_draws(seed, n_paths, spec.n_dates)
    disc = np.exp(-spec.rate * spec.maturity)
    vals = []
    for s in (params.sigma + h, params.sigma - h):
        Y = exact_paths(replace(params, sigma=s), grid, z)
        vals.append(disc * np.maximum(Y[:, 1:].mean(axis=1) - spec.strike, 0.0).mean())
    return float((vals[0] - vals[1]) / (2 * h))
