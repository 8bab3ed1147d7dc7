"""Classical time stepping: Euler-Maruyama, Milstein and their polynomial-in-z form."""
from __future__ import annotations

from enum import Enum

import numpy as np

from .models import SdeParams, TimeGrid, diffusion, drift, exact_paths
from .paths import PathEnsemble, normal_draws


class Scheme(str, Enum):
    EULER = "euler"
    MILSTEIN = "milstein"
    EXACT = "exact"


def euler_step(params: SdeParams, t, y, dt, z):
    b, _ = diffusion(params, t, y)
    return y + drift(params, t, y) * dt + b * np.sqrt(dt) * z


def milstein_step(params: SdeParams, t, y, dt, z):
    b, db = diffusion(params, t, y)
    return y + drift(params, t, y) * dt + b * np.sqrt(dt) * z + 0.5 * db * b * dt * (z * z - 1.0)


def step_coefficients(params: SdeParams, t, y, dt, scheme) -> np.ndarray:
    """Coefficients ``alpha_j`` with ``step = sum_j alpha_j z**j``.

    Returned with the coefficient index on the last axis.
    """
    scheme = Scheme(scheme)
    b, db = diffusion(params, t, y)
    a0 = y + drift(params, t, y) * dt
    a1 = b * np.sqrt(dt)
    if scheme is Scheme.EULER:
        return np.stack(np.broadcast_arrays(a0, a1), axis=-1)
    if scheme is Scheme.MILSTEIN:
        # the Milstein correction 0.5*b'*b*dt*(z^2 - 1) splits into a z^0 and a z^2 term
        a2 = 0.5 * db * b * dt
        return np.stack(np.broadcast_arrays(a0 - a2, a1, a2), axis=-1)
    raise ValueError(f"no polynomial form for scheme {scheme.value}")


def eval_polynomial(alpha, z):
    """Horner evaluation of ``sum_j alpha[..., j] z**j``."""
    alpha = np.asarray(alpha)
    out = alpha[..., -1] * np.ones_like(z, dtype=float)
    for j in range(alpha.shape[-1] - 2, -1, -1):
        out = out * z + alpha[..., j]
    return out


_STEPPERS = {Scheme.EULER: euler_step, Scheme.MILSTEIN: milstein_step}


def simulate_with_draws(params: SdeParams, grid: TimeGrid, scheme, z: np.ndarray) -> PathEnsemble:
    """Simulate on ``grid`` using the given draws, one row per path."""
    scheme = Scheme(scheme)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != grid.n_steps:
        raise ValueError(f"need {grid.n_steps} draws per path, got {z.shape[1]}")
    if scheme is Scheme.EXACT:
        return PathEnsemble(grid.times, exact_paths(params, grid, z), z, scheme=scheme.value)
    step = _STEPPERS[scheme]
    y = np.empty((z.shape[0], grid.n_steps + 1))
    y[:, 0] = params.y0
    times = grid.times
    for i in range(grid.n_steps):
        y[:, i + 1] = step(params, times[i], y[:, i], grid.dt, z[:, i])
    return PathEnsemble(times, y, z, scheme=scheme.value)


def simulate_paths(params: SdeParams, grid: TimeGrid, scheme, n_paths: int, rng_seed: int) -> PathEnsemble:
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    z = normal_draws(rng_seed, n_paths, grid.n_steps)
    ens = simulate_with_draws(params, grid, scheme, z)
    ens.meta["seed"] = rng_seed
    return ens


def coarsen_draws(z_fine: np.ndarray, factor: int) -> np.ndarray:
    """Aggregate fine-grid normal draws into coarse ones driven by the same Brownian path.

    ``factor`` consecutive draws are summed and rescaled by ``1/sqrt(factor)``.
    """
    n_paths, n_fine = z_fine.shape
    if n_fine % factor:
        raise ValueError(f"{n_fine} fine steps are not divisible by {factor}")
    return z_fine.reshape(n_paths, n_fine // factor, factor).sum(axis=2) / np.sqrt(factor)
