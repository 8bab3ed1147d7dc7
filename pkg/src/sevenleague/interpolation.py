"""One-dimensional interpolants: barycentric Lagrange, Chebyshev fit and PCHIP.

:func:`fit` / :func:`evaluate` handle a single set of knots. :func:`eval_rows`
is the batched form used by the samplers: many rows share the abscissas but
carry their own knot values and query point.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels


class InterpKind(str, Enum):
    BARYCENTRIC = "barycentric"
    CHEBYSHEV = "chebyshev"
    PCHIP = "pchip"


class Extrapolation(str, Enum):
    CLAMP = "clamp"
    LINEAR = "linear"


def barycentric_weights(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / diff.prod(axis=1)
    return w / np.abs(w).max()


def chebyshev_vandermonde(x, lo: float, hi: float, degree: int) -> np.ndarray:
    s = (2.0 * np.asarray(x, dtype=float) - lo - hi) / (hi - lo)
    return np.polynomial.chebyshev.chebvander(s, degree)


def chebyshev_projection(x, degree: int | None = None) -> np.ndarray:
    """Matrix ``P`` with Chebyshev coefficients ``c = P @ y`` (least squares via SVD)."""
    x = np.asarray(x, dtype=float)
    degree = x.size - 1 if degree is None else degree
    return np.linalg.pinv(chebyshev_vandermonde(x, x[0], x[-1], degree))


def chebyshev_nodes(m: int, x_a: float, x_b: float) -> np.ndarray:
    """Chebyshev extrema mapped onto ``[x_a, x_b]``, ascending."""
    if m < 2:
        raise ValueError("need m >= 2")
    if not x_b > x_a:
        raise ValueError(f"degenerate interval [{x_a}, {x_b}]")
    k = np.arange(m)
    nodes = x_a + 0.5 * (1.0 + np.cos(np.pi * k / (m - 1))) * (x_b - x_a)
    nodes = nodes[::-1].copy()
    nodes[0], nodes[-1] = x_a, x_b
    return nodes


def _check_knots(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need at least two knots")
    if np.any(np.diff(x) <= 0):
        raise ValueError("knot abscissas must be distinct and increasing")
    return x


def eval_rows(kind, x, Y, q, extrapolation=Extrapolation.CLAMP, *, aux=None) -> np.ndarray:
    """Evaluate ``n`` interpolants sharing abscissas ``x`` at one query each.

    ``Y`` is ``(n, m)`` (or ``(m,)`` to share the knot values too), ``q`` is
    ``(n,)``. ``aux`` optionally carries precomputed barycentric weights or a
    Chebyshev projection matrix for ``x``.
    """
    kind = InterpKind(kind)
    linear = Extrapolation(extrapolation) is Extrapolation.LINEAR
    x = np.ascontiguousarray(x, dtype=float)
    q = np.ascontiguousarray(np.atleast_1d(q), dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = np.broadcast_to(Y, (q.size, Y.size))
    if kind is InterpKind.PCHIP:
        return kernels.pchip_eval(x, Y, q, linear)
    if kind is InterpKind.BARYCENTRIC:
        w = barycentric_weights(x) if aux is None else aux
        return kernels.bary_eval(x, w, Y, q, linear)
    P = chebyshev_projection(x) if aux is None else aux
    C = np.ascontiguousarray(Y @ P.T)
    return kernels.cheb_eval(x[0], x[-1], C, q, linear)


def make_aux(kind, x):
    kind = InterpKind(kind)
    if kind is InterpKind.BARYCENTRIC:
        return barycentric_weights(x)
    if kind is InterpKind.CHEBYSHEV:
        return chebyshev_projection(x)
    return None


@dataclass(frozen=True)
class Interpolant:
    kind: InterpKind
    knots_x: np.ndarray
    knots_y: np.ndarray
    coefficients: np.ndarray
    extrapolation: Extrapolation = Extrapolation.CLAMP

    def __call__(self, x):
        return evaluate(self, x)


def fit(kind, points, extrapolation=Extrapolation.CLAMP, degree: int | None = None) -> Interpolant:
    """Fit an interpolant through ``(x, y)`` pairs.

    ``coefficients`` holds barycentric weights, Chebyshev coefficients (on the
    knot hull mapped to ``[-1, 1]``) or PCHIP slopes, depending on ``kind``.
    ``degree`` applies to the Chebyshev fit only (default: knots - 1).
    """
    kind = InterpKind(kind)
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be a sequence of (x, y) pairs")
    order = np.argsort(pts[:, 0], kind="stable")
    x = _check_knots(pts[order, 0])
    y = pts[order, 1]
    if kind is InterpKind.BARYCENTRIC:
        coef = barycentric_weights(x)
    elif kind is InterpKind.CHEBYSHEV:
        coef = chebyshev_projection(x, degree) @ y
    else:
        coef = kernels.pchip_slopes(x, y[None, :])[0]
    return Interpolant(kind, x, y, coef, Extrapolation(extrapolation))


def evaluate(interp: Interpolant, x):
    xq = np.asarray(x, dtype=float)
    q = np.ascontiguousarray(xq.ravel())
    n = q.size
    linear = interp.extrapolation is Extrapolation.LINEAR
    kx = interp.knots_x
    Y = np.broadcast_to(interp.knots_y, (n, kx.size))
    if interp.kind is InterpKind.PCHIP:
        F = np.broadcast_to(interp.coefficients, (n, kx.size))
        out = kernels.hermite_eval(kx, Y, F, q, linear)
    elif interp.kind is InterpKind.BARYCENTRIC:
        out = kernels.bary_eval(kx, interp.coefficients, Y, q, linear)
    else:
        C = np.broadcast_to(interp.coefficients, (n, interp.coefficients.size))
        out = kernels.cheb_eval(kx[0], kx[-1], C, q, linear)
    return out.reshape(xq.shape) if xq.ndim else float(out[0])


def _pchip_edge_grad(h0, h1, m0, m1):
    """Edge slope and its partials w.r.t. ``m0`` and ``m1`` (vectorised)."""
    d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    g0 = np.full_like(d, (2.0 * h0 + h1) / (h0 + h1))
    g1 = np.full_like(d, -h0 / (h0 + h1))
    zero = np.sign(d) != np.sign(m0)
    cap = ~zero & (np.sign(m0) != np.sign(m1)) & (np.abs(d) > 3.0 * np.abs(m0))
    d = np.where(zero, 0.0, np.where(cap, 3.0 * m0, d))
    g0 = np.where(zero, 0.0, np.where(cap, 3.0, g0))
    g1 = np.where(zero | cap, 0.0, g1)
    return d, g0, g1


def pchip_slope_jacobian(x, Y):
    """PCHIP slopes ``F`` and ``dF/dY`` of shape ``(n, m, m)``."""
    x = np.asarray(x, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, m = Y.shape
    h = np.diff(x)
    d = np.diff(Y, axis=1) / h
    # dd[j] / dY: d_j = (Y_{j+1} - Y_j) / h_j
    dd = np.zeros((m - 1, m))
    for j in range(m - 1):
        dd[j, j] = -1.0 / h[j]
        dd[j, j + 1] = 1.0 / h[j]
    F = np.zeros((n, m))
    J = np.zeros((n, m, m))
    if m == 2:
        F[:, 0] = F[:, 1] = d[:, 0]
        J[:, 0] = J[:, 1] = dd[0]
        return F, J
    for k in range(1, m - 1):
        w1 = 2.0 * h[k] + h[k - 1]
        w2 = h[k] + 2.0 * h[k - 1]
        dl, dr = d[:, k - 1], d[:, k]
        ok = dl * dr > 0
        dls = np.where(ok, dl, 1.0)
        drs = np.where(ok, dr, 1.0)
        den = w1 / dls + w2 / drs
        f = (w1 + w2) / den
        gl = (w1 + w2) * w1 / (dls * dls * den * den)
        gr = (w1 + w2) * w2 / (drs * drs * den * den)
        F[:, k] = np.where(ok, f, 0.0)
        J[:, k] = np.where(ok[:, None], gl[:, None] * dd[k - 1] + gr[:, None] * dd[k], 0.0)
    f0, g0, g1 = _pchip_edge_grad(h[0], h[1], d[:, 0], d[:, 1])
    F[:, 0] = f0
    J[:, 0] = g0[:, None] * dd[0] + g1[:, None] * dd[1]
    fl, g0, g1 = _pchip_edge_grad(h[-1], h[-2], d[:, -1], d[:, -2])
    F[:, -1] = fl
    J[:, -1] = g0[:, None] * dd[-1] + g1[:, None] * dd[-2]
    return F, J


def knot_sensitivities(kind, x, Y, q, extrapolation=Extrapolation.CLAMP) -> np.ndarray:
    """``d g(q) / d y_j`` at fixed abscissas, shape ``(n, m)``.

    For barycentric and Chebyshev these are the cardinal basis values; for
    PCHIP the dependence of the slopes on the knot values is included.
    """
    kind = InterpKind(kind)
    linear = Extrapolation(extrapolation) is Extrapolation.LINEAR
    x = np.asarray(x, dtype=float)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    Y = np.broadcast_to(np.asarray(Y, dtype=float), (q.size, x.size))
    n, m = Y.shape
    qc = np.clip(q, x[0], x[-1])
    below = q < x[0]
    above = q > x[-1]
    if kind is InterpKind.PCHIP:
        F, J = pchip_slope_jacobian(x, Y)
        k = np.clip(np.searchsorted(x, qc, side="right") - 1, 0, m - 2)
        rows = np.arange(n)
        h = x[k + 1] - x[k]
        t = (qc - x[k]) / h
        t2, t3 = t * t, t * t * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        G = (h * h10)[:, None] * J[rows, k] + (h * h11)[:, None] * J[rows, k + 1]
        G[rows, k] += h00
        G[rows, k + 1] += h01
        if linear:
            G += np.where(below[:, None], (q - x[0])[:, None] * J[:, 0], 0.0)
            G += np.where(above[:, None], (q - x[-1])[:, None] * J[:, -1], 0.0)
        return G
    if kind is InterpKind.BARYCENTRIC:
        w = barycentric_weights(x)
        diff = qc[:, None] - x[None, :]
        hit = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = w / diff
            G = t / t.sum(axis=1, keepdims=True)
        rows = hit.any(axis=1)
        G[rows] = hit[rows].astype(float)
        if linear:
            # endpoint derivative is linear in Y: D[j, k] y_k
            for j, mask, x_end in ((0, below, x[0]), (m - 1, above, x[-1])):
                others = np.arange(m) != j
                coef = np.zeros(m)
                coef[others] = (w[others] / w[j]) / (x[j] - x[others])
                coef[j] = -coef[others].sum()
                G += np.where(mask[:, None], (q - x_end)[:, None] * coef[None, :], 0.0)
        return G
    P = chebyshev_projection(x)
    T = chebyshev_vandermonde(qc, x[0], x[-1], P.shape[0] - 1)
    G = T @ P
    if linear:
        kk = np.arange(P.shape[0], dtype=float)
        scale = 2.0 / (x[-1] - x[0])
        d_hi = (kk * kk) @ P * scale
        d_lo = (kk * kk * (-1.0) ** (kk + 1)) @ P * scale
        G += np.where(below[:, None], (q - x[0])[:, None] * d_lo, 0.0)
        G += np.where(above[:, None], (q - x[-1])[:, None] * d_hi, 0.0)
    return G
