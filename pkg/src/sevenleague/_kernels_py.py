"""Pure numpy implementation of the batched interpolation kernels.

Every kernel works on ``n`` independent rows sharing the abscissas ``x``
(shape ``(m,)``, strictly increasing). ``Y`` has shape ``(n, m)`` and may be a
broadcast view; ``q`` has shape ``(n,)``. Queries outside ``[x[0], x[-1]]``
are clamped unless ``linear`` is set, in which case the interpolant is
extended with its end-point derivative.
"""
import numpy as np


def _edge_slope(h0, h1, m0, m1):
    d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    d = np.where(np.sign(d) != np.sign(m0), 0.0, d)
    return np.where((np.sign(m0) != np.sign(m1)) & (np.abs(d) > 3.0 * np.abs(m0)), 3.0 * m0, d)


def pchip_slopes(x, Y):
    x = np.asarray(x, dtype=float)
    Y = np.asarray(Y, dtype=float)
    h = np.diff(x)
    d = np.diff(Y, axis=-1) / h
    m = x.size
    F = np.zeros(Y.shape)
    if m == 2:
        F[..., 0] = d[..., 0]
        F[..., 1] = d[..., 0]
        return F
    w1 = 2.0 * h[1:] + h[:-1]
    w2 = h[1:] + 2.0 * h[:-1]
    dl, dr = d[..., :-1], d[..., 1:]
    same = dl * dr > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        hm = (w1 + w2) / (w1 / dl + w2 / dr)
    F[..., 1:-1] = np.where(same, hm, 0.0)
    F[..., 0] = _edge_slope(h[0], h[1], d[..., 0], d[..., 1])
    F[..., -1] = _edge_slope(h[-1], h[-2], d[..., -1], d[..., -2])
    return F


def _locate(x, qc):
    return np.clip(np.searchsorted(x, qc, side="right") - 1, 0, x.size - 2)


def hermite_eval(x, Y, F, q, linear=False):
    x = np.asarray(x, dtype=float)
    q = np.asarray(q, dtype=float)
    qc = np.clip(q, x[0], x[-1])
    k = _locate(x, qc)
    rows = np.arange(q.size)
    h = x[k + 1] - x[k]
    t = (qc - x[k]) / h
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    out = (h00 * Y[rows, k] + h10 * h * F[rows, k]
           + h01 * Y[rows, k + 1] + h11 * h * F[rows, k + 1])
    if linear:
        out = out + np.where(q < x[0], (q - x[0]) * F[rows, 0], 0.0)
        out = out + np.where(q > x[-1], (q - x[-1]) * F[rows, -1], 0.0)
    return out


def pchip_eval(x, Y, q, linear=False):
    Y = np.asarray(Y, dtype=float)
    return hermite_eval(x, Y, pchip_slopes(x, Y), q, linear)


def bary_endpoint_derivs(x, w, Y):
    """Derivative of the interpolating polynomial at ``x[0]`` and ``x[-1]``."""
    out = []
    for j in (0, x.size - 1):
        others = np.arange(x.size) != j
        coef = (w[others] / w[j]) / (x[j] - x[others])
        out.append(((Y[..., others] - Y[..., j:j + 1]) * coef).sum(axis=-1))
    return out


def bary_eval(x, w, Y, q, linear=False):
    x = np.asarray(x, dtype=float)
    Y = np.asarray(Y, dtype=float)
    q = np.asarray(q, dtype=float)
    qc = np.clip(q, x[0], x[-1])
    diff = qc[:, None] - x[None, :]
    hit = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = w / diff
        out = (t * Y).sum(axis=1) / t.sum(axis=1)
    any_hit = hit.any(axis=1)
    if any_hit.any():
        rows = np.nonzero(any_hit)[0]
        out[rows] = Y[rows, hit[rows].argmax(axis=1)]
    if linear:
        d0, d1 = bary_endpoint_derivs(x, w, Y)
        out = out + np.where(q < x[0], (q - x[0]) * d0, 0.0)
        out = out + np.where(q > x[-1], (q - x[-1]) * d1, 0.0)
    return out


def cheb_eval(lo, hi, C, q, linear=False):
    """Clenshaw evaluation of per-row Chebyshev series on ``[lo, hi]``."""
    C = np.asarray(C, dtype=float)
    q = np.asarray(q, dtype=float)
    s = (2.0 * np.clip(q, lo, hi) - lo - hi) / (hi - lo)
    b1 = np.zeros(q.size)
    b2 = np.zeros(q.size)
    for k in range(C.shape[1] - 1, 0, -1):
        b1, b2 = 2.0 * s * b1 - b2 + C[:, k], b1
    out = s * b1 - b2 + C[:, 0]
    if linear:
        k = np.arange(C.shape[1], dtype=float)
        scale = 2.0 / (hi - lo)
        d_hi = (C * k * k).sum(axis=1) * scale
        d_lo = (C * k * k * (-1.0) ** (k + 1)).sum(axis=1) * scale
        out = out + np.where(q < lo, (q - lo) * d_lo, 0.0)
        out = out + np.where(q > hi, (q - hi) * d_hi, 0.0)
    return out
