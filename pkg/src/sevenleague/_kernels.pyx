# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched interpolation kernels; see ``_kernels_py`` for the contract."""
import numpy as np

from libc.math cimport fabs


cdef inline double _sign(double v) noexcept nogil:
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return 0.0


cdef inline double _edge(double h0, double h1, double m0, double m1) noexcept nogil:
    cdef double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    if _sign(d) != _sign(m0):
        return 0.0
    if _sign(m0) != _sign(m1) and fabs(d) > 3.0 * fabs(m0):
        return 3.0 * m0
    return d


cdef void _slopes_row(const double[:] x, const double[:, :] Y, Py_ssize_t r,
                      double* F, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t k
    cdef double hl, hr, dl, dr, w1, w2
    if m == 2:
        F[0] = (Y[r, 1] - Y[r, 0]) / (x[1] - x[0])
        F[1] = F[0]
        return
    for k in range(1, m - 1):
        hl = x[k] - x[k - 1]
        hr = x[k + 1] - x[k]
        dl = (Y[r, k] - Y[r, k - 1]) / hl
        dr = (Y[r, k + 1] - Y[r, k]) / hr
        if dl * dr > 0:
            w1 = 2.0 * hr + hl
            w2 = hr + 2.0 * hl
            F[k] = (w1 + w2) / (w1 / dl + w2 / dr)
        else:
            F[k] = 0.0
    F[0] = _edge(x[1] - x[0], x[2] - x[1],
                 (Y[r, 1] - Y[r, 0]) / (x[1] - x[0]),
                 (Y[r, 2] - Y[r, 1]) / (x[2] - x[1]))
    F[m - 1] = _edge(x[m - 1] - x[m - 2], x[m - 2] - x[m - 3],
                     (Y[r, m - 1] - Y[r, m - 2]) / (x[m - 1] - x[m - 2]),
                     (Y[r, m - 2] - Y[r, m - 3]) / (x[m - 2] - x[m - 3]))


cdef inline Py_ssize_t _locate(const double[:] x, double q, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = m - 1, mid
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if x[mid] <= q:
            lo = mid
        else:
            hi = mid
    return lo


cdef inline double _hermite(const double[:] x, double y0, double y1, double f0, double f1,
                            Py_ssize_t k, double q) noexcept nogil:
    cdef double h = x[k + 1] - x[k]
    cdef double t = (q - x[k]) / h
    cdef double t2 = t * t
    cdef double t3 = t2 * t
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * f0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * f1)


def pchip_slopes(const double[:] x, const double[:, :] Y):
    cdef Py_ssize_t n = Y.shape[0], m = x.shape[0], r
    out = np.empty((n, m))
    cdef double[:, ::1] F = out
    with nogil:
        for r in range(n):
            _slopes_row(x, Y, r, &F[r, 0], m)
    return out


def hermite_eval(const double[:] x, const double[:, :] Y, const double[:, :] F,
                 const double[:] q, bint linear=False):
    cdef Py_ssize_t n = Y.shape[0], m = x.shape[0], r, k
    cdef double qr, qc, v
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for r in range(n):
            qr = q[r]
            qc = min(max(qr, x[0]), x[m - 1])
            k = _locate(x, qc, m)
            v = _hermite(x, Y[r, k], Y[r, k + 1], F[r, k], F[r, k + 1], k, qc)
            if linear:
                if qr < x[0]:
                    v += (qr - x[0]) * F[r, 0]
                elif qr > x[m - 1]:
                    v += (qr - x[m - 1]) * F[r, m - 1]
            o[r] = v
    return out


def pchip_eval(const double[:] x, const double[:, :] Y, const double[:] q, bint linear=False):
    cdef Py_ssize_t n = Y.shape[0], m = x.shape[0], r, k
    cdef double qr, qc, v
    out = np.empty(n)
    slopes = np.empty(m)
    cdef double[::1] o = out
    cdef double[::1] F = slopes
    with nogil:
        for r in range(n):
            _slopes_row(x, Y, r, &F[0], m)
            qr = q[r]
            qc = min(max(qr, x[0]), x[m - 1])
            k = _locate(x, qc, m)
            v = _hermite(x, Y[r, k], Y[r, k + 1], F[k], F[k + 1], k, qc)
            if linear:
                if qr < x[0]:
                    v += (qr - x[0]) * F[0]
                elif qr > x[m - 1]:
                    v += (qr - x[m - 1]) * F[m - 1]
            o[r] = v
    return out


cdef double _bary_deriv(const double[:] x, const double[:] w, const double[:, :] Y,
                        Py_ssize_t r, Py_ssize_t j, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t k
    cdef double s = 0.0
    for k in range(m):
        if k != j:
            s += (w[k] / w[j]) / (x[j] - x[k]) * (Y[r, k] - Y[r, j])
    return s


def bary_eval(const double[:] x, const double[:] w, const double[:, :] Y,
              const double[:] q, bint linear=False):
    cdef Py_ssize_t n = Y.shape[0], m = x.shape[0], r, j
    cdef double qr, qc, num, den, t, v
    cdef bint hit
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for r in range(n):
            qr = q[r]
            qc = min(max(qr, x[0]), x[m - 1])
            num = 0.0
            den = 0.0
            hit = False
            for j in range(m):
                if qc == x[j]:
                    v = Y[r, j]
                    hit = True
                    break
                t = w[j] / (qc - x[j])
                num += t * Y[r, j]
                den += t
            if not hit:
                v = num / den
            if linear:
                if qr < x[0]:
                    v += (qr - x[0]) * _bary_deriv(x, w, Y, r, 0, m)
                elif qr > x[m - 1]:
                    v += (qr - x[m - 1]) * _bary_deriv(x, w, Y, r, m - 1, m)
            o[r] = v
    return out


def cheb_eval(double lo, double hi, const double[:, :] C, const double[:] q, bint linear=False):
    cdef Py_ssize_t n = C.shape[0], nc = C.shape[1], r, k
    cdef double qr, s, b1, b2, tmp, v, dlo, dhi, kk, sgn
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for r in range(n):
            qr = q[r]
            s = (2.0 * min(max(qr, lo), hi) - lo - hi) / (hi - lo)
            b1 = 0.0
            b2 = 0.0
            for k in range(nc - 1, 0, -1):
                tmp = b1
                b1 = 2.0 * s * b1 - b2 + C[r, k]
                b2 = tmp
            v = s * b1 - b2 + C[r, 0]
            if linear and (qr < lo or qr > hi):
                dlo = 0.0
                dhi = 0.0
                sgn = 1.0
                for k in range(1, nc):
                    kk = <double>k
                    dhi += C[r, k] * kk * kk
                    dlo += C[r, k] * kk * kk * sgn
                    sgn = -sgn
                if qr < lo:
                    v += (qr - lo) * dlo * 2.0 / (hi - lo)
                else:
                    v += (qr - hi) * dhi * 2.0 / (hi - lo)
            o[r] = v
    return out
