# cython: language_level=3
"""Compiled inner loops.

Every function here has a numpy twin in ``_pykernels`` with the same
signature; ``typelab.kernels`` picks one at import time.
"""

import numpy as np

cimport cython
from libc.math cimport atan2, fabs, floor, log, log1p, sqrt

cdef extern from "complex.h" nogil:
    double complex ccos(double complex)
    double complex csin(double complex)


cdef inline void _acc(double* s, double* c, double x) noexcept nogil:
    # Neumaier compensated accumulation
    cdef double t = s[0] + x
    if fabs(s[0]) >= fabs(x):
        c[0] += (s[0] - t) + x
    else:
        c[0] += (x - t) + s[0]
    s[0] = t


def log_factor_sum(const double[::1] z2, const double[::1] zeros):
    """Return (sum log|1 - z2/x_k^2|, count of negative factors, hit index)."""
    cdef Py_ssize_t n = z2.shape[0], m = zeros.shape[0], i, k
    out_log = np.zeros(n)
    out_neg = np.zeros(n, dtype=np.int64)
    out_hit = np.full(n, -1, dtype=np.int64)
    cdef double[::1] lg = out_log
    cdef long long[::1] ng = out_neg
    cdef long long[::1] ht = out_hit
    cdef double s, c, r, x
    cdef long long neg
    with nogil:
        for i in range(n):
            s = 0.0
            c = 0.0
            neg = 0
            for k in range(m):
                x = zeros[k]
                r = z2[i] / (x * x)
                if r == 1.0:
                    ht[i] = k
                    break
                if r < 1.0:
                    _acc(&s, &c, log1p(-r))
                else:
                    _acc(&s, &c, log(r - 1.0))
                    neg += 1
            lg[i] = s + c
            ng[i] = neg
    return out_log, out_neg, out_hit


def log_factor_sum_complex(const double[::1] z2re, const double[::1] z2im, const double[::1] zeros):
    """Return (sum log|1 - z^2/x_k^2|, sum arg(1 - z^2/x_k^2), hit index)."""
    cdef Py_ssize_t n = z2re.shape[0], m = zeros.shape[0], i, k
    out_log = np.zeros(n)
    out_arg = np.zeros(n)
    out_hit = np.full(n, -1, dtype=np.int64)
    cdef double[::1] lg = out_log
    cdef double[::1] ag = out_arg
    cdef long long[::1] ht = out_hit
    cdef double s, c, sa, ca, tr, ti, x2
    with nogil:
        for i in range(n):
            s = 0.0
            c = 0.0
            sa = 0.0
            ca = 0.0
            for k in range(m):
                x2 = zeros[k] * zeros[k]
                tr = z2re[i] / x2
                ti = z2im[i] / x2
                if tr == 1.0 and ti == 0.0:
                    ht[i] = k
                    break
                # |1 - t|^2 = 1 - 2 Re t + |t|^2
                _acc(&s, &c, 0.5 * log1p(-2.0 * tr + tr * tr + ti * ti))
                _acc(&sa, &ca, atan2(-ti, 1.0 - tr))
            lg[i] = s + c
            ag[i] = sa + ca
    return out_log, out_arg, out_hit


def derivative_log_sums(const double[::1] zeros):
    """For each stored zero x_j: sum over k != j of log|1 - x_j^2/x_k^2| and sign count."""
    cdef Py_ssize_t m = zeros.shape[0], j, k
    out_log = np.zeros(m)
    out_neg = np.zeros(m, dtype=np.int64)
    cdef double[::1] lg = out_log
    cdef long long[::1] ng = out_neg
    cdef double s, c, r, xj2, x
    cdef long long neg
    with nogil:
        for j in range(m):
            xj2 = zeros[j] * zeros[j]
            s = 0.0
            c = 0.0
            neg = 0
            for k in range(m):
                if k == j:
                    continue
                x = zeros[k]
                r = xj2 / (x * x)
                if r < 1.0:
                    _acc(&s, &c, log1p(-r))
                else:
                    _acc(&s, &c, log(r - 1.0))
                    neg += 1
            lg[j] = s + c
            ng[j] = neg
    return out_log, out_neg


cdef inline double _lagrange(const double[::1] table, double x0, double h, int order,
                             double u) noexcept nogil:
    # x0 is a whole number of steps; splitting u/h keeps the fractional offset exact.
    cdef double rel = u / h
    cdef double fl = floor(rel)
    cdef Py_ssize_t j0 = <Py_ssize_t>fl + <Py_ssize_t>floor(-x0 / h + 0.5) - order // 2 + 1
    cdef Py_ssize_t i, l
    cdef double s = (rel - fl) + (order // 2 - 1), total = 0.0, w
    if j0 < 0 or j0 + order > table.shape[0]:
        return 0.0
    for i in range(order):
        w = 1.0
        for l in range(order):
            if l != i:
                w *= (s - l) / (i - l)
        total += w * table[j0 + i]
    return total


def lattice_convolution(const double[::1] t, const double[::1] pos, const double[::1] base,
                        const double[::1] shift, const double[::1] mass, const double[::1] table,
                        double x0, double h, double cutoff, int order):
    """Sum_k mass_k * phi(t - pos_k) over atoms with |t - pos_k| < cutoff.

    The offset is formed as (t - base_k) - shift_k so that pos_k never has to
    be subtracted from t directly.  Returns the sums and the sums of absolute
    terms (used as a rounding-floor estimate).
    """
    cdef Py_ssize_t n = t.shape[0], m = pos.shape[0], i, k, lo, hi, mid
    out = np.zeros(n)
    out_abs = np.zeros(n)
    cdef double[::1] o = out
    cdef double[::1] oa = out_abs
    cdef double s, c, sa, term, u, left
    with nogil:
        for i in range(n):
            left = t[i] - cutoff
            lo = 0
            hi = m
            while lo < hi:
                mid = (lo + hi) // 2
                if pos[mid] <= left:
                    lo = mid + 1
                else:
                    hi = mid
            s = 0.0
            c = 0.0
            sa = 0.0
            k = lo
            while k < m and pos[k] < t[i] + cutoff:
                u = (t[i] - base[k]) - shift[k]
                term = mass[k] * _lagrange(table, x0, h, order, u)
                _acc(&s, &c, term)
                sa += fabs(term)
                k += 1
            o[i] = s + c
            oa[i] = sa
    return out, out_abs


cdef inline void _rhs(double complex lam, double x, double q, double complex u,
                      double complex v, double complex* du,
                      double complex* dv) noexcept nogil:
    cdef double complex cs, sn, om
    if q == 0.0:
        du[0] = 0.0
        dv[0] = 0.0
        return
    cs = ccos(lam * x)
    if lam == 0.0:
        sn = x
    else:
        sn = csin(lam * x) / lam
    om = u * cs + v * sn
    du[0] = -sn * q * om
    dv[0] = cs * q * om


def rk4_interaction(const double complex[::1] lam, const double[::1] x, const long long[::1] nsub,
                    const long long[::1] qoff, const double[::1] qstage, double hbc):
    """Integrate the variation-of-constants system for omega(lam, x).

    omega = u cos(lam x) + v sin(lam x)/lam with u(0)=1, v(0)=hbc.  Interval i
    (x[i] to x[i+1]) is split into nsub[i] classical RK4 steps; the potential at
    the 2*nsub[i]+1 stage points of that interval starts at qstage[qoff[i]].
    Steps whose three stage values of q vanish are skipped (exact).
    """
    cdef Py_ssize_t m = lam.shape[0], n = x.shape[0], a, i, s, base
    U = np.zeros((m, n), dtype=np.complex128)
    V = np.zeros((m, n), dtype=np.complex128)
    cdef double complex[:, ::1] Uv = U
    cdef double complex[:, ::1] Vv = V
    cdef double complex u, v, k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v, L
    cdef double hh, xs, q0, q1, q2
    with nogil:
        for a in range(m):
            L = lam[a]
            u = 1.0
            v = hbc
            Uv[a, 0] = u
            Vv[a, 0] = v
            for i in range(n - 1):
                hh = (x[i + 1] - x[i]) / nsub[i]
                base = qoff[i]
                for s in range(nsub[i]):
                    q0 = qstage[base + 2 * s]
                    q1 = qstage[base + 2 * s + 1]
                    q2 = qstage[base + 2 * s + 2]
                    if q0 == 0.0 and q1 == 0.0 and q2 == 0.0:
                        continue
                    xs = x[i] + s * hh
                    _rhs(L, xs, q0, u, v, &k1u, &k1v)
                    _rhs(L, xs + 0.5 * hh, q1, u + 0.5 * hh * k1u,
                         v + 0.5 * hh * k1v, &k2u, &k2v)
                    _rhs(L, xs + 0.5 * hh, q1, u + 0.5 * hh * k2u,
                         v + 0.5 * hh * k2v, &k3u, &k3v)
                    _rhs(L, xs + hh, q2, u + hh * k3u, v + hh * k3v, &k4u, &k4v)
                    u = u + hh * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
                    v = v + hh * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
                Uv[a, i + 1] = u
                Vv[a, i + 1] = v
    return U, V
