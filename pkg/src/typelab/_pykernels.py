"""Pure numpy implementations of the compiled kernels.

Signatures and return conventions match ``_ckernels`` exactly.  Summation
uses ``math.fsum`` where the compiled code uses compensated summation, so the
two backends agree to rounding (checked in the test suite at 1e-12).
"""

import math

import numpy as np


def _fsum_rows(a):
    return np.array([math.fsum(row) for row in a]) if a.shape[1] else np.zeros(a.shape[0])


def log_factor_sum(z2, zeros):
    z2 = np.asarray(z2, dtype=float)
    zeros = np.asarray(zeros, dtype=float)
    n, m = z2.size, zeros.size
    out_log = np.zeros(n)
    out_neg = np.zeros(n, dtype=np.int64)
    out_hit = np.full(n, -1, dtype=np.int64)
    if m == 0 or n == 0:
        return out_log, out_neg, out_hit
    x2 = zeros * zeros
    for i in range(n):
        r = z2[i] / x2
        hit = np.flatnonzero(r == 1.0)
        if hit.size:
            k = int(hit[0])
            out_hit[i] = k
            r = r[:k]
        below = r < 1.0
        terms = np.where(below, np.log1p(-np.where(below, r, 0.0)),
                         np.log(np.where(below, 2.0, r) - 1.0))
        out_log[i] = math.fsum(terms)
        out_neg[i] = int(np.count_nonzero(~below))
    return out_log, out_neg, out_hit


def log_factor_sum_complex(z2re, z2im, zeros):
    z2re = np.asarray(z2re, dtype=float)
    z2im = np.asarray(z2im, dtype=float)
    zeros = np.asarray(zeros, dtype=float)
    n = z2re.size
    out_log = np.zeros(n)
    out_arg = np.zeros(n)
    out_hit = np.full(n, -1, dtype=np.int64)
    x2 = zeros * zeros
    for i in range(n):
        tr = z2re[i] / x2
        ti = z2im[i] / x2
        hit = np.flatnonzero((tr == 1.0) & (ti == 0.0))
        if hit.size:
            k = int(hit[0])
            out_hit[i] = k
            tr, ti = tr[:k], ti[:k]
        out_log[i] = math.fsum(0.5 * np.log1p(-2.0 * tr + tr * tr + ti * ti))
        out_arg[i] = math.fsum(np.arctan2(-ti, 1.0 - tr))
    return out_log, out_arg, out_hit


def derivative_log_sums(zeros, block=512):
    zeros = np.asarray(zeros, dtype=float)
    m = zeros.size
    out_log = np.zeros(m)
    out_neg = np.zeros(m, dtype=np.int64)
    x2 = zeros * zeros
    for start in range(0, m, block):
        stop = min(start + block, m)
        r = x2[start:stop, None] / x2[None, :]
        idx = np.arange(start, stop)
        r[idx - start, idx] = 0.0  # log1p(0) = 0 removes the k == j factor
        below = r < 1.0
        terms = np.where(below, np.log1p(-np.where(below, r, 0.0)),
                         np.log(np.where(below, 2.0, r) - 1.0))
        out_log[start:stop] = _fsum_rows(terms)
        out_neg[start:stop] = np.count_nonzero(~below, axis=1)
    return out_log, out_neg


def _lagrange_weights(s, order):
    w = np.ones((s.size, order))
    for i in range(order):
        for l in range(order):
            if l != i:
                w[:, i] *= (s - l) / (i - l)
    return w


def lattice_convolution(t, pos, base, shift, mass, table, x0, h, cutoff, order):
    t = np.asarray(t, dtype=float)
    pos = np.asarray(pos, dtype=float)
    table = np.asarray(table, dtype=float)
    out = np.zeros(t.size)
    out_abs = np.zeros(t.size)
    lo_all = np.searchsorted(pos, t - cutoff, side="right")
    hi_all = np.searchsorted(pos, t + cutoff, side="left")
    for i, ti in enumerate(t):
        lo, hi = lo_all[i], hi_all[i]
        u = (ti - base[lo:hi]) - shift[lo:hi]
        rel = u / h
        fl = np.floor(rel)
        j0 = fl.astype(np.int64) + int(math.floor(-x0 / h + 0.5)) - order // 2 + 1
        s = (rel - fl) + (order // 2 - 1)
        ok = (j0 >= 0) & (j0 + order <= table.size)
        vals = np.zeros(u.size)
        if ok.any():
            w = _lagrange_weights(s[ok], order)
            cols = j0[ok, None] + np.arange(order)[None, :]
            vals[ok] = np.sum(w * table[cols], axis=1)
        terms = mass[lo:hi] * vals
        out[i] = math.fsum(terms)
        out_abs[i] = float(np.sum(np.abs(terms)))
    return out, out_abs


def rk4_interaction(lam, x, nsub, qoff, qstage, hbc):
    lam = np.asarray(lam, dtype=complex)
    x = np.asarray(x, dtype=float)
    m, n = lam.size, x.size
    U = np.zeros((m, n), dtype=complex)
    V = np.zeros((m, n), dtype=complex)
    u = np.ones(m, dtype=complex)
    v = np.full(m, hbc, dtype=complex)
    U[:, 0] = u
    V[:, 0] = v
    zero = lam == 0

    def cs_sn(xs):
        z = lam * xs
        cs = np.cos(z)
        with np.errstate(invalid="ignore", divide="ignore"):
            sn = np.where(zero, xs, np.sin(z) / np.where(zero, 1.0, lam))
        return cs, sn

    def rhs(xs, q, uu, vv):
        cs, sn = cs_sn(xs)
        om = uu * cs + vv * sn
        return -sn * q * om, cs * q * om

    for i in range(n - 1):
        hh = (x[i + 1] - x[i]) / nsub[i]
        b = qoff[i]
        for s in range(nsub[i]):
            q0, q1, q2 = qstage[b + 2 * s], qstage[b + 2 * s + 1], qstage[b + 2 * s + 2]
            if q0 == 0.0 and q1 == 0.0 and q2 == 0.0:
                continue
            xs = x[i] + s * hh
            k1u, k1v = rhs(xs, q0, u, v)
            k2u, k2v = rhs(xs + 0.5 * hh, q1, u + 0.5 * hh * k1u, v + 0.5 * hh * k1v)
            k3u, k3v = rhs(xs + 0.5 * hh, q1, u + 0.5 * hh * k2u, v + 0.5 * hh * k2v)
            k4u, k4v = rhs(xs + hh, q2, u + hh * k3u, v + hh * k3v)
            u = u + hh * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
            v = v + hh * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
        U[:, i + 1] = u
        V[:, i + 1] = v
    return U, V
