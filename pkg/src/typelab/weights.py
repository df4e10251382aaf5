"""Weights on the real line, the C_0(W) seminorm and constructive weight transforms."""

import math
from dataclasses import dataclass

import numpy as np

from . import trend
from .errors import GridError, ValidationError
from .measures import SpectralMeasure
from .products import k1


@dataclass(frozen=True, eq=False)
class Weight:
    """W: R -> (0, inf].  ``support`` (optional, sorted) makes W infinite off that set.

    ``shift`` stores the power shift t of W_t(x) = W(x)(1+|x|)^{-t}, so
    shifting twice is the same object as shifting once by the sum.
    """

    fn: object
    support: np.ndarray = None
    shift_power: float = 0.0
    name: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        v = np.asarray(self.fn(x), dtype=float) * np.ones(x.shape)
        if self.support is not None:
            i = np.clip(np.searchsorted(self.support, x), 0, max(self.support.size - 1, 0))
            on = (self.support[i] == x) if self.support.size else np.zeros(x.shape, bool)
            v = np.where(on, v, np.inf)
        if self.shift_power != 0.0:
            with np.errstate(invalid="ignore"):
                v = np.where(np.isinf(v), v, v * (1 + np.abs(x)) ** (-self.shift_power))
        return v

    def shift(self, t):
        """W_t(x) = W(x)(1+|x|)^{-t}; (W_t)_s is W_{t+s} exactly."""
        return Weight(self.fn, self.support, self.shift_power + t, self.name)

    def to_dict(self, grid=None):
        if self.support is not None:
            pts = self.support if grid is None else np.intersect1d(self.support, grid)
            return {"grid": pts.tolist(), "values": self(pts).tolist(), "infinity_outside": True}
        grid = np.asarray(grid, dtype=float)
        return {"grid": grid.tolist(), "values": self(grid).tolist(), "infinity_outside": False}

    @classmethod
    def from_dict(cls, d):
        g = np.asarray(d["grid"], dtype=float)
        v = np.asarray([float(str(u).replace("Infinity", "inf")) for u in d["values"]])
        if d.get("infinity_outside"):
            lookup = dict(zip(g.tolist(), v.tolist()))
            fn = lambda x: np.vectorize(lambda u: lookup.get(float(u), np.inf), otypes=[float])(x)
            return cls(fn, g, 0.0, "sampled")
        return cls(lambda x: np.interp(x, g, v), None, 0.0, "sampled")

    @classmethod
    def constant(cls, c=1.0):
        return cls(lambda x: np.full(np.shape(x), float(c)), name=f"const({c})")

    @classmethod
    def power(cls, p, c=1.0):
        return cls(lambda x: c * (1 + np.abs(x)) ** p, name=f"(1+|x|)^{p}")


def growth_check(W, s_grid, windows):
    """Trend of the window minima of (1+|x|)^s W(x); W qualifies if one s makes them grow."""
    windows = np.asarray(windows, dtype=float)
    out = {}
    found = None
    for s in s_grid:
        mins = []
        for lo, hi in zip(windows[:-1], windows[1:]):
            x = np.linspace(lo, hi, 257)
            x = np.concatenate([-x, x])
            mins.append(float(np.min((1 + np.abs(x)) ** s * W(x))))
        t = trend.classify(mins)
        out[s] = t
        if found is None and t.unbounded and t.increments[-1] > 0:
            found = s
    return found, out


@dataclass
class SeminormResult:
    value: float
    argmax: float

    def to_dict(self):
        return {"value": self.value, "argmax": self.argmax}


def c0_seminorm(f, W, grid):
    """sup over the grid of |f|/W with the maximizing point."""
    x = np.asarray(grid, dtype=float)
    w = W(x)
    if np.any(w <= 0) or np.any(np.isnan(w)):
        raise ValidationError("weight must be positive on the grid")
    fx = np.abs(np.asarray(f(x), dtype=float) * np.ones(x.shape))
    with np.errstate(invalid="ignore"):
        r = np.where(np.isinf(w), 0.0, fx / np.where(np.isinf(w), 1.0, w))
    i = int(np.argmax(r))
    return SeminormResult(float(r[i]), float(x[i]))


class _RangeMin:
    """Sparse table for O(1) range minima over fixed samples."""

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        self.levels = [v]
        span = 1
        while 2 * span <= v.size:
            prev = self.levels[-1]
            self.levels.append(np.minimum(prev[:-span], prev[span:]))
            span *= 2

    def query(self, lo, hi):
        """min over indices [lo, hi) (vectorized, requires hi > lo)."""
        length = hi - lo
        k = np.floor(np.log2(length)).astype(int)
        out = np.empty(lo.shape)
        for level in np.unique(k):
            sel = k == level
            tab = self.levels[level]
            out[sel] = np.minimum(tab[lo[sel]], tab[hi[sel] - (1 << level)])
        return out


@dataclass
class TransformedWeight:
    weight: Weight
    grid: np.ndarray
    values: np.ndarray
    l2_trend: object = None

    def to_dict(self):
        d = {"grid": self.grid, "values": self.values}
        if self.l2_trend is not None:
            d["l2_trend"] = self.l2_trend.to_dict()
        return d


def weight_transform(W_tilde, delta, p, grid, mu=None, windows=None, fraction=0.25):
    """W(x) = min[inf over k1 I_x of W~_p, e^{delta|x|/3}] with k1 = 3 e^delta.

    For a discretely supported W~ the infimum is exact (minimum over the
    support points in the window).  Otherwise it is the minimum over grid
    samples in the window, dropping the outermost sample on each side (the
    centre sample is always kept), which over-approximates the infimum.
    """
    if delta <= 0 or p < 0:
        raise ValidationError("need delta > 0 and p >= 0")
    g = np.unique(np.asarray(grid, dtype=float))
    K1 = k1(delta)
    Wp = W_tilde.shift(p)

    if W_tilde.support is not None:
        S = W_tilde.support
        vals_S = Wp(S)
        rm = _RangeMin(vals_S) if S.size else None

        def infimum(x):
            x = np.asarray(x, dtype=float)
            h = K1 * np.exp(-delta * np.abs(x))
            lo = np.searchsorted(S, x - h, side="left")
            hi = np.searchsorted(S, x + h, side="right")
            out = np.full(x.shape, np.inf)
            ok = hi > lo
            if np.any(ok) and rm is not None:
                out[ok] = rm.query(lo[ok], hi[ok])
            return out
    else:
        gap = np.max(np.diff(g)) if g.size > 1 else math.inf
        hmin = K1 * math.exp(-delta * float(np.max(np.abs(g))))
        if gap > fraction * hmin:
            raise GridError(f"grid spacing {gap:.3e} does not resolve k1*I_x (need <= {fraction * hmin:.3e})")
        samples = Wp(g)
        rm = _RangeMin(samples)

        def infimum(x):
            x = np.asarray(x, dtype=float)
            h = K1 * np.exp(-delta * np.abs(x))
            lo = np.searchsorted(g, x - h, side="left") + 1
            hi = np.searchsorted(g, x + h, side="right") - 1
            c = np.clip(np.searchsorted(g, x), 0, g.size - 1)
            lo = np.minimum(lo, c)
            hi = np.maximum(hi, c + 1)
            out = rm.query(lo, hi)
            at = g[c] == x
            return np.where(at, out, np.minimum(out, Wp(x)))

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.minimum(infimum(x), np.exp(delta * np.abs(x) / 3))

    W = Weight(fn, None, 0.0, f"transform(delta={delta}, p={p})")
    values = W(g)
    l2 = None
    if mu is not None:
        windows = trend.geometric_windows(1.0, mu.truncation_radius) if windows is None else windows
        partial = [mu.integrate(lambda x: W(x) ** 2, -R, R) for R in windows]
        l2 = trend.classify(partial)
    return TransformedWeight(W, g, values, l2)


@dataclass
class BakanReport:
    weight: Weight
    checks: dict

    @property
    def holds(self):
        return all(c["holds"] for c in self.checks.values())

    def to_dict(self):
        return {"checks": self.checks, "holds": self.holds}


def bakan_weight(f, approximants, n, K=None, s_values=(), grid=None, residual_claims=None):
    """Truncated series weight built from approximants h_k of f(x)/(x - i).

    W(x)^2 = (1+|x|^n)^{-1} + sum_{k<=K} 4^k |h_k(x) - f(x)/(x-i)|^2 (1+|x|)^{2k}.
    For every s in ``s_values`` and k >= s the seminorm of h_k - f/(x-i) in
    C_0(W_s) is checked against 2^{-k} on the grid.
    """
    K = len(approximants) if K is None else int(K)
    if K == 0 and n < 1:
        raise ValidationError("K = 0 needs n >= 1")
    if K > len(approximants):
        raise ValidationError("fewer approximants than K")
    hs = list(approximants)[:K]

    def residual(k, x):
        x = np.asarray(x, dtype=float)
        return hs[k - 1](x) - f(x) / (x - 1j)

    def fn(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        total = 1.0 / (1 + ax ** n)
        for k in range(1, K + 1):
            total = total + 4.0 ** k * np.abs(residual(k, x)) ** 2 * (1 + ax) ** (2 * k)
        return np.sqrt(total)

    W = Weight(fn, None, 0.0, f"bakan(n={n}, K={K})")
    checks = {}
    if s_values:
        if grid is None:
            raise ValidationError("seminorm checks need a grid")
        x = np.asarray(grid, dtype=float)
        for s in s_values:
            Ws = W.shift(s)
            for k in range(max(1, math.ceil(s)), K + 1):
                r = c0_seminorm(lambda u, k=k: np.abs(residual(k, u)), Ws, x)
                checks[f"s={s},k={k}"] = {"seminorm": r.value, "bound": 2.0 ** -k,
                                          "holds": bool(r.value <= 2.0 ** -k),
                                          "claim": None if residual_claims is None
                                          else residual_claims.get(k)}
    return BakanReport(W, checks)


def l2_partial_norms(W, mu: SpectralMeasure, windows):
    return [mu.integrate(lambda x: W(x) ** 2, -R, R) for R in windows]
