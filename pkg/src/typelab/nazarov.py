"""Distorted-lattice measures sum_k X'(ck) delta_{X(ck)} and their Poisson-type tests.

For an odd diffeomorphism X with X' -> 1 and decaying higher derivatives,
mu * phi - phi_hat(0)/c decays faster than any power for Schwartz windows
phi whose Fourier transform is supported in (-2 pi/c, 2 pi/c).  This module
builds such measures and windows, checks the class conditions numerically,
fits the decay, and issues the counting-based stable-orthogonality
certificate.

Fourier convention: phi_hat(l) = int phi(x) e^{-i l x} dx, so
phi(x) = (1/2pi) int phi_hat(l) e^{i l x} dl and the lattice identity reads
sum_k phi(t - ck) = phi_hat(0)/c.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

from . import defaults, kernels, trend
from .errors import ValidationError
from .measures import SpectralMeasure
from .products import krein_exclusion
from .report import Certificate

FAMILIES = ("identity", "arctan_shift", "arcsinh_shift")


def _arcsinh_derivs(t, k):
    s = 1.0 + t * t
    if k == 1:
        return s ** -0.5
    if k == 2:
        return -t * s ** -1.5
    if k == 3:
        return (2 * t * t - 1) * s ** -2.5
    if k == 4:
        return (9 * t - 6 * t ** 3) * s ** -3.5
    raise ValueError


def _arctan_derivs(t, k):
    s = 1.0 + t * t
    if k == 1:
        return 1.0 / s
    if k == 2:
        return -2 * t / s ** 2
    if k == 3:
        return (6 * t * t - 2) / s ** 3
    if k == 4:
        return (24 * t - 24 * t ** 3) / s ** 4
    raise ValueError


@dataclass(frozen=True)
class GammaDiffeo:
    """X(t) = t + beta * g(t) with g in {0, arctan, arcsinh}, or a user callable.

    ``shift(t)`` returns X(t) - t in closed form so that lattice offsets never
    suffer cancellation.  Derivatives of order <= 4 are closed form for the
    built-in families; higher orders use nested central differences.
    """

    family: str = "identity"
    beta: float = 0.0
    fn: object = None
    dfn: object = None

    def __post_init__(self):
        if self.fn is None:
            if self.family not in FAMILIES:
                raise ValidationError(f"unknown family {self.family!r}")
            # X' = 1 + beta g' with 0 < g' <= 1, so beta > -1 is exactly monotonicity
            if self.family != "identity" and not self.beta > -1:
                raise ValidationError(f"{self.family} needs beta > -1")

    @classmethod
    def identity(cls):
        return cls("identity", 0.0)

    @classmethod
    def arctan_shift(cls, beta):
        return cls("arctan_shift", float(beta))

    @classmethod
    def arcsinh_shift(cls, beta):
        return cls("arcsinh_shift", float(beta))

    @classmethod
    def custom(cls, fn, dfn, name="custom"):
        return cls(name, 0.0, fn, dfn)

    def shift(self, t):
        t = np.asarray(t, dtype=float)
        if self.fn is not None:
            return self.fn(t) - t
        if self.family == "identity":
            return np.zeros_like(t)
        g = np.arctan if self.family == "arctan_shift" else np.arcsinh
        return self.beta * g(t)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.fn is not None:
            return self.fn(t)
        return t + self.shift(t)

    def derivative(self, t, k=1):
        t = np.asarray(t, dtype=float)
        if k == 0:
            return self(t)
        if self.fn is not None:
            if k == 1:
                return self.dfn(t)
            return _nested_difference(self.dfn, t, k - 1)
        if self.family == "identity":
            return np.ones_like(t) if k == 1 else np.zeros_like(t)
        table = _arctan_derivs if self.family == "arctan_shift" else _arcsinh_derivs
        if k <= 4:
            v = self.beta * table(t, k)
            return 1.0 + v if k == 1 else v
        return _nested_difference(lambda u: self.beta * table(u, 4), t, k - 4)

    def inverse(self, x, iterations=80):
        """Y = X^{-1} by bracketing bisection and two Newton polishing steps."""
        x = np.asarray(x, dtype=float)
        lo = x - 1.0
        hi = x + 1.0
        for _ in range(200):
            move = self(lo) > x
            if not np.any(move):
                break
            lo = np.where(move, x - 2 * (x - lo), lo)
        for _ in range(200):
            move = self(hi) < x
            if not np.any(move):
                break
            hi = np.where(move, x + 2 * (hi - x), hi)
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            below = self(mid) < x
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        y = 0.5 * (lo + hi)
        for _ in range(2):
            y = y - (self(y) - x) / self.derivative(y, 1)
        return y

    def rescaled(self, c):
        """t -> X(ct)/c, which turns X(cZ) into a unit-spacing lattice up to the factor c."""
        return GammaDiffeo.custom(lambda t: self(c * t) / c,
                                  lambda t: self.derivative(c * t, 1),
                                  f"{self.family}(c={c})")

    def to_dict(self):
        return {"family": self.family, "beta": self.beta}

    @classmethod
    def from_dict(cls, d):
        if d.get("family", "identity") not in FAMILIES:
            raise ValidationError(f"unknown family {d.get('family')!r}")
        return cls(d.get("family", "identity"), float(d.get("beta", 0.0)))


def _nested_difference(fn, t, order, h=1e-2):
    """order-th derivative of fn by repeated central differences with step h*max(1,|t|)."""
    step = h * np.maximum(1.0, np.abs(t))
    if order == 0:
        return fn(t)
    return (_nested_difference(fn, t + step, order - 1, h)
            - _nested_difference(fn, t - step, order - 1, h)) / (2 * step)


# -- class check -------------------------------------------------------------

def gamma_check(X, t_grid=None, k_max=4, windows=None):
    """Certificate: X' -> 1 (window-sup trend) and fitted decay exponents of |X^(k)|."""
    t = np.geomspace(1.0, 1e3, 400) if t_grid is None else np.asarray(t_grid, dtype=float)
    full = np.sort(np.concatenate([-t, t]))
    xv = X(full)
    if np.any(np.diff(xv) <= 0):
        raise ValidationError("X is not strictly increasing on the grid")
    pos = np.sort(t[t > 0])
    edges = trend.geometric_windows(pos[0], pos[-1]) if windows is None else np.asarray(windows)
    err = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (pos >= lo) & (pos <= hi)
        err.append(float(np.max(np.abs(X.derivative(pos[sel], 1) - 1.0))) if np.any(sel) else 0.0)
    t1 = trend.classify(err)
    tends_to_one = t1.verdict == trend.CONVERGED and (err[-1] <= 0.1 * max(err[0], 1e-300)
                                                      or err[-1] <= 1e-12)
    exps = {}
    fit_t = pos[pos >= 10.0] if np.count_nonzero(pos >= 10.0) >= 4 else pos
    for k in range(2, k_max + 1):
        v = np.abs(X.derivative(fit_t, k))
        nz = v > 0
        if not np.any(nz):
            exps[k] = math.inf
        elif np.count_nonzero(nz) < 4:
            exps[k] = float("nan")
        else:
            # envelope: fit the running maximum from the right so oscillation zeros do not bias it
            env = np.maximum.accumulate(v[::-1])[::-1]
            exps[k] = -trend.loglog_slope(fit_t, env)
    vals = [exps[k] for k in sorted(exps)]
    positive = all(v > 0 for v in vals)
    increasing = all(b > a or (math.isinf(a) and math.isinf(b)) for a, b in zip(vals[:-1], vals[1:]))
    verdict = "holds" if tends_to_one and positive and increasing else "fails"
    return Certificate("gamma-class", "gamma-class-diffeomorphism", verdict, None, "exact",
                       {"k_max": k_max, **X.to_dict()},
                       {"derivative_error_windows": err, "windows": edges.tolist(),
                        "trend": t1.to_dict(), "tends_to_one": tends_to_one,
                        "decay_exponents": {str(k): v for k, v in exps.items()}},
                       float(pos[-1]))


# -- measures ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DistortedLattice(SpectralMeasure):
    """A SpectralMeasure that remembers its lattice decomposition position = base + shift."""

    lattice_base: np.ndarray = None
    lattice_shift: np.ndarray = None
    c: float = 1.0
    diffeo: GammaDiffeo = None


def build_measure(X, c, K):
    """Atoms at X(ck) with masses X'(ck), |k| <= K."""
    if c <= 0 or K < 0:
        raise ValidationError("need c > 0 and K >= 0")
    k = np.arange(-K, K + 1, dtype=float)
    base = c * k
    shift = X.shift(base)
    pos = base + shift
    mass = X.derivative(base, 1)
    if np.any(mass <= 0):
        raise ValidationError("X' must be positive")
    symmetric = bool(np.array_equal(pos, -pos[::-1]) and np.array_equal(mass, mass[::-1]))
    return DistortedLattice(positions=pos, masses=mass, symmetric=symmetric,
                            lattice_base=base, lattice_shift=shift, c=float(c), diffeo=X)


# -- windows -----------------------------------------------------------------

def ramp(u):
    """C-infinity ramp: 0 for u <= 0, 1 for u >= 1, built from e^{-1/x}."""
    u = np.asarray(u, dtype=float)
    g = lambda v: np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)
    gu, g1 = g(u), g(1 - u)
    s = gu + g1
    return np.where(u >= 1, 1.0, np.where(u <= 0, 0.0, gu / np.where(s > 0, s, 1.0)))


@lru_cache(maxsize=8)
def _phi_table(a, b, points, period):
    N, P = int(points), float(period)
    h = P / N
    dl = 2 * np.pi / P
    lam = np.fft.fftfreq(N, d=1.0 / (N * dl))
    spec = ramp((b - np.abs(lam)) / (b - a))
    # phi(x_j) = (1/2pi) sum_l phi_hat(l) e^{i l x_j} dl  on x_j = j h (periodized with period P).
    # Extended precision keeps the transform's own rounding well below the double epsilon.
    wide = scipy.fft.ifft(spec.astype(np.longdouble)).real
    phi = (wide * np.longdouble(N * dl / (2 * np.pi))).astype(float)
    x = np.fft.fftfreq(N, d=1.0 / (N * h))
    order = np.argsort(x)
    x, phi = x[order], phi[order]
    phi = 0.5 * (phi + phi[::-1][np.r_[-1, 0:N - 1]])  # symmetrize: x_j <-> -x_j
    phi.setflags(write=False)
    return float(x[0]), h, phi


@dataclass(frozen=True)
class SchwartzWindow:
    """phi_hat = 1 on (-a, a), smooth ramp to 0 at |l| = b; phi tabulated once by FFT."""

    a: float
    b: float
    c: float = 1.0
    points: int = field(default_factory=lambda: defaults.get("nazarov", "table_points"))
    period: float = field(default_factory=lambda: defaults.get("nazarov", "table_period"))

    def __post_init__(self):
        if not (0 < self.a < self.b):
            raise ValidationError("need 0 < a < b")
        if not self.b < 2 * math.pi / self.c:
            raise ValidationError(f"outer radius b = {self.b} must be below 2*pi/c")

    def phi_hat(self, lam):
        return ramp((self.b - np.abs(np.asarray(lam, dtype=float))) / (self.b - self.a))

    def table(self):
        return _phi_table(float(self.a), float(self.b), int(self.points), float(self.period))

    def phi(self, x):
        x0, h, tab = self.table()
        order = defaults.get("nazarov", "interp_order")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out, _ = kernels.lattice_convolution(x, np.zeros(1), np.zeros(1), np.zeros(1),
                                             np.ones(1), tab, x0, h, float("inf"), order)
        return out

    def to_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c}


# -- decay test --------------------------------------------------------------

@dataclass
class DecayReport:
    t: np.ndarray
    D: np.ndarray
    abs_sum: np.ndarray
    floor: np.ndarray
    fitted: np.ndarray
    slope: float
    verdict: str
    max_abs: float
    params: dict

    def rows(self):
        return [(float(t), float(d), float(abs(d))) for t, d in zip(self.t, self.D)]

    def to_dict(self):
        return {"slope": self.slope, "verdict": self.verdict, "max_abs": self.max_abs,
                "params": self.params, "t": self.t, "D": self.D,
                "below_floor": (~self.fitted & self.floor).tolist()}


def convolve(mu, window, t):
    """(mu * phi)(t) and the sum of absolute terms, by 8-point interpolation in the phi table."""
    cfg = defaults.get("nazarov")
    x0, h, tab = window.table()
    if isinstance(mu, DistortedLattice) and mu.lattice_base is not None:
        base, shift = mu.lattice_base, mu.lattice_shift
    else:
        base, shift = mu.positions, np.zeros(mu.positions.size)
    t = np.ascontiguousarray(np.atleast_1d(np.asarray(t, dtype=float)))
    return kernels.lattice_convolution(t, mu.positions, np.ascontiguousarray(base),
                                       np.ascontiguousarray(shift), mu.masses, tab, x0, h,
                                       float(cfg["cutoff"]), int(cfg["interp_order"]))


def poisson_decay_test(mu, window, t_grid, c=None, fit_range=None, n_target=None):
    """D(t) = (mu * phi)(t) - phi_hat(0)/c with a log-log decay fit.

    Samples with |D| below the rounding floor 64 eps sum|terms| are reported
    and excluded from the fit.  Verdict ``superpolynomial-consistent`` when the
    fitted slope is <= -n_target; when every fitting sample sits at the floor
    the verdict is ``exact to rounding``.
    """
    cfg = defaults.get("nazarov")
    c = getattr(mu, "c", 1.0) if c is None else c
    if window.b >= 2 * math.pi / c:
        raise ValidationError("window outer radius must be below 2*pi/c")
    lo, hi = cfg["fit_range"] if fit_range is None else fit_range
    n_target = cfg["n_target"] if n_target is None else n_target
    t = np.asarray(t_grid, dtype=float)
    reach = float(np.max(np.abs(t))) + cfg["cutoff"]
    if mu.positions.size == 0 or mu.positions[-1] < reach or mu.positions[0] > -reach:
        raise ValidationError(f"atoms must cover |x| <= {reach} (t range plus the phi cutoff)")
    conv, abs_sum = convolve(mu, window, t)
    D = conv - float(window.phi_hat(0.0)) / c
    eps = np.finfo(float).eps
    floor = np.abs(D) <= cfg["floor_factor"] * eps * np.maximum(abs_sum, 1.0)
    in_range = (np.abs(t) >= lo) & (np.abs(t) <= hi)
    fitted = in_range & ~floor
    slope = float("nan")
    if np.count_nonzero(fitted) >= cfg["min_fit_points"]:
        slope = trend.loglog_slope(np.abs(t[fitted]), D[fitted])
        verdict = "superpolynomial-consistent" if slope <= -n_target else "not shown"
    elif np.any(in_range) and np.all(floor[in_range]):
        verdict = "exact to rounding"
    else:
        verdict = "inconclusive"
    params = {"window": window.to_dict(), "c": c, "fit_range": [lo, hi], "n_target": n_target}
    return DecayReport(t, D, abs_sum, floor, fitted, slope, verdict,
                       float(np.max(np.abs(D))) if D.size else 0.0, params)


# -- stable orthogonality ----------------------------------------------------

def stable_orthogonality_certificate(X, c, R_max, A_list, windows=None):
    """X(t) - t -> +inf (window trend) plus the Krein-zero exclusion test on X(c Z)."""
    edges = trend.geometric_windows(R_max / 4 ** 6, R_max) if windows is None else np.asarray(windows)
    growth = X.shift(edges)
    t1 = trend.classify(growth)
    nazarov2 = t1.unbounded and t1.increments[-1] > 0
    K = int(math.ceil(float(X.inverse(np.array([R_max]))[0]) / c)) + 2
    lam = X(c * np.arange(-K, K + 1, dtype=float))
    excl = krein_exclusion(lam, c, A_list, R_max, windows=windows)
    ok = nazarov2 and excl.verdict == "holds"
    if t1.verdict == trend.INCONCLUSIVE or excl.verdict == "inconclusive":
        verdict = "inconclusive"
    else:
        verdict = "holds" if ok else "fails"
    return Certificate(
        "stable-orthogonality", "distorted-lattice-stable-orthogonality", verdict, None, "exact",
        {"c": c, "R_max": R_max, "A_list": list(A_list), **X.to_dict()},
        {"shift_windows": edges.tolist(), "shift_values": growth.tolist(),
         "shift_trend": t1.to_dict(), "shift_unbounded": nazarov2,
         "exclusion": excl.to_dict()},
        float(R_max))
