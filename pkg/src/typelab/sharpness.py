"""Counterexample constructions showing the proximity and log-integral conditions are sharp.

Part (i) builds a convex f = sum_n max(l_n, 0) from linear pieces l_n with
l_n(a) = gamma e^a, l_n(b) = gamma e^b, and the weights phi = e^{-f(log+|x|)},
psi = phi + e^{-eps(|x|)|x|}.  Part (ii) builds the interval family I_k and
the perturbed-lattice node sets whose pairing distance is below
e^{-eps(|x|)|x|}.

Everything that can overflow (e^a, y_k) is kept in logarithmic form: steps
store a, b and gamma, intervals store log y_k, and weights expose
log(log(1/w(e^t))).
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import defaults, quadrature, trend
from .errors import InfeasibleError, ValidationError
from .products import TestFunction, annihilation_residual, build_lq7

E = math.e


# -- rates -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EpsilonRate:
    """A nonincreasing positive eps(r) -> 0.

    ``log_fn(t)`` evaluates eps(e^t) without forming e^t; it defaults to
    fn(exp(t)).  For nonincreasing eps the supremum over t >= a of eps(e^t)
    is eps(e^a).
    """

    fn: object
    log_fn: object = None
    name: str = ""

    def __call__(self, r):
        return self.fn(np.asarray(r, dtype=float))

    def at_log(self, t):
        t = np.asarray(t, dtype=float)
        if self.log_fn is not None:
            return self.log_fn(t)
        with np.errstate(over="ignore"):
            return self.fn(np.exp(t))

    def sup_from_log(self, a):
        return float(self.at_log(a))

    def sup_from(self, y):
        return float(self(y))

    def check_monotone(self, log_grid=None):
        t = np.linspace(0.0, 700.0, 2801) if log_grid is None else np.asarray(log_grid, dtype=float)
        v = self.at_log(t)
        # values may underflow to 0 far out; negative, nan or increasing values are rejected
        if not v[0] > 0 or not np.all(v >= 0) or np.any(np.diff(v) > 0):
            raise ValidationError(f"eps {self.name!r} is not positive and nonincreasing on the grid")
        return True

    @classmethod
    def inverse_log(cls):
        """eps(r) = 1/log(e + r)."""
        return cls(lambda r: 1.0 / np.log(E + r),
                   lambda t: 1.0 / np.logaddexp(1.0, t), "1/log(e+r)")

    @classmethod
    def power(cls, p):
        """eps(r) = (1 + r)^{-p}."""
        return cls(lambda r: (1.0 + r) ** -p,
                   lambda t: np.exp(-p * np.logaddexp(0.0, t)), f"(1+r)^-{p}")


# -- part (i) ----------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    """f_n = max(l_n, 0) with l_n(a) = gamma e^a, l_n(b) = gamma e^b."""

    n: int
    a: float
    b: float
    gamma: float

    @property
    def length(self):
        return self.b - self.a

    @property
    def growth(self):
        """(e^{b-a} - 1)/(b-a), the slope of l_n in units of gamma e^a."""
        return math.expm1(self.length) / self.length

    @property
    def log_slope(self):
        return math.log(self.gamma) + self.a + math.log(self.growth)

    @property
    def start(self):
        """Root of l_n: a - 1/growth."""
        return self.a - 1.0 / self.growth

    def log_value(self, t):
        """log f_n(t); -inf where f_n vanishes."""
        t = np.asarray(t, dtype=float)
        u = 1.0 + self.growth * (t - self.a)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(u > 0, math.log(self.gamma) + self.a + np.log(np.where(u > 0, u, 1.0)),
                            -np.inf)

    def scaled_integrand(self, u):
        """f_n(a + u) e^{-(a + u)} = gamma (1 + m u) e^{-u} on the support."""
        u = np.asarray(u, dtype=float)
        return np.where(1 + self.growth * u > 0, self.gamma * (1 + self.growth * u) * np.exp(-u), 0.0)

    def closed_forms(self):
        g, m, L = self.gamma, self.growth, self.length
        inside = g * (-math.expm1(-L) + m * (1 - (1 + L) * math.exp(-L)))
        left = g * (m * math.exp(1.0 / m) - (1 + m))
        right = g * (1 + m + m * L) * math.exp(-L)
        lower = g * m * (1 - 2 / E)
        return inside, left, right, lower

    def feasible(self):
        """Both defining inequalities, re-evaluated exactly as stored."""
        return (self.length * self.gamma < 2.0 ** -self.n
                and self.growth * self.gamma >= 10.0
                and self.length > 1.0)

    def to_dict(self):
        return {"n": self.n, "a": self.a, "b": self.b, "gamma": self.gamma}


@dataclass
class PiecewiseConvexF:
    steps: list = field(default_factory=list)

    def __post_init__(self):
        slopes = [s.log_slope for s in self.steps]
        if any(b <= a for a, b in zip(slopes[:-1], slopes[1:])):
            raise ValidationError("step slopes must increase")
        for s in self.steps:
            if not s.feasible():
                raise ValidationError(f"step {s.n} violates its defining inequalities")

    def log_value(self, t):
        """log f(t) = logsumexp_n log f_n(t)."""
        t = np.asarray(t, dtype=float)
        if not self.steps:
            return np.full(t.shape, -np.inf)
        parts = np.stack([s.log_value(t) for s in self.steps])
        top = np.max(parts, axis=0)
        safe = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            total = safe + np.log(np.sum(np.exp(parts - safe), axis=0))
        return np.where(np.isfinite(top), total, -np.inf)

    def __call__(self, t):
        with np.errstate(over="ignore"):
            return np.exp(self.log_value(t))

    def breakpoints(self):
        return sorted({p for s in self.steps for p in (s.start, s.a, s.b)})

    def to_dict(self):
        return {"steps": [s.to_dict() for s in self.steps]}


@dataclass(frozen=True, eq=False)
class LogWeight:
    """A weight w on R described by log(1/w).

    ``small(x)`` gives log(1/w(x)) for |x| <= 1 and ``loglog(t)`` gives
    log|log(1/w(e^t))| for t >= 0 (-inf where w = 1), so that weights far
    outside the floating range stay representable.  ``sign(t)`` gives the
    sign of log(1/w(e^t)) when w can exceed 1; by default it is +1.
    """

    small: object
    loglog: object
    breakpoints: tuple = ()
    name: str = ""
    sign: object = None

    def outer(self, t):
        """log(1/w(e^t)) as (sign, log magnitude)."""
        t = np.asarray(t, dtype=float)
        sg = np.ones(t.shape) if self.sign is None else self.sign(t)
        return sg, self.loglog(t)

    def log_inverse(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            t = np.log(np.maximum(x, 1.0))
        sg, ll = self.outer(t)
        with np.errstate(over="ignore"):
            big = sg * np.exp(ll)
        return np.where(x <= 1.0, self.small(np.minimum(x, 1.0)), big)

    def __call__(self, x):
        return np.exp(-self.log_inverse(x))

    @classmethod
    def constant(cls):
        return cls(lambda x: np.zeros_like(x), lambda t: np.full(np.shape(t), -np.inf), (), "1")

    @classmethod
    def exponential(cls):
        """w(x) = e^{-|x|}."""
        return cls(lambda x: np.asarray(x, dtype=float), lambda t: np.asarray(t, dtype=float),
                   (), "exp(-|x|)")


def phi_weight(f):
    return LogWeight(lambda x: np.zeros_like(x), f.log_value, tuple(f.breakpoints()), "phi")


def psi_weight(f, eps):
    """log(1/psi) for psi = phi + e^{-eps(|x|)|x|}."""

    def small(x):
        x = np.asarray(x, dtype=float)
        return -np.log(1.0 + np.exp(-eps(x) * x))

    def parts(t):
        t = np.asarray(t, dtype=float)
        lf = f.log_value(t)
        lg = np.log(eps.at_log(t)) + t
        lo = np.minimum(lf, lg)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            F, G = np.exp(np.minimum(lf, 700.0)), np.exp(np.minimum(lg, 700.0))
            # log(1/psi) = min(F, G) - log(1 + e^{-|F - G|}); beyond e^50 the correction is negligible
            exact = -np.logaddexp(-F, -G)
            small_range = lo < 50
            mag = np.where(small_range, np.log(np.abs(exact)), lo)
            sign = np.where(small_range, np.sign(exact), 1.0)
        return sign, mag

    return LogWeight(small, lambda t: parts(t)[1], tuple(f.breakpoints()), "psi",
                     lambda t: parts(t)[0])


@dataclass
class Thm15iResult:
    f: PiecewiseConvexF
    phi: LogWeight
    psi: LogWeight
    steps: list
    divergence_partials: list
    divergence_floor: list
    convergence_partials: list
    convergence_increments: list

    @property
    def holds(self):
        return all(r["holds"] for r in self.steps)

    def rows(self):
        keys = ["n", "a", "b", "gamma", "a_gamma_bound", "inside", "inside_closed", "left", "right",
                "xx4", "xx4a", "xx10", "holds"]
        return keys, [[r[k] for k in keys] for r in self.steps]

    def to_dict(self):
        return {"f": self.f.to_dict(), "steps": self.steps,
                "divergence_partials": self.divergence_partials,
                "divergence_floor": self.divergence_floor,
                "convergence_partials": self.convergence_partials,
                "convergence_increments": self.convergence_increments, "holds": self.holds}


def _choose_step(eps, n, a_start, cfg):
    """Smallest integer a >= a_start with eps(e^a) < 4^-n admitting b = a + 1 + j/8."""
    step, cap, a_cap = cfg["b_step"], cfg["b_cap"], cfg["a_cap"]
    bound = 4.0 ** -n
    a = float(a_start)
    first_gamma_a = None
    while a <= a_cap:
        g = eps.sup_from_log(a)
        if g < bound:
            if first_gamma_a is None:
                first_gamma_a = a
            # xx4a is monotone in b - a, so the first length meeting it is the only candidate
            j = 0
            while 1.0 + j * step <= cap:
                L = 1.0 + j * step
                if L > 1.0 and math.expm1(L) / L * g >= 10.0:
                    break
                j += 1
            else:
                raise InfeasibleError(f"step {n}: no b found with b - a <= {cap}")
            L = 1.0 + j * step
            if L * g < 2.0 ** -n:
                return Step(n, a, a + L, g), first_gamma_a
        a += 1.0
    raise InfeasibleError(f"step {n}: no feasible a below the cap {a_cap}")


def build_thm15i(eps, n_max, a_start=1):
    """Inductive construction of f with per-step verification of every bound used."""
    eps.check_monotone()
    cfg = defaults.get("sharpness")
    nodes = cfg["gauss_nodes"]
    steps, rows = [], []
    a0 = float(a_start)
    for n in range(1, int(n_max) + 1):
        s, first = _choose_step(eps, n, a0, cfg)
        steps.append(s)
        a0 = math.ceil(s.b) + 1.0
        inside_q, _ = quadrature.integrate(s.scaled_integrand, [0.0, s.length], nodes, 1e-14)
        left_q, _ = quadrature.integrate(s.scaled_integrand, [-1.0 / s.growth, 0.0], nodes, 1e-14)
        right_q, _ = quadrature.integrate(s.scaled_integrand, [s.length, s.length + 80.0], nodes, 1e-14)
        right_q += s.gamma * (1 + s.growth * (s.length + 81.0)) * math.exp(-(s.length + 80.0))
        inside, left, right, lower = s.closed_forms()
        checks = {
            "inside_ge_1": inside_q >= 1.0 - 1e-9,
            "inside_ge_closed_lower": inside_q >= lower - 1e-9,
            "left_le": left_q <= (E - 1) * s.gamma + 1e-9,
            "right_le": right_q <= 2 * s.gamma + 1e-9,
            "xx4": s.length * s.gamma < 2.0 ** -n,
            "xx4a": s.growth * s.gamma >= 10.0,
            "xx10": s.gamma * s.length < 2.0 ** -n,
            "zero_before": s.start >= s.a - 1.0,
        }
        rows.append({"n": n, "a": s.a, "b": s.b, "gamma": s.gamma, "a_gamma_bound": first,
                     "inside": inside_q, "inside_closed": inside, "inside_lower": lower,
                     "left": left_q, "left_closed": left, "right": right_q, "right_closed": right,
                     "xx4": s.length * s.gamma, "xx4a": s.growth * s.gamma,
                     "xx10": s.gamma * s.length, "checks": checks, "holds": all(checks.values())})
    f = PiecewiseConvexF(steps)
    div, floor, conv, incs = [], [], [], []
    run_d = run_c = side = 0.0
    for n, r in enumerate(rows, start=1):
        run_d += r["inside"]
        side += ((E - 1) + 2) * r["gamma"]
        inc = r["left"] + r["right"] + r["xx10"]
        run_c += inc
        div.append(run_d)
        floor.append(n - side)
        conv.append(run_c)
        incs.append(inc)
    return Thm15iResult(f, phi_weight(f), psi_weight(f, eps), rows, div, floor, conv, incs)


@dataclass
class LogIntegralReport:
    log_windows: list
    partials: list
    trend: object

    def to_dict(self):
        return {"log_windows": self.log_windows, "partials": self.partials,
                "trend": self.trend.to_dict()}


def log_integral_report(w, windows=None, log_windows=None, nodes=None):
    """Partial integrals of log(1/w(x))/(1+x^2) over |x| <= R with their trend.

    Windows are radii R or, through ``log_windows``, values of log R.  The
    part |x| > 1 is integrated in t = log|x|, which keeps super-exponential
    weights finite.
    """
    if log_windows is None:
        if windows is None:
            raise ValidationError("give windows or log_windows")
        log_windows = np.log(np.asarray(windows, dtype=float))
    T = np.asarray(log_windows, dtype=float)
    if np.any(np.diff(T) <= 0) or T[0] < 0:
        raise ValidationError("windows must increase and be >= 1")
    if not isinstance(w, LogWeight):
        fn = w
        w = LogWeight(lambda x: -np.log(fn(x)), lambda t: np.log(np.maximum(-np.log(fn(np.exp(t))), 0.0)),
                      (), "sampled")
        probe = fn(np.linspace(-1.0, 1.0, 11))
        if np.any(probe <= 0):
            raise ValidationError("weight must be positive")
    nodes = defaults.get("sharpness", "gauss_nodes") if nodes is None else nodes

    def inner(x):
        return w.small(x) / (1 + x * x)

    def outer(t):
        sg, ll = w.outer(t)
        with np.errstate(over="ignore", divide="ignore"):
            return sg * np.exp(ll + t - np.logaddexp(0.0, 2 * t))

    core, _ = quadrature.integrate(inner, [0.0, 1.0], 16, 1e-14)
    partials = []
    total = 2 * core
    prev = 0.0
    for Ti in T:
        cuts = [p for p in w.breakpoints if prev < p < Ti]
        edges = np.unique(np.concatenate([[prev], cuts, np.linspace(prev, Ti, 9)[1:]]))
        if Ti > prev:
            part, _ = quadrature.integrate(outer, edges, nodes, 1e-13)
            if not math.isfinite(part):
                raise ValidationError("weight vanishes (log(1/w) infinite) inside the windows")
            total += 2 * part
        prev = Ti
        partials.append(total)
    return LogIntegralReport(T.tolist(), partials, trend.classify(partials))


# -- part (ii) ---------------------------------------------------------------

@dataclass
class Lq1Result:
    log_y: list
    gamma: list
    checks: list
    partials: list
    trend: object

    def intervals(self):
        """(y_k, 2 y_k) as floats, +inf when y_k is outside the double range."""
        with np.errstate(over="ignore"):
            y = np.exp(np.asarray(self.log_y))
        return [(float(v), float(2 * v)) for v in y]

    def log_phi(self, x):
        """log phi(x) for phi = sum_k gamma_k y_k max(x + 1 - log y_k, 0)."""
        x = np.asarray(x, dtype=float)
        parts = []
        for g, ly in zip(self.gamma, self.log_y):
            u = x + 1.0 - ly
            with np.errstate(divide="ignore", invalid="ignore"):
                parts.append(np.where(u > 0, math.log(g) + ly + np.log(np.where(u > 0, u, 1.0)), -np.inf))
        parts = np.stack(parts)
        top = np.max(parts, axis=0)
        safe = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(invalid="ignore"):
            return np.where(np.isfinite(top), safe + np.log(np.sum(np.exp(parts - safe), axis=0)), -np.inf)

    def to_dict(self):
        return {"log_y": self.log_y, "gamma": self.gamma, "checks": self.checks,
                "partials": self.partials, "trend": self.trend.to_dict()}


def build_lq1(eps, k_max, y1=10.0):
    """Intervals I_k = [y_k, 2 y_k] and phi = sum phi_k with per-term checks.

    y_{k+1} is the first y in {4^j y_k : j >= 1} with gamma_{k+1} <= gamma_k/2,
    which makes the intervals disjoint and the gamma series geometric.
    """
    eps.check_monotone()
    nodes = defaults.get("sharpness", "gauss_nodes")
    log4 = math.log(4.0)
    log_y = [math.log(y1)]
    gamma = [1 * eps.sup_from_log(log_y[0])]
    for k in range(2, int(k_max) + 1):
        ly = log_y[-1] + log4
        for _ in range(100000):
            if k * eps.sup_from_log(ly) <= gamma[-1] / 2:
                break
            ly += log4
        else:
            raise InfeasibleError(f"no y_{k} found within 4^100000 y_{k - 1}")
        log_y.append(ly)
        gamma.append(k * eps.sup_from_log(ly))
    res = Lq1Result(log_y, gamma, [], [], None)
    checks = []
    for k, (ly, g) in enumerate(zip(log_y, gamma), start=1):
        # int phi_k e^{-t} dt = e gamma_k int_0^inf u e^{-u} du in u = t + 1 - log y_k
        body, _ = quadrature.integrate(lambda u: E * g * u * np.exp(-u), [0.0, 60.0], nodes, 1e-15)
        body += E * g * 61.0 * math.exp(-60.0)
        x = np.linspace(ly, ly + math.log(2.0), 65)
        ratio = np.exp(np.log(eps.at_log(x)) + x - res.log_phi(x))
        at = ly + math.log(1.5)
        r_mid = float(np.exp(math.log(eps.sup_from_log(at)) + at - res.log_phi(np.array([at]))[0]))
        disjoint = k == len(log_y) or log_y[k] >= ly + log4
        # phi >= phi_k = k eps(y_k) y_k (x + 1 - log y_k) and eps(e^x) <= eps(y_k) on I_k give
        # ratio(x) <= (e^x/y_k) / (k (1 + x - log y_k)); at e^x = 1.5 y_k that is 1.5/(1 + log 1.5)/k
        mid_bound = 1.5 / (1.0 + math.log(1.5)) / k
        checks.append({"k": k, "log_y": ly, "gamma": g, "integral": body,
                       "integral_error": abs(body - E * g),
                       "ratio_at_1.5y": r_mid, "ratio_mid_bound": mid_bound,
                       "ratio_below_1_over_k": bool(r_mid <= 1.0 / k),
                       "ratio_sup": float(np.max(ratio)),
                       "holds": bool(abs(body - E * g) <= 1e-9 and r_mid <= mid_bound
                                     and np.max(ratio) <= 2.0 / k and disjoint),
                       "disjoint": bool(disjoint)})
    partials = list(np.cumsum(gamma))
    res.checks, res.partials = checks, partials
    res.trend = trend.classify(partials)
    if k_max >= 4 and res.trend.verdict != trend.CONVERGED:
        raise InfeasibleError("sum of gamma_k is not Cauchy within k_max")
    return res


def block_sets(log_y, K_max):
    """A = {k : (2k+1, 2k+2) not inside any I_n}, B = its complement in 0..K_max."""
    A, B = [], []
    for k in range(int(K_max) + 1):
        lo, hi = 2 * k + 1, 2 * k + 2
        inside = any(math.log(lo) >= ly and math.log(hi) <= ly + math.log(2.0) for ly in log_y)
        (B if inside else A).append(k)
    return A, B


@dataclass
class Thm15iiResult:
    nodes: object
    G: object
    derivative_report: object
    A: list
    B: list
    Lambda: np.ndarray
    Lambda_star: np.ndarray
    dropped: np.ndarray
    pairs: list
    pairing_holds: bool
    capped: list
    annihilation: dict

    def annihilates(self, tolerance=1e-5):
        """Per family: whether the computed node sum is below tolerance.

        The node sum runs over the stored nodes only; the fitted-envelope tail
        in each AnnihilationResult is a separate, conservative bound.
        """
        return {k: bool(v.residual <= tolerance) for k, v in self.annihilation.items()}

    def to_dict(self):
        return {"A": self.A, "B": self.B, "Lambda": self.Lambda, "Lambda_star": self.Lambda_star,
                "dropped": self.dropped, "pairs": self.pairs, "pairing_holds": self.pairing_holds,
                "capped_eta": self.capped, "derivatives": self.derivative_report.to_dict(),
                "annihilation": {k: v.to_dict() for k, v in self.annihilation.items()},
                "annihilates": self.annihilates()}


def default_test_families():
    """Test functions below type 2 pi, one just above type pi, and one above 2 pi."""
    return {
        "type5": TestFunction.sinc_power(1.25, 4),
        "type6": TestFunction.sinc_power(1.5, 4),
        "type_pi_plus": TestFunction.sinc_power((math.pi + 0.25) / 4, 4),
        "type7": TestFunction.sinc_power(3.5, 2),
    }


def build_thm15ii(eps, K_max, intervals, families=None, tolerance=1e-5):
    """Node sets, pairing and G-annihilation for the perturbed lattice construction.

    ``intervals`` is an Lq1Result (or a list of log y_k).  The Hall/de Branges
    factor F is not constructed, so Lambda here is the zero set of G alone.
    """
    eps.check_monotone()
    log_y = intervals.log_y if hasattr(intervals, "log_y") else list(intervals)
    A, B = block_sets(log_y, K_max)
    if not B:
        raise InfeasibleError(f"B is empty up to K_max = {K_max}")
    setB = set(B)
    capped = []

    def rule(k):
        if k not in setB:
            return Fraction(1, 10)
        r = 2 * k + 2
        eta = math.exp(-float(eps(r)) * r)
        if eta >= 0.1:
            capped.append(k)
            return Fraction(1, 10) - Fraction(1, 10 ** 6)
        return Fraction(eta)

    ns, G, report = build_lq7(rule, K_max)
    a, b, c, d = (np.array([float(v) for v in arr]) for arr in (ns.a, ns.b, ns.c, ns.d))
    sigma = np.sort(np.concatenate([a, b, c, d]))
    Lam = np.concatenate([-sigma[::-1], [0.0], sigma])
    keep = np.ones(a.size, bool)
    keep[B] = False
    star_pos = np.sort(np.concatenate([a, c, b[keep], d[keep]]))
    Lam_star = np.concatenate([-star_pos[::-1], [0.0], star_pos])
    dropped_pos = np.sort(np.concatenate([b[~keep], d[~keep]]))
    dropped = np.concatenate([-dropped_pos[::-1], dropped_pos])
    pairs = []
    ok = True
    for k in B:
        eta = float(ns.eta[k])
        for x, y in ((a[k], b[k]), (c[k], d[k])):
            bound = math.exp(-float(eps(x)) * x)
            holds = abs(y - x) <= bound
            ok &= holds
            pairs.append({"k": k, "x": x, "y": y, "distance": abs(y - x), "eta": eta,
                          "bound": bound, "holds": bool(holds)})
    fams = default_test_families() if families is None else families
    ann = {name: annihilation_residual(G, f, tolerance=tolerance, tail_policy="lattice_closure")
           for name, f in fams.items()}
    return Thm15iiResult(ns, G, report, A, B, Lam, Lam_star, dropped, pairs, bool(ok), capped, ann)
