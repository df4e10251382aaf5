"""Symmetric canonical products, Krein sums, annihilation sums and zero counting.

A :class:`CanonicalProduct` is

    F(z) = C * z^o * prod_k (1 - z^2/x_k^2) * T(z),

with finitely many stored positive zeros x_k, an optional zero at the origin
(o = 1) and an optional lattice tail T(z) = prod_{j>=0} (1 - w^2/(j+A)^2)^m,
w = z/s, which is closed in terms of Gamma functions.  All evaluation happens
in the log domain; signs and phases are tracked separately.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import special

from . import defaults, kernels, trend
from .errors import ConditioningError, ValidationError, ZeroHit
from .report import Certificate

TAIL_POLICIES = ("none", "pair_log_bound", "lattice_closure")


# -- lattice tails -----------------------------------------------------------

@dataclass(frozen=True)
class LatticeTail:
    """Zeros at +-spacing*(j + offset), j = 0, 1, ..., each of the given multiplicity."""

    spacing: float
    offset: float
    multiplicity: int = 1

    def __post_init__(self):
        if not (self.spacing > 0 and self.offset > 0 and self.multiplicity >= 1):
            raise ValidationError("lattice tail needs spacing > 0, offset > 0, multiplicity >= 1")

    @property
    def first_zero(self):
        return self.spacing * self.offset

    def zeros(self, count):
        return self.spacing * (np.arange(count) + self.offset)

    def log_factor(self, z):
        """log of the tail factor at z: (log|T|, sign) for real z, complex log for complex z."""
        w = np.asarray(z) / self.spacing
        A, m = self.offset, self.multiplicity
        complex_in = np.iscomplexobj(w)
        r = np.abs(w) / A
        small = r < 0.5
        if complex_in:
            out = np.zeros(w.shape, dtype=complex)
        else:
            out = np.zeros(w.shape)
            sign = np.ones(w.shape)
        if np.any(small):
            ws = w[small]
            w2 = ws * ws
            acc = np.zeros(ws.shape, dtype=w2.dtype)
            power = np.ones(ws.shape, dtype=w2.dtype)
            for i in range(1, 80):
                power = power * w2
                term = power * special.zeta(2 * i, A) / i
                acc = acc + term
                if np.all(np.abs(term) <= 1e-18 * np.maximum(np.abs(acc), 1e-300)):
                    break
            out[small] = -m * acc
        big = ~small
        if np.any(big):
            wb = w[big]
            if complex_in:
                lg = special.loggamma
                val = m * (2 * lg(complex(A)) - lg(A - wb) - lg(A + wb))
                out[big] = val
            else:
                with np.errstate(divide="ignore", invalid="ignore"):
                    val = m * (2 * special.gammaln(A) - special.gammaln(A - wb)
                               - special.gammaln(A + wb))
                    sg = (special.gammasgn(A) ** 2
                          / (special.gammasgn(A - wb) * special.gammasgn(A + wb))) ** m
                # A - |w| a nonpositive integer: w is a tail zero
                gap = A - np.abs(wb)
                hit = (gap == np.round(gap)) & (gap <= 0)
                val = np.where(hit, -np.inf, val)
                sg = np.where(hit, 0.0, sg)
                out[big] = val
                sign[big] = sg
        if complex_in:
            return out
        return out, sign

    def log_bound(self, z):
        """Bound on |sum of omitted log-factors| if the tail were dropped (inf if |w| >= A)."""
        w = np.abs(np.asarray(z)) / self.spacing
        A = self.offset
        with np.errstate(divide="ignore"):
            return np.where(w < A, self.multiplicity * w * w * special.zeta(2, A)
                            / (1 - (w / A) ** 2), np.inf)

    def derivative_log(self, j):
        """(log|F_T'|, sign) at the tail zero spacing*(j+offset) for a simple tail, F_T = T.

        Near w0 = j + A, 1/Gamma(A - w) ~ (-1)^{j+1} j! (w - w0), so
        d T/dw (w0) = Gamma(A)^2 (-1)^{j+1} j! / Gamma(2A + j).
        """
        if self.multiplicity != 1:
            raise ValidationError("derivative at a multiple zero is zero")
        j = np.asarray(j, dtype=float)
        A = self.offset
        e = 2 * A - 1
        with np.errstate(over="ignore"):
            p = special.poch(j + 1, e)
        ok = np.isfinite(p) & (p > 0)
        ratio = np.where(ok, -np.log(np.where(ok, p, 1.0)),
                         special.gammaln(j + 1) - special.gammaln(2 * A + j))
        log_abs = 2 * special.gammaln(A) + ratio - math.log(self.spacing)
        sign = np.where(np.mod(j, 2) == 0, -1.0, 1.0)
        return log_abs, sign

    def to_dict(self):
        return {"spacing": self.spacing, "offset": self.offset, "multiplicity": self.multiplicity}


# -- products ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CanonicalProduct:
    positive_zeros: np.ndarray
    zero_at_origin: bool = False
    normalization: float = 1.0
    nominal_type: float = 0.0
    tail: LatticeTail = None
    check_m7: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        x = np.asarray(self.positive_zeros, dtype=float).ravel()
        if x.size and (np.any(x <= 0) or np.any(np.diff(x) <= 0) or not np.all(np.isfinite(x))):
            raise ValidationError("positive zeros must be finite, positive and strictly increasing")
        if self.tail is not None and x.size and self.tail.first_zero <= x[-1]:
            raise ValidationError("lattice tail must start beyond the stored zeros")
        if not (np.isfinite(self.normalization) and self.normalization != 0):
            raise ValidationError("normalization must be finite and nonzero")
        if self.nominal_type < 0:
            raise ValidationError("nominal type must be nonnegative")
        object.__setattr__(self, "positive_zeros", x)
        if self.check_m7:
            verdict = m7_trend(x)
            if verdict.unbounded:
                raise ValidationError("sum of 1/x_k^2 does not converge on the stored range")

    @property
    def count(self):
        return self.positive_zeros.size

    @property
    def is_even(self):
        return not self.zero_at_origin

    def zeros(self, count=None):
        """First ``count`` positive zeros: stored ones, then tail zeros."""
        x = self.positive_zeros
        if count is None or count <= x.size:
            return x if count is None else x[:count]
        if self.tail is None:
            raise ValidationError(f"only {x.size} zeros are available")
        return np.concatenate([x, self.tail.zeros(count - x.size)])

    def all_zeros(self, count=None):
        """Symmetric zero set (sorted), including the origin when present."""
        x = self.zeros(count)
        mid = [0.0] if self.zero_at_origin else []
        return np.concatenate([-x[::-1], mid, x])

    def __call__(self, z):
        v = eval_product(self, z, allow_zeros=True)
        return v.value

    def to_dict(self):
        return {
            "positive_zeros": self.positive_zeros.tolist(),
            "zero_at_origin": self.zero_at_origin,
            "normalization": self.normalization,
            "nominal_type": self.nominal_type,
            "tail": None if self.tail is None else self.tail.to_dict(),
        }

    def to_measure_dict(self):
        """Zero set in the measure file schema (unit masses) plus product metadata."""
        zs = self.all_zeros()
        return {"symmetric": True, "real_atoms": [[float(v), 1.0] for v in zs],
                "imag_atoms": [], "truncation_radius": float(np.max(np.abs(zs))) if zs.size else 0.0,
                "product": self.to_dict()}

    @classmethod
    def from_dict(cls, d):
        d = d.get("product", d)
        tail = d.get("tail")
        return cls(np.asarray(d["positive_zeros"], dtype=float), bool(d.get("zero_at_origin", False)),
                   float(d.get("normalization", 1.0)), float(d.get("nominal_type", 0.0)),
                   None if tail is None else LatticeTail(**tail))


def m7_trend(x, windows=None):
    """Trend of sum 1/x_k^2 over geometric windows of the stored range."""
    x = np.asarray(x, dtype=float)
    if x.size < 8:
        return trend.Trend(trend.INCONCLUSIVE, [])
    nwin = defaults.get("products", "m7_windows") if windows is None else windows
    top = x[-1]
    radii = top / 4.0 ** np.arange(nwin, -1, -1)
    cum = np.cumsum(1.0 / (x * x))
    idx = np.searchsorted(x, radii, side="right")
    partial = [float(cum[i - 1]) if i > 0 else 0.0 for i in idx]
    return trend.classify(partial)


def lattice_product(spacing, offset, stored, normalization=1.0, zero_at_origin=False,
                    nominal_type=None):
    """Zeros spacing*(j+offset); the first ``stored`` are explicit, the rest a closed tail."""
    x = spacing * (np.arange(stored) + offset)
    nominal = math.pi / spacing if nominal_type is None else nominal_type
    return CanonicalProduct(x, zero_at_origin, normalization, nominal,
                            LatticeTail(spacing, offset + stored))


def sinc_product(stored=0):
    """sin(pi z)/(pi z)."""
    return lattice_product(1.0, 1.0, stored)


def sine_product(stored=0):
    """sin(pi z)."""
    return lattice_product(1.0, 1.0, stored, normalization=math.pi, zero_at_origin=True)


def cosine_product(stored=0):
    """cos(pi z)."""
    return lattice_product(1.0, 0.5, stored)


# -- evaluation --------------------------------------------------------------

@dataclass
class ProductValue:
    log_abs: np.ndarray
    sign: np.ndarray
    error: np.ndarray
    tail_bound: np.ndarray
    zero: np.ndarray

    @property
    def value(self):
        with np.errstate(over="ignore"):
            return self.sign * np.exp(self.log_abs)

    def to_dict(self):
        return {"log_abs": self.log_abs, "sign": self.sign, "error": self.error,
                "tail_bound": self.tail_bound}


def _policy(policy):
    policy = defaults.get("products", "tail_policy") if policy is None else policy
    if policy not in TAIL_POLICIES:
        raise ValidationError(f"unknown tail policy {policy!r}")
    return policy


def _omitted_bound(x_omitted, z):
    """Bound on |sum log(1 - z^2/x_k^2)| over omitted stored zeros."""
    if x_omitted.size == 0:
        return np.zeros(np.shape(z))
    az2 = np.abs(np.asarray(z)) ** 2
    out = np.empty(az2.shape)
    flat = az2.ravel()
    for i, v in enumerate(flat):
        r = v / (x_omitted * x_omitted)
        out.flat[i] = math.fsum(r / (1 - r)) if np.all(r < 1) else math.inf
    return out


def eval_product(F, z, N=None, tail_policy=None, allow_zeros=False):
    """log|F(z)| with sign (real z) or unit phase (complex z), and an error bar.

    ``N`` limits the stored zeros used.  Tail policies: ``none`` drops the
    omitted zeros; ``pair_log_bound`` drops them and reports the bound
    sum |t|/(1-|t|), t = z^2/x_k^2, on the omitted log-factors; ``lattice_closure``
    multiplies by the closed lattice tail (requires all stored zeros).
    """
    policy = _policy(tail_policy)
    z = np.asarray(z)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    is_complex = np.iscomplexobj(z)
    x = F.positive_zeros
    N = x.size if N is None else int(N)
    if not 0 <= N <= x.size:
        raise ValidationError(f"N must be between 0 and {x.size}")
    used, omitted = x[:N], x[N:]
    if policy == "lattice_closure" and omitted.size:
        raise ValidationError("lattice_closure needs every stored zero (N = stored count)")
    if policy == "lattice_closure" and F.tail is None:
        raise ValidationError("lattice_closure needs a lattice tail")

    C = F.normalization
    if is_complex:
        zc = z.astype(complex)
        z2 = zc * zc
        lg, arg, hit = kernels.log_factor_sum_complex(np.ascontiguousarray(z2.real),
                                                      np.ascontiguousarray(z2.imag), used)
        log_abs = lg + math.log(abs(C))
        phase = arg + (math.pi if C < 0 else 0.0)
        if F.zero_at_origin:
            with np.errstate(divide="ignore"):
                log_abs = log_abs + np.log(np.abs(zc))
            phase = phase + np.angle(zc)
        zero = (hit >= 0) | ((zc == 0) & F.zero_at_origin)
    else:
        zr = z.astype(float)
        lg, neg, hit = kernels.log_factor_sum(np.ascontiguousarray(zr * zr), used)
        log_abs = lg + math.log(abs(C))
        sign = np.where(neg % 2 == 0, 1.0, -1.0) * math.copysign(1.0, C)
        if F.zero_at_origin:
            with np.errstate(divide="ignore"):
                log_abs = log_abs + np.log(np.abs(zr))
            sign = sign * np.sign(zr)
        zero = (hit >= 0) | ((zr == 0) & F.zero_at_origin)

    tail_bound = np.zeros(z.shape)
    error = np.zeros(z.shape)
    if policy == "lattice_closure":
        if is_complex:
            t = F.tail.log_factor(zc)
            log_abs = log_abs + t.real
            phase = phase + t.imag
        else:
            t, ts = F.tail.log_factor(zr)
            zero = zero | (ts == 0)
            log_abs = log_abs + t
            sign = sign * ts
    else:
        tail_bound = _omitted_bound(omitted, z)
        if F.tail is not None:
            tail_bound = tail_bound + F.tail.log_bound(z)
        if policy == "pair_log_bound":
            error = tail_bound.copy()

    log_abs = np.where(zero, -np.inf, log_abs)
    if is_complex:
        sgn = np.where(zero, 0.0, np.exp(1j * phase))
    else:
        sgn = np.where(zero, 0.0, sign)
    if np.any(zero) and not allow_zeros:
        raise ZeroHit(z[np.argmax(zero)].item())
    out = ProductValue(log_abs, sgn, error, tail_bound, zero)
    if scalar:
        out = ProductValue(*(np.asarray(a)[0] for a in (log_abs, sgn, error, tail_bound, zero)))
    return out


# -- derivatives at zeros ----------------------------------------------------

def lattice_structure(F):
    """The simple lattice that the stored zeros continue exactly into the tail, or None.

    When x_k = s (k + A0) for every stored zero and the tail starts at
    s (count + A0), F is C z^o times one closed-form lattice product.
    """
    t, x = F.tail, F.positive_zeros
    if t is None or t.multiplicity != 1 or x.size == 0:
        return None
    A0 = t.offset - x.size
    if A0 <= 0:
        return None
    full = LatticeTail(t.spacing, A0)
    return full if np.array_equal(full.zeros(x.size), x) else None


def _stored_derivative_logs(F, N, policy, exploit_lattice=True):
    key = ("stored", N, policy, exploit_lattice)
    if key in F._cache:
        return F._cache[key]
    x = F.positive_zeros
    used = x[:N]
    C = F.normalization
    full = lattice_structure(F) if exploit_lattice else None
    if full is not None:
        # O(N): derivative of the whole lattice product, divided by the zeros beyond N if omitted
        log_abs, sign = full.derivative_log(np.arange(used.size))
        log_abs = log_abs + math.log(abs(C))
        sign = sign * math.copysign(1.0, C)
        if F.zero_at_origin:
            log_abs = log_abs + np.log(used)
        if policy != "lattice_closure":
            t, ts = LatticeTail(full.spacing, full.offset + N).log_factor(used)
            log_abs = log_abs - t
            sign = sign * ts
            bound = _omitted_bound(x[N:], used) + F.tail.log_bound(used)
            err = bound if policy == "pair_log_bound" else np.zeros(used.size)
        else:
            err = np.zeros(used.size)
        F._cache[key] = (log_abs, sign, err)
        return F._cache[key]
    lg, neg = kernels.derivative_log_sums(np.ascontiguousarray(used))
    # F'(x_j) = C * x_j^o * (-2/x_j) * prod_{k != j}(1 - x_j^2/x_k^2) * T(x_j)
    log_abs = lg + math.log(abs(C)) + math.log(2.0) - np.log(used)
    sign = -np.where(neg % 2 == 0, 1.0, -1.0) * math.copysign(1.0, C)
    if F.zero_at_origin:
        log_abs = log_abs + np.log(used)
    err = np.zeros(used.size)
    if policy == "lattice_closure":
        t, ts = F.tail.log_factor(used)
        log_abs = log_abs + t
        sign = sign * ts
    else:
        bound = _omitted_bound(x[N:], used)
        if F.tail is not None:
            bound = bound + F.tail.log_bound(used)
        if policy == "pair_log_bound":
            err = bound
    F._cache[key] = (log_abs, sign, err)
    return F._cache[key]


def _tail_derivative_logs(F, count):
    """F' at the first ``count`` tail zeros (simple tail, all stored zeros included)."""
    tail = F.tail
    j = np.arange(count, dtype=float)
    w = tail.zeros(count)
    lt, st = tail.derivative_log(j)
    lg, neg, hit = kernels.log_factor_sum(np.ascontiguousarray(w * w), F.positive_zeros)
    if np.any(hit >= 0):
        raise ValidationError("tail zero coincides with a stored zero")
    C = F.normalization
    log_abs = lt + lg + math.log(abs(C))
    sign = st * np.where(neg % 2 == 0, 1.0, -1.0) * math.copysign(1.0, C)
    if F.zero_at_origin:
        log_abs = log_abs + np.log(w)
    return log_abs, sign


@dataclass
class Derivatives:
    zeros: np.ndarray   # positive zeros x_k
    values: np.ndarray  # F'(x_k)
    error: np.ndarray   # log-domain error bar
    origin: float = None  # F'(0) when the origin is a zero

    def at_negative(self, F):
        """F'(-x_k): F' is odd for even F and even for odd F."""
        return self.values if F.zero_at_origin else -self.values


def derivatives(F, N=None, tail_policy=None, exploit_lattice=True):
    """F' at the first N positive zeros (stored, then tail zeros) and at the origin.

    Products whose stored zeros are an exact lattice continued by the tail use
    the closed-form derivative (O(N)); otherwise, or with
    ``exploit_lattice=False``, the O(N^2) compensated log sums are used.
    """
    policy = _policy(tail_policy)
    x = F.positive_zeros
    N = x.size if N is None else int(N)
    if N <= x.size:
        if policy == "lattice_closure" and N < x.size:
            policy = "pair_log_bound"
        if policy == "lattice_closure" and F.tail is None:
            raise ValidationError("lattice_closure needs a lattice tail")
        log_abs, sign, err = _stored_derivative_logs(F, N, policy, exploit_lattice)
        zeros = x[:N]
    else:
        if F.tail is None:
            raise ValidationError(f"only {x.size} zeros are available")
        log_abs, sign, err = _stored_derivative_logs(F, x.size, "lattice_closure", exploit_lattice)
        tl, ts = _tail_derivative_logs(F, N - x.size)
        log_abs = np.concatenate([log_abs, tl])
        sign = np.concatenate([sign, ts])
        err = np.concatenate([err, np.zeros(tl.size)])
        zeros = F.zeros(N)
    with np.errstate(over="ignore"):
        values = sign * np.exp(log_abs)
    origin = None
    if F.zero_at_origin:
        origin = F.normalization
        if F.tail is not None and policy == "lattice_closure":
            origin = F.normalization  # every factor equals 1 at z = 0
    return Derivatives(zeros, values, err, origin)


def derivative_at_zeros(F, indices, tail_policy=None):
    """Map zero -> F'(zero) for the given indices into the positive zero list.

    Negative indices refer to the mirrored zeros -x_k; the string "origin"
    refers to z = 0.  Results are cached on the product.
    """
    idx = [i for i in indices if i != "origin"]
    N = max([abs(i) if i < 0 else i + 1 for i in idx], default=0)
    d = derivatives(F, max(N, F.count), tail_policy)
    out = {}
    for i in indices:
        if i == "origin":
            if not F.zero_at_origin:
                raise ValidationError("the origin is not a zero")
            out[0.0] = float(d.origin)
        elif i >= 0:
            out[float(d.zeros[i])] = float(d.values[i])
        else:
            k = -i - 1
            out[-float(d.zeros[k])] = float(d.at_negative(F)[k])
    return out


# -- Krein sums --------------------------------------------------------------

def krein_sum(F, W, N=None, windows=None, tail_policy=None):
    """Partial sums of W(lambda)/|F'(lambda)| over |lambda| <= R with a trend verdict."""
    if F.count == 0 and F.tail is None and not F.zero_at_origin:
        return Certificate("krein-sum", "krein-class-sum", "finite", 0.0, "exact",
                           {"N": 0}, {"partials": []}, 0.0)
    d = derivatives(F, N, tail_policy)
    floor = defaults.get("products", "min_derivative")
    absd = np.abs(d.values)
    if np.any(absd < floor):
        bad = d.zeros[np.argmin(absd)]
        raise ConditioningError(f"|F'| below {floor:g} at the zero {bad!r}")
    Wf = lambda v: np.asarray(W(v), dtype=float) * np.ones_like(v)
    pair = Wf(d.zeros) / absd + Wf(-d.zeros) / absd
    origin = float(Wf(np.zeros(1))[0] / abs(d.origin)) if F.zero_at_origin else 0.0
    R = d.zeros[-1] if d.zeros.size else 0.0
    windows = trend.geometric_windows(R / 4 ** 4, R) if windows is None else np.asarray(windows)
    idx = np.searchsorted(d.zeros, windows, side="right")
    partial = [origin + (math.fsum(pair[:i])) for i in idx]
    t = trend.classify(partial)
    # absolute-convergence diagnostic: sum 1/(|F'| |lambda|^{n+1})
    diag = {}
    smallest = None
    for n in range(0, 6):
        terms = 2.0 / (absd * d.zeros ** (n + 1))
        p = [math.fsum(terms[:i]) for i in idx]
        tn = trend.classify(p)
        diag[n] = {"partials": p, "verdict": tn.verdict}
        if tn.verdict == trend.CONVERGED:
            smallest = n
            break
    verdict = {trend.CONVERGED: "finite", trend.GROWING: "growing",
               trend.DIVERGING: "growing"}.get(t.verdict, "inconclusive")
    return Certificate(
        "krein-sum", "krein-class-sum", verdict, partial[-1] if partial else 0.0,
        "lower_bound" if verdict != "finite" else "exact",
        {"N": int(d.zeros.size), "windows": list(map(float, windows))},
        {"partials": partial, "trend": t.to_dict(), "absolute_convergence_N": smallest,
         "absolute_convergence": diag},
        float(R))


# -- annihilation ------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """A test function with its exponential type and decay envelope.

    ``envelope = (C, p)`` declares |f(x)| <= C (1+|x|)^{-p}; ``parity`` is
    "even", "odd" or None.
    """

    fn: object
    type: float
    envelope: tuple = None
    parity: str = None
    name: str = ""

    def __call__(self, x):
        return self.fn(x)

    def combine(self, other, alpha, beta):
        env = None
        if self.envelope and other.envelope:
            p = min(self.envelope[1], other.envelope[1])
            env = (abs(alpha) * self.envelope[0] + abs(beta) * other.envelope[0], p)
        parity = self.parity if self.parity == other.parity else None
        return TestFunction(lambda x: alpha * self.fn(x) + beta * other.fn(x),
                            max(self.type, other.type), env, parity,
                            f"{alpha}*{self.name}+{beta}*{other.name}")

    @classmethod
    def zero(cls):
        return cls(lambda x: np.zeros_like(np.asarray(x, dtype=float)), 0.0, (0.0, 2.0), "even",
                   "zero")

    @classmethod
    def sinc_power(cls, b, power, odd=False):
        """(sin(bz)/(bz))^power, times z when ``odd``; type b*power."""
        if b <= 0 or power < 1:
            raise ValidationError("need b > 0 and power >= 1")
        k = (1.0 + 1.0 / b) ** power
        if odd:
            fn = lambda x: np.asarray(x, dtype=float) * np.sinc(b * np.asarray(x) / math.pi) ** power
            parity = "odd"
            env = (k, power - 1)
            name = f"z*sinc({b}z)^{power}"
        else:
            fn = lambda x: np.sinc(b * np.asarray(x, dtype=float) / math.pi) ** power
            parity = "even"
            env = (k, power)
            name = f"sinc({b}z)^{power}"
        return cls(fn, b * power, env, parity, name)


@dataclass
class AnnihilationResult:
    residual: float
    signed_sum: float
    tail: float
    tail_method: str
    verdict: str
    tolerance: float
    partials: list

    @property
    def annihilated(self):
        return self.verdict == "annihilated"

    def to_dict(self):
        return {"residual": self.residual, "sum": self.signed_sum, "tail": self.tail,
                "tail_method": self.tail_method, "verdict": self.verdict,
                "tolerance": self.tolerance, "partials": self.partials}


def _fitted_tail(d, env, density_pts=None):
    """Tail estimate sum_{|l| > L} C(1+|l|)^{-p} / |F'(l)| from a fitted envelope of |F'|.

    |F'(l)| >= c l^q is fitted on the last quarter of the computed zeros (q from
    a log-log fit, c the minimum of |F'|/l^q there); the zero count beyond L is
    bounded by the minimal gap g there, giving
        2 * C / (c g) * L0^{1-p-q}/(p+q-1),  L0 = L - g.
    """
    C, p = env
    if C == 0:
        return 0.0, "zero envelope"
    z = d.zeros
    if z.size < 8:
        return math.inf, "too few zeros for an envelope fit"
    k = max(4, z.size // 4)
    zt, at = z[-k:], np.abs(d.values[-k:])
    q = trend.loglog_slope(zt, at)
    c = float(np.min(at / zt ** q))
    g = float(np.min(np.diff(zt)))
    L0 = z[-1] - g
    if p + q <= 1 or L0 <= 0 or c <= 0:
        return math.inf, "envelope not summable"
    return 2.0 * C / (c * g) * L0 ** (1 - p - q) / (p + q - 1), "fitted envelope"


def annihilation_residual(B, f, N=None, tolerance=None, tail_policy=None):
    """|sum over the zeros of B of f(lambda)/B'(lambda)| with a tail estimate.

    When the parity of f cancels the mirrored terms exactly (f even against
    an even B, f odd against an odd B) the tail is zero.  Otherwise the tail
    uses the declared envelope of f and a fitted power-law lower envelope of
    |B'| on the computed zeros.  A zero at the origin contributes f(0)/B'(0).
    """
    if not isinstance(f, TestFunction):
        raise ValidationError("f must be a TestFunction with a declared decay envelope")
    tol = defaults.get("annihilation", "tolerance") if tolerance is None else tolerance
    cancels = (f.parity == "even" and B.is_even) or (f.parity == "odd" and not B.is_even)
    if f.envelope is None and not cancels:
        raise ValidationError("test function has no declared decay envelope")
    d = derivatives(B, N, tail_policy)
    pos = f(d.zeros) / d.values
    neg = f(-d.zeros) / d.at_negative(B)
    pair = pos + neg
    origin = float(f(np.zeros(1))[0] / d.origin) if B.zero_at_origin else 0.0
    total = origin + math.fsum(pair)
    cut = np.unique(np.linspace(0, pair.size, 9).astype(int))[1:]
    partials = [origin + math.fsum(pair[:i]) for i in cut]
    if cancels:
        tail, method = 0.0, "parity cancellation"
    else:
        tail, method = _fitted_tail(d, f.envelope)
    residual = abs(total)
    verdict = "annihilated" if residual + tail <= tol else "not annihilated"
    return AnnihilationResult(residual, total, tail, method, verdict, tol, partials)


# -- counting ----------------------------------------------------------------

@dataclass
class CountingProfile:
    grid: np.ndarray
    n: np.ndarray
    N: np.ndarray
    c: float = None

    def to_dict(self):
        return {"grid": self.grid, "n": self.n, "N": self.N, "c": self.c}


def counting_n(lam, t):
    a = np.sort(np.abs(np.asarray(lam, dtype=float)))
    return np.searchsorted(a, np.asarray(t, dtype=float), side="right")


def counting_N(lam, R):
    """N(R) = int_1^R n(t)/t dt = sum over |l| < R of log(R / max(1, |l|)), exactly."""
    a = np.sort(np.abs(np.asarray(lam, dtype=float)))
    la = np.log(np.maximum(a, 1.0))
    cum = np.concatenate([[0.0], np.cumsum(la)])
    R = np.asarray(R, dtype=float)
    k = np.searchsorted(a, R, side="left")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = k * np.log(R) - cum[k]
    return np.where(R > 1, out, 0.0)


def counting(lam, grid, c=None):
    grid = np.asarray(grid, dtype=float)
    return CountingProfile(grid, counting_n(lam, grid), counting_N(lam, grid), c)


def _window_sup(lam, c, edges):
    """sup of n(t) - 2t/c over each window [edges[i], edges[i+1]] (exact: attained at jumps)."""
    a = np.sort(np.abs(np.asarray(lam, dtype=float)))
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        cand = np.concatenate([[lo], a[(a >= lo) & (a <= hi)]])
        vals = counting_n(a, cand) - 2 * cand / c
        out.append(float(np.max(vals)))
    return out


def krein_exclusion(lam, c, A_list, R_max, windows=None):
    """Desk-scale exclusion certificate: n(t) - 2t/c -> -inf and N(R) - 2R/c + A log R -> -inf.

    The first condition is tested on the window suprema of n(t) - 2t/c over
    geometric windows.  For the second, d/d(log R) of N(R) - 2R/c + A log R is
    n(R) - 2R/c + A, so its window increments must themselves trend to -inf;
    that is tested on the second differences over the same windows.
    """
    if c <= 0 or R_max <= 1:
        raise ValidationError("need c > 0 and R_max > 1")
    lam = np.asarray(lam, dtype=float)
    if lam.size and np.max(np.abs(lam)) < R_max:
        raise ValidationError("the point set must cover [-R_max, R_max]")
    edges = trend.geometric_windows(R_max / 4 ** 6, R_max) if windows is None else np.asarray(windows)
    sups = _window_sup(lam, c, edges)
    t1 = trend.classify(sups)
    cond_n = t1.unbounded and t1.increments[-1] < 0
    per_A = {}
    ok = cond_n
    N = counting_N(lam, edges)
    for A in A_list:
        h = N - 2 * edges / c + A * np.log(edges)
        inc = np.diff(h)
        t2 = trend.classify(inc)
        good = t2.unbounded and t2.increments[-1] < 0
        turning = None
        if good:
            # increments fall by a roughly constant amount per window; extrapolate the zero crossing
            step = float(np.mean(t2.increments[-3:]))
            k = max(0.0, inc[-1] / -step)
            turning = float(edges[-1] * (edges[-1] / edges[-2]) ** k)
        per_A[str(A)] = {"values": h.tolist(), "increments": inc.tolist(),
                         "trend": t2.to_dict(), "holds": bool(good),
                         "decreasing_from_about": turning}
        ok = ok and good
    if t1.verdict == trend.INCONCLUSIVE:
        verdict = "inconclusive"
    else:
        verdict = "holds" if ok else "fails"
    return Certificate(
        "krein-exclusion", "krein-zero-exclusion", verdict, None, "exact",
        {"c": c, "A_list": list(A_list), "R_max": R_max},
        {"windows": edges.tolist(), "window_sup": sups, "n_trend": t1.to_dict(),
         "per_A": per_A}, float(R_max))


# -- zero shifts -------------------------------------------------------------

def k1(delta):
    """Scale with y in I_x  =>  2 I_x subset of k1 I_y, using |y| <= |x| + e^{-delta|x|}."""
    return 3.0 * math.exp(delta)


@dataclass
class ShiftReport:
    product: CanonicalProduct
    lambdas: np.ndarray
    deviation: np.ndarray
    fitted_rate: float
    constant: float

    def to_dict(self):
        return {"lambdas": self.lambdas, "deviation": self.deviation,
                "fitted_rate": self.fitted_rate, "constant": self.constant,
                "product": self.product.to_dict()}


def shift_zeros(B, targets=None, M=0.0, delta=1.0, shifts=None, angles=16):
    """Move the zeros lambda > M of B to zeta_lambda and check the disc ratio bound.

    ``targets`` maps lambda -> zeta; alternatively ``shifts`` gives zeta - lambda
    (a dict, or an array aligned with the stored zeros above M), which keeps
    shifts that are below float resolution of lambda.  The result is the
    product over the shifted zeros |lambda| > M only (normalization 1).
    """
    x = B.positive_zeros
    sel = x > M
    lam = x[sel]
    if shifts is None:
        targets = {} if targets is None else targets
        s = np.array([float(targets.get(float(v), v)) - v for v in lam])
        zeta = np.array([float(targets.get(float(v), v)) for v in lam])
    elif isinstance(shifts, dict):
        s = np.array([float(shifts.get(float(v), 0.0)) for v in lam])
        zeta = lam + s
    else:
        s = np.asarray(shifts, dtype=float)
        if s.shape != lam.shape:
            raise ValidationError("shift array must match the zeros above M")
        zeta = lam + s
    half = k1(delta) * np.exp(-delta * lam)
    bad = np.abs(s) > half
    if np.any(bad):
        where = float(lam[np.argmax(bad)])
        raise ValidationError(f"target for the zero at {where!r} lies outside k1*I_lambda")
    if np.any(zeta <= 0) or np.any(np.diff(zeta) <= 0):
        raise ValidationError("shifted zeros must stay positive and ordered")
    B1 = CanonicalProduct(zeta, False, 1.0, B.nominal_type, B.tail)
    # ratio bound on the circles |z - lambda| = e^{-delta lambda / 3}
    th = 2 * np.pi * np.arange(angles) / angles
    rho = np.exp(-delta * lam / 3)
    offset = rho[:, None] * np.exp(1j * th)[None, :]
    z = lam[:, None] + offset
    # (1 - z/zeta)/(1 - z/lambda) - 1 = z (zeta - lambda) / (zeta (lambda - z)); lambda - z is
    # formed exactly as -offset since the circle radius can fall below the spacing of floats at lambda
    dev = np.max(np.abs(z * s[:, None] / (zeta[:, None] * -offset)), axis=1)
    ok = dev > 0
    rate = float("nan")
    if np.count_nonzero(ok) >= 2:
        rate = float(np.polyfit(lam[ok], np.log(dev[ok]), 1)[0])
    const = float(np.max(dev * np.exp(2 * delta * lam / 3))) if lam.size else 0.0
    return ShiftReport(B1, lam, dev, rate, const)


# -- Lemma bounds ------------------------------------------------------------

def log_derivative(F, x, block=256):
    """F'/F at real x away from the zeros (tail via digamma when F has a lattice tail)."""
    x = np.asarray(x, dtype=float)
    zs = F.positive_zeros
    out = np.zeros(x.shape)
    flat = x.ravel()
    res = np.empty(flat.size)
    for start in range(0, flat.size, block):
        xb = flat[start:start + block, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            res[start:start + block] = np.sum(2 * xb / (xb * xb - zs[None, :] ** 2), axis=1)
    out = res.reshape(x.shape)
    if F.zero_at_origin:
        with np.errstate(divide="ignore"):
            out = out + 1.0 / x
    if F.tail is not None:
        t = F.tail
        w = x / t.spacing
        out = out - t.multiplicity / t.spacing * (special.digamma(t.offset + w)
                                                  - special.digamma(t.offset - w))
    return out


def derivative_real(F, x):
    """F'(x) for real x: F * (F'/F) off the zeros, the exact zero derivatives on them."""
    x = np.asarray(x, dtype=float)
    policy = "lattice_closure" if F.tail is not None else "none"
    v = eval_product(F, x, tail_policy=policy, allow_zeros=True)
    with np.errstate(invalid="ignore", over="ignore"):
        out = v.value * log_derivative(F, x)
    hits = np.flatnonzero(v.zero)
    if hits.size:
        ax = np.abs(x[hits])
        need = 0
        for a in ax:
            if a > 0:
                k = int(np.searchsorted(F.positive_zeros, a))
                if k >= F.count:
                    k = F.count + int(round(a / F.tail.spacing - F.tail.offset))
                need = max(need, k + 1)
        d = derivatives(F, max(need, F.count), policy)
        for i, xi in zip(hits, x[hits]):
            if xi == 0:
                out[i] = d.origin
            else:
                k = int(np.argmin(np.abs(d.zeros - abs(xi))))
                out[i] = d.values[k] if xi > 0 else d.at_negative(F)[k]
    return out


@dataclass
class LfReport:
    threshold: float
    m5_holds_beyond: bool
    empirical_c: float
    m6_holds: bool
    grid_max: float

    def to_dict(self):
        return self.__dict__.copy()


def lf_bounds_check(B, delta, x_grid, c=None):
    """Smallest grid threshold beyond which |B|+|B'|+|B''| < e^{delta|x|/5}, and the gap constant."""
    x = np.asarray(x_grid, dtype=float)
    policy = "lattice_closure" if B.tail is not None else "none"
    val = eval_product(B, x, tail_policy=policy, allow_zeros=True).value
    d1 = derivative_real(B, x)
    step = 1e-5 * np.maximum(1.0, np.abs(x))
    d2 = (derivative_real(B, x + step) - derivative_real(B, x - step)) / (2 * step)
    total = np.abs(val) + np.abs(d1) + np.abs(d2)
    bad = total >= np.exp(delta * np.abs(x) / 5)
    ax = np.abs(x)
    if np.any(bad):
        last = np.max(ax[bad])
        beyond = ax[ax > last]
        threshold = float(np.min(beyond)) if beyond.size else math.inf
    else:
        threshold = float(np.min(ax))
    xmax = float(np.max(ax))
    zs = B.all_zeros()
    if B.tail is not None:
        extra = int(max(0, math.ceil(xmax / B.tail.spacing - B.tail.offset)) + 2)
        zs = B.all_zeros(B.count + extra)
    zs = zs[np.abs(zs) <= xmax + 1]
    if zs.size >= 2:
        gaps = np.diff(zs)
        near = np.minimum(np.abs(zs[:-1]), np.abs(zs[1:]))
        emp = float(np.min(gaps * np.exp(delta * near / 4)))
    else:
        emp = math.inf
    m6 = emp > 0 if c is None else emp >= c
    return LfReport(threshold, bool(threshold < math.inf), emp, bool(m6), xmax)


# -- node system -------------------------------------------------------------

@dataclass
class NodeSystem:
    """Quadruples (a_k, b_k, c_k, d_k) in exact rationals with floats for numerics."""

    eta: list
    a: list
    b: list
    c: list
    d: list
    set_A: list
    set_B: list

    @property
    def K(self):
        return len(self.a) - 1

    def floats(self):
        return tuple(np.array([float(v) for v in seq]) for seq in (self.a, self.b, self.c, self.d))

    def nodes(self):
        a, b, c, d = self.floats()
        return np.sort(np.concatenate([a, b, c, d]))

    def check(self):
        """Assert every constraint exactly in rational arithmetic; returns the failing k list."""
        bad = []
        for k in range(len(self.a)):
            a, b, c, d, e = self.a[k], self.b[k], self.c[k], self.d[k], self.eta[k]
            ok = (2 * k + Fraction(6, 5) < a < b < 2 * k + Fraction(7, 5)
                  and 2 * k + Fraction(8, 5) < c < d < 2 * k + Fraction(9, 5)
                  and d - c == e and b - a == e
                  and a + b + c + d == 8 * k + 6)
            if not ok:
                bad.append(k)
        return bad

    def to_dict(self):
        a, b, c, d = self.floats()
        return {"eta": [float(v) for v in self.eta], "a": a, "b": b, "c": c, "d": d,
                "A": list(self.set_A), "B": list(self.set_B)}


def build_node_system(eta_rule, K_max):
    """Symmetric placement a_k = 2k + 13/10 - eta_k/2, b_k = a_k + eta_k, c_k = 2k + 17/10 - eta_k/2."""
    etas, A, B, C, D, setA, setB = [], [], [], [], [], [], []
    for k in range(int(K_max) + 1):
        e = eta_rule(k)
        e = e if isinstance(e, Fraction) else Fraction(float(e))
        if not (0 < e <= Fraction(1, 10)):
            raise ValidationError(f"eta_{k} = {float(e)!r} must lie in (0, 1/10]")
        a = 2 * k + Fraction(13, 10) - e / 2
        c = 2 * k + Fraction(17, 10) - e / 2
        etas.append(e)
        A.append(a)
        B.append(a + e)
        C.append(c)
        D.append(c + e)
        (setA if e == Fraction(1, 10) else setB).append(k)
    ns = NodeSystem(etas, A, B, C, D, setA, setB)
    bad = ns.check()
    if bad:
        raise ValidationError(f"node constraints fail at k = {bad[:5]}")
    return ns


def node_product(ns, tail=True):
    """G(z) = z prod (1 - z^2/lambda^2) over the nodes; optional closure by quadruple zeros at 2k+3/2."""
    nodes = ns.nodes()
    closure = LatticeTail(2.0, ns.K + 1.75, 4) if tail else None
    return CanonicalProduct(nodes, True, 1.0, 2 * math.pi, closure)


@dataclass
class NodeDerivativeReport:
    K: int
    min_ratio: float
    argmin_node: float
    argmin_k: int
    min_scaled_ratio: float
    ratios: np.ndarray

    def to_dict(self):
        return {"K": self.K, "min_ratio": self.min_ratio, "argmin_node": self.argmin_node,
                "argmin_k": self.argmin_k, "min_scaled_ratio": self.min_scaled_ratio}


def node_derivative_report(ns, G=None):
    """min over k and nodes in (2k+1, 2k+2) of |G'(lambda)|/eta_k, plus the (1+lambda)-scaled minimum."""
    G = node_product(ns) if G is None else G
    d = derivatives(G, tail_policy="lattice_closure" if G.tail is not None else "none")
    eta = np.array([float(e) for e in ns.eta])
    k = np.floor((d.zeros - 1) / 2).astype(int)
    ratio = np.abs(d.values) / eta[k]
    i = int(np.argmin(ratio))
    with np.errstate(over="ignore"):
        scaled = (1 + d.zeros) * ratio
    return NodeDerivativeReport(ns.K, float(ratio[i]), float(d.zeros[i]), int(k[i]),
                                float(np.min(scaled)), ratio)


def build_lq7(eta_rule, K_max, tail=True):
    ns = build_node_system(eta_rule, K_max)
    G = node_product(ns, tail)
    return ns, G, node_derivative_report(ns, G)
