"""Certificates bounding or pinning the type T(mu) of a measure.

Each issuer returns a :class:`~typelab.report.Certificate` whose evidence
holds the partial sums, trends and residuals behind the verdict.  Upper
bounds on the type are never derived from numerics: they come only from
the reference models and structural facts such as support in a lattice.
"""

import math

import numpy as np

from . import defaults, quadrature, trend
from .errors import GridError, ValidationError
from .measures import SpectralMeasure
from .products import CanonicalProduct, TestFunction, annihilation_residual, derivatives
from .report import FAILS, HOLDS, INCONCLUSIVE, Certificate

MODELS = ("arithmetic_progression", "lebesgue", "point_mass", "compact_support")

FLAG_DS_CONSTANT = "duffin-schaeffer-constant-exceeds-reference"
FLAG_OMITTED_F = "hall-de-branges-factor-omitted"


# -- named functions (for replayable parameters) ------------------------------

def function_from_spec(spec):
    """Vectorized function from a small JSON description.

    kinds: const(value), exp_abs(rate) = e^{rate|x|}, power(p, scale) = scale (1+|x|)^p,
    inv_quadratic = 1/(1+x^2), gaussian = e^{-x^2}.
    """
    kind = spec.get("kind")
    if kind == "const":
        v = float(spec.get("value", 1.0))
        return lambda x: np.full(np.shape(x), v)
    if kind == "exp_abs":
        r = float(spec["rate"])
        return lambda x: np.exp(r * np.abs(np.asarray(x, dtype=float)))
    if kind == "power":
        p, s = float(spec["p"]), float(spec.get("scale", 1.0))
        return lambda x: s * (1 + np.abs(np.asarray(x, dtype=float))) ** p
    if kind == "inv_quadratic":
        return lambda x: 1.0 / (1.0 + np.asarray(x, dtype=float) ** 2)
    if kind == "gaussian":
        return lambda x: np.exp(-np.asarray(x, dtype=float) ** 2)
    raise ValidationError(f"unknown function kind {kind!r}")


def log_function_from_spec(spec):
    """log of ``function_from_spec(spec)``, evaluated without overflow."""
    kind = spec.get("kind")
    if kind == "exp_abs":
        r = float(spec["rate"])
        return lambda x: r * np.abs(np.asarray(x, dtype=float))
    if kind == "gaussian":
        return lambda x: -np.asarray(x, dtype=float) ** 2
    f = function_from_spec(spec)
    return lambda x: np.log(f(x))


def _windows(mu, windows, start=1.0):
    if windows is not None:
        return np.asarray(windows, dtype=float)
    R = mu.truncation_radius
    if R is None or not math.isfinite(R):
        if mu.has_density:
            R = float(max(abs(mu.density_grid[0]), abs(mu.density_grid[-1])))
        elif mu.positions.size:
            R = float(np.max(np.abs(mu.positions)))
        else:
            R = 4 * start
    return trend.geometric_windows(start, max(R, 4 * start))


# -- reference models ----------------------------------------------------------

def reference_type(model, ell=1.0):
    """Exact types of the reference models: pi/ell, infinity, 0, 0."""
    if model == "arithmetic_progression":
        if ell <= 0:
            raise ValidationError("ell must be positive")
        value, params = math.pi / ell, {"ell": ell}
    elif model == "lebesgue":
        value, params = math.inf, {}
    elif model in ("point_mass", "compact_support"):
        value, params = 0.0, {}
    else:
        raise ValidationError(f"unknown model {model!r}; expected one of {MODELS}")
    return Certificate(f"T({model})", "reference-models", HOLDS, value, "exact",
                       {"model": model, **params})


# -- zero type ---------------------------------------------------------------

def log_modulus(log_fn, grid, h, halvings=None):
    """Sup over the grid of |g(x+h) - g(x)| for h, h/2, ..."""
    halvings = defaults.get("certificates", "modulus_halvings") if halvings is None else halvings
    x = np.asarray(grid, dtype=float)
    out = []
    for j in range(halvings + 1):
        s = h / 2 ** j
        out.append(float(np.max(np.abs(log_fn(x + s) - log_fn(x)))))
    return out


def zero_type_certificate(mu, K, windows=None, K_spec=None, modulus_step=1.0):
    """T(mu) = 0 from a majorant K >= 1 with int K dmu < inf and a divergent log-integral."""
    if K is None:
        K = function_from_spec(K_spec)
        logK = log_function_from_spec(K_spec)
    else:
        logK = lambda x: np.log(K(x))
    W = _windows(mu, windows)
    probe = np.linspace(-W[-1], W[-1], 4001)
    if np.any(logK(probe) < 0):
        raise ValidationError("the majorant K must be >= 1")
    mod = log_modulus(logK, probe, modulus_step)
    uniform = all(b <= a / 1.5 or b <= 1e-12 for a, b in zip(mod[:-1], mod[1:]))
    mass_partials = [mu.integrate(K, -R, R) for R in W]
    t_mass = trend.classify(mass_partials)

    def log_part(R):
        edges = np.linspace(0.0, R, 33)
        v, _ = quadrature.integrate(lambda t: logK(t) / (1 + t * t) + logK(-t) / (1 + t * t), edges)
        return v

    log_partials = [log_part(R) for R in W]
    t_log = trend.classify(log_partials)
    if not uniform:
        verdict = INCONCLUSIVE
    elif t_mass.verdict == trend.CONVERGED and t_log.unbounded and t_log.increments[-1] > 0:
        verdict = HOLDS
    elif t_mass.unbounded or t_log.verdict == trend.CONVERGED:
        verdict = FAILS
    else:
        verdict = INCONCLUSIVE
    return Certificate("T(mu)=0", "zero-type-majorant", verdict, 0.0, "zero",
                       {"windows": W, "K": K_spec},
                       {"mass_partials": mass_partials, "mass_trend": t_mass.to_dict(),
                        "log_partials": log_partials, "log_trend": t_log.to_dict(),
                        "log_modulus": mod, "log_uniformly_continuous": uniform},
                       float(W[-1]))


# -- infinite type -------------------------------------------------------------

def szego_infinite_type(mu_density, windows=None):
    """T(mu) = infinity when int log mu'(t)/(1+t^2) dt is bounded below.

    ``mu_density`` is a SpectralMeasure with a density part, a (grid, values)
    pair or a vectorized callable.
    """
    if isinstance(mu_density, SpectralMeasure):
        if not mu_density.has_density:
            raise ValidationError("measure has no density part")
        dens = mu_density.density
        samples = mu_density.density_values
        breaks = mu_density.density_grid
        W = _windows(mu_density, windows)
    elif isinstance(mu_density, tuple):
        g, v = (np.asarray(a, dtype=float) for a in mu_density)
        dens = lambda x: np.interp(x, g, v, left=0.0, right=0.0)
        samples, breaks = v, g
        W = trend.geometric_windows(1.0, float(max(abs(g[0]), abs(g[-1])))) if windows is None \
            else np.asarray(windows, dtype=float)
    else:
        dens = mu_density
        if windows is None:
            raise ValidationError("a callable density needs windows")
        W = np.asarray(windows, dtype=float)
        breaks = np.zeros(0)
        samples = dens(np.linspace(-W[-1], W[-1], 4001))
    if not np.all(np.isfinite(samples)):
        raise ValidationError("density must be bounded")

    def part(lo, hi):
        inner = breaks[(np.abs(breaks) > lo) & (np.abs(breaks) < hi)]
        edges = np.unique(np.concatenate([np.linspace(lo, hi, 17), np.abs(inner)]))
        with np.errstate(divide="ignore"):
            f = lambda t: (np.log(dens(t)) + np.log(dens(-t))) / (1 + t * t)
            v, _ = quadrature.integrate(f, edges)
        return v

    partials, total, prev = [], 0.0, 0.0
    for R in W:
        total += part(prev, R)
        prev = R
        partials.append(total)
    t = trend.classify(partials)
    if t.verdict == trend.CONVERGED and all(math.isfinite(p) for p in partials):
        verdict = HOLDS
    elif t.unbounded:
        verdict = FAILS
    else:
        verdict = INCONCLUSIVE
    return Certificate("T(mu)=inf", "log-density-integral", verdict, math.inf, "infinite",
                       {"windows": W}, {"partials": partials, "trend": t.to_dict()},
                       float(W[-1]))


# -- Duffin-Schaeffer ------------------------------------------------------------

def duffin_schaeffer(mu, L, delta, x_grid, reference=None):
    """Scan the closed windows [x-L, x+L]; holds iff every window carries mass >= delta.

    The reported bound is 2 pi/L.  When a reference type is supplied and the
    bound exceeds it, the certificate carries a consistency flag.
    """
    if L <= 0 or delta <= 0:
        raise ValidationError("need L > 0 and delta > 0")
    x = np.unique(np.asarray(x_grid, dtype=float))
    if x.size > 1 and np.max(np.diff(x)) > L / 4:
        raise GridError(f"grid spacing {np.max(np.diff(x)):.3g} exceeds L/4 = {L / 4:.3g}")
    # for atoms the window mass changes only at atom +- L: add midpoints between those breakpoints
    if mu.positions.size:
        br = np.unique(np.concatenate([mu.positions - L, mu.positions + L]))
        br = br[(br >= x[0]) & (br <= x[-1])]
        pts = np.unique(np.concatenate([x[:1], br, x[-1:]]))
        x = np.unique(np.concatenate([x, 0.5 * (pts[:-1] + pts[1:])]))
    masses = mu.mass(x - L, x + L)
    i = int(np.argmin(masses))
    verdict = HOLDS if masses[i] >= delta else FAILS
    bound = 2 * math.pi / L
    flags = []
    if reference is not None and verdict == HOLDS and bound > reference:
        flags.append(FLAG_DS_CONSTANT)
    return Certificate("T(mu)>=2pi/L", "window-mass-lower-bound", verdict, bound, "lower_bound",
                       {"L": L, "delta": delta, "scan": [float(x[0]), float(x[-1])]},
                       {"min_mass": float(masses[i]), "argmin": float(x[i]),
                        "reference": reference},
                       float(max(abs(x[0]), abs(x[-1])) + L), flags)


# -- Koosis lattice --------------------------------------------------------------

def koosis_lattice(omega, N_max, windows=None, log_omega=None):
    """T(sum omega(n) delta_n) = pi from two partial-sum trends over |n| <= N.

    ``log_omega`` may be given instead of (or with) ``omega`` for weights
    that underflow in double precision.
    """
    W = trend.geometric_windows(1.0, float(N_max)) if windows is None else np.asarray(windows)
    n = np.arange(-int(N_max), int(N_max) + 1, dtype=float)
    if log_omega is not None:
        lw = np.asarray(log_omega(n), dtype=float) * np.ones(n.size)
        w = np.exp(lw)
        if not np.all(np.isfinite(lw)):
            raise ValidationError("log omega must be finite on |n| <= N_max")
    else:
        w = np.asarray(omega(n), dtype=float) * np.ones(n.size)
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValidationError("omega must be positive and finite on |n| <= N_max")
        lw = np.log(w)
    order = np.argsort(np.abs(n), kind="stable")
    n, w, lw = n[order], w[order], lw[order]
    t1 = w / (1 + n * n)
    t2 = lw / (1 + n * n)
    # log omega(0) / (1 + n^2) is a convergent series on its own; the trend is
    # read off the remainder so that omega and c * omega get the same verdict
    t2_rel = (lw - lw[0]) / (1 + n * n)
    cut = np.searchsorted(np.abs(n), W, side="right")
    s1 = [math.fsum(t1[:c]) for c in cut]
    s2 = [math.fsum(t2[:c]) for c in cut]
    s2_rel = [math.fsum(t2_rel[:c]) for c in cut]
    tr1, tr2 = trend.classify(s1), trend.classify(s2_rel)
    if tr1.verdict == trend.CONVERGED and tr2.verdict == trend.CONVERGED:
        verdict = HOLDS
    elif tr1.unbounded or tr2.unbounded:
        verdict = FAILS
    else:
        verdict = INCONCLUSIVE
    return Certificate("T(mu)=pi", "lattice-weight-sums", verdict, math.pi, "exact",
                       {"N_max": int(N_max), "windows": W},
                       {"mass_partials": s1, "mass_trend": tr1.to_dict(),
                        "log_partials": s2, "log_partials_relative": s2_rel,
                        "log_trend": tr2.to_dict()},
                       float(N_max))


# -- annihilator ---------------------------------------------------------------

def _zeros_inside(H, mu, count):
    d = H.all_zeros(count)
    pos = mu.positions
    i = np.clip(np.searchsorted(pos, d), 0, pos.size - 1)
    j = np.clip(i - 1, 0, pos.size - 1)
    gap = np.minimum(np.abs(pos[i] - d), np.abs(pos[j] - d))
    return bool(np.all(gap <= 1e-12 * np.maximum(1.0, np.abs(d))))


def annihilator_lower_bound(mu, H, test_family, a, N=None, windows=None, tail_policy=None,
                            flags=()):
    """T(mu) >= a from Phi = 1/H' in L^2(mu) annihilating test functions of type < a."""
    if not isinstance(H, CanonicalProduct):
        raise ValidationError("H must be a CanonicalProduct")
    if abs(H.nominal_type - a) > 1e-12 * max(1.0, a):
        raise ValidationError(f"H has nominal type {H.nominal_type}, not {a}")
    if mu.positions.size == 0 or np.any(mu.masses != 1.0):
        raise ValidationError("mu must be a unit-mass atomic measure")
    if tail_policy is None and H.tail is not None:
        tail_policy = "lattice_closure"
    d = derivatives(H, N, tail_policy)
    if not _zeros_inside(H, mu, d.zeros.size):
        raise ValidationError("the zeros of H are not all atoms of mu")
    z = d.zeros
    inv2 = 1.0 / d.values ** 2 + 1.0 / d.at_negative(H) ** 2
    origin = 1.0 / d.origin ** 2 if H.zero_at_origin else 0.0
    W = trend.geometric_windows(max(1.0, float(z[0])), float(z[-1])) if windows is None \
        else np.asarray(windows, dtype=float)
    cut = np.searchsorted(z, W, side="right")
    partials = [origin + math.fsum(inv2[:c]) for c in cut]
    l2 = trend.classify(partials)
    q = trend.loglog_slope(1 + z, d.values)
    c = float(np.min(np.abs(d.values) / (1 + z) ** q))
    evidence = {"l2_partials": partials, "l2_trend": l2.to_dict(),
                "derivative_envelope": {"c": c, "q": q}}
    params = {"a": a, "N": int(z.size), "H": H.to_dict()}
    if l2.verdict != trend.CONVERGED:
        evidence["reason"] = "1/H' is not shown to lie in L^2(mu)"
        return Certificate("T(mu)>=a", "annihilator-lower-bound", INCONCLUSIVE, a, "lower_bound",
                           params, evidence, float(z[-1]), list(flags))
    results = {}
    for name, f in test_family.items():
        if not isinstance(f, TestFunction):
            raise ValidationError(f"test function {name!r} must be a TestFunction")
        if not f.type < a:
            raise ValidationError(f"test function {name!r} has type {f.type} >= {a}")
        results[name] = annihilation_residual(H, f, N, tail_policy=tail_policy)
    evidence["residuals"] = {k: v.to_dict() for k, v in results.items()}
    verdict = HOLDS if all(r.annihilated for r in results.values()) else FAILS
    return Certificate("T(mu)>=a", "annihilator-lower-bound", verdict, a, "lower_bound",
                       params, evidence, float(z[-1]), list(flags))


# -- coherence over the model zoo -------------------------------------------------

def model_zoo(radius=1024.0):
    """The built-in reference suite: (measure, reference model, reference value)."""
    R = float(radius)
    n = int(R)
    return {
        "progression_1": (SpectralMeasure.lattice(1.0, n, truncation_radius=R),
                          reference_type("arithmetic_progression", 1.0)),
        "progression_2": (SpectralMeasure.lattice(2.0, n // 2, truncation_radius=R),
                          reference_type("arithmetic_progression", 2.0)),
        "lebesgue": (SpectralMeasure.lebesgue(R, 1.0, truncation_radius=R),
                     reference_type("lebesgue")),
        "compact_support": (SpectralMeasure(density_grid=np.array([-1.0, 0.0, 1.0]),
                                            density_values=np.array([0.0, 1.0, 0.0]),
                                            symmetric=True, truncation_radius=R),
                            reference_type("compact_support")),
    }


def contradicts(cert, reference):
    """True when a holding certificate disagrees with the exact reference value."""
    if cert.verdict != HOLDS:
        return False
    ref = reference.value
    if cert.direction == "lower_bound":
        return cert.value > ref
    if cert.direction == "zero":
        return ref != 0.0
    if cert.direction == "infinite":
        return ref != math.inf
    if cert.direction == "exact":
        return cert.value != ref
    if cert.direction == "upper_bound":
        return cert.value < ref
    return False


def issue_suite(mu, reference, L=1.0, delta=None):
    """Every applicable certificate for one zoo member."""
    R = mu.truncation_radius
    W = trend.geometric_windows(1.0, R)
    certs = {"zero_type": zero_type_certificate(mu, None, W, {"kind": "exp_abs", "rate": 0.5})}
    if mu.has_density:
        certs["szego"] = szego_infinite_type(mu, W)
    scan = np.arange(-R / 2, R / 2 + L / 8, L / 8)
    if delta is None:
        m = mu.mass(scan - L, scan + L)
        delta = float(np.min(m)) if np.min(m) > 0 else 1.0
    certs["duffin_schaeffer"] = duffin_schaeffer(mu, L, delta, scan, reference.value)
    if mu.positions.size and not mu.has_density and np.all(mu.positions == np.round(mu.positions)) \
            and np.array_equal(mu.positions, np.arange(mu.positions[0], mu.positions[-1] + 1)):
        masses = dict(zip(mu.positions.tolist(), mu.masses.tolist()))
        certs["koosis"] = koosis_lattice(np.vectorize(lambda k: masses[float(k)]),
                                         int(mu.positions[-1]))
    return certs


def zoo_coherence(radius=1024.0):
    """Issue the suite over the zoo; list contradictions and which of them are flagged."""
    out = {}
    for name, (mu, ref) in model_zoo(radius).items():
        certs = issue_suite(mu, ref)
        rows = {}
        for k, c in certs.items():
            bad = contradicts(c, ref)
            rows[k] = {"verdict": c.verdict, "direction": c.direction, "value": c.value,
                       "contradicts": bad, "flagged": bool(c.flags)}
        out[name] = {"reference": ref.value, "certificates": rows}
    unflagged = [(m, k) for m, v in out.items() for k, r in v["certificates"].items()
                 if r["contradicts"] and not r["flagged"]]
    return out, unflagged
