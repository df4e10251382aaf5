"""Truncated measures on the real line plus symmetric atoms on the imaginary axis.

A :class:`SpectralMeasure` is atoms on R, an optional piecewise-linear density on
a bounded window, and point masses at +-i*y.  Everything is truncated at an
explicit radius and every verdict below is a statement about that truncation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import defaults, quadrature, trend
from .errors import GridError, ValidationError
from .report import Certificate


def _as_pairs(pairs):
    arr = np.asarray(pairs, dtype=float)
    if arr.size == 0:
        return np.zeros(0), np.zeros(0)
    arr = arr.reshape(-1, 2)
    return arr[:, 0].copy(), arr[:, 1].copy()


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0))
    masses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density_grid: np.ndarray = None
    density_values: np.ndarray = None
    imag_heights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    imag_masses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    symmetric: bool = False
    truncation_radius: float = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).ravel()
        mass = np.asarray(self.masses, dtype=float).ravel()
        if pos.shape != mass.shape:
            raise ValidationError("positions and masses differ in length")
        if pos.size and not np.all(np.diff(pos) > 0):
            raise ValidationError("atom positions must be strictly increasing")
        if np.any(~(mass > 0)) or not np.all(np.isfinite(pos)):
            raise ValidationError("atom masses must be positive and positions finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", mass)

        if (self.density_grid is None) != (self.density_values is None):
            raise ValidationError("density needs both grid and values")
        if self.density_grid is not None:
            g = np.asarray(self.density_grid, dtype=float).ravel()
            v = np.asarray(self.density_values, dtype=float).ravel()
            if g.size < 2 or g.shape != v.shape:
                raise ValidationError("density grid and values must match, length >= 2")
            if not np.all(np.diff(g) > 0):
                raise ValidationError("density grid must be strictly increasing")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValidationError("density values must be finite and nonnegative")
            object.__setattr__(self, "density_grid", g)
            object.__setattr__(self, "density_values", v)

        ih = np.asarray(self.imag_heights, dtype=float).ravel()
        im = np.asarray(self.imag_masses, dtype=float).ravel()
        if ih.shape != im.shape:
            raise ValidationError("imaginary heights and masses differ in length")
        if ih.size and (np.any(ih <= 0) or np.any(~(im > 0))):
            raise ValidationError("imaginary atoms need positive heights and masses")
        order = np.argsort(ih, kind="stable")
        object.__setattr__(self, "imag_heights", ih[order])
        object.__setattr__(self, "imag_masses", im[order])

        extent = 0.0
        if pos.size:
            extent = max(extent, float(np.max(np.abs(pos))))
        if self.density_grid is not None:
            extent = max(extent, float(np.max(np.abs(self.density_grid))))
        if self.truncation_radius is None:
            object.__setattr__(self, "truncation_radius", extent)
        else:
            R = float(self.truncation_radius)
            if R < extent:
                raise ValidationError("truncation radius smaller than the support")
            object.__setattr__(self, "truncation_radius", R)

        if self.symmetric:
            ok = np.array_equal(pos, -pos[::-1]) and np.array_equal(mass, mass[::-1])
            if self.density_grid is not None:
                ok = ok and np.array_equal(self.density_grid, -self.density_grid[::-1])
                ok = ok and np.array_equal(self.density_values, self.density_values[::-1])
            if not ok:
                raise ValidationError("measure flagged symmetric but is not")

    # -- constructors -------------------------------------------------------
    @classmethod
    def atoms(cls, positions, masses=None, **kw):
        positions = np.asarray(positions, dtype=float)
        masses = np.ones_like(positions) if masses is None else masses
        return cls(positions=positions, masses=masses, **kw)

    @classmethod
    def lattice(cls, spacing, count, mass=1.0, offset=0.0, **kw):
        """Atoms at offset + spacing*n for |n| <= count (or n + offset, n in -count..count)."""
        n = np.arange(-count, count + 1, dtype=float)
        pos = offset + spacing * n
        sym = offset == 0.0
        kw.setdefault("symmetric", sym)
        return cls(positions=pos, masses=np.full(pos.size, float(mass)), **kw)

    @classmethod
    def lebesgue(cls, radius, density=1.0, **kw):
        kw.setdefault("symmetric", True)
        return cls(density_grid=np.array([-radius, radius]),
                   density_values=np.array([density, density]), **kw)

    # -- basic queries ------------------------------------------------------
    @property
    def has_density(self):
        return self.density_grid is not None

    @property
    def is_empty(self):
        return self.positions.size == 0 and not self.has_density and self.imag_heights.size == 0

    def scaled(self, kappa):
        return SpectralMeasure(
            positions=self.positions, masses=self.masses * kappa,
            density_grid=self.density_grid,
            density_values=None if self.density_values is None else self.density_values * kappa,
            imag_heights=self.imag_heights, imag_masses=self.imag_masses * kappa,
            symmetric=self.symmetric, truncation_radius=self.truncation_radius)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if not self.has_density:
            return np.zeros_like(x)
        return np.interp(x, self.density_grid, self.density_values, left=0.0, right=0.0)

    def atom_mass(self, lo, hi, closed=True):
        """Atomic mass in [lo, hi] (closed) or (lo, hi) (open); vectorized over lo/hi."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.positions.size == 0:
            return np.zeros(np.broadcast(lo, hi).shape)
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        if closed:
            i0 = np.searchsorted(self.positions, lo, side="left")
            i1 = np.searchsorted(self.positions, hi, side="right")
        else:
            i0 = np.searchsorted(self.positions, lo, side="right")
            i1 = np.searchsorted(self.positions, hi, side="left")
        return np.where(i1 > i0, cum[np.maximum(i1, i0)] - cum[i0], 0.0)

    def density_mass(self, lo, hi):
        """Exact integral of the piecewise-linear density over [lo, hi] (vectorized)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if not self.has_density:
            return np.zeros(np.broadcast(lo, hi).shape)
        return self._density_cdf(hi) - self._density_cdf(lo)

    def _density_cdf(self, x):
        g, v = self.density_grid, self.density_values
        seg = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(g))])
        x = np.clip(np.asarray(x, dtype=float), g[0], g[-1])
        i = np.clip(np.searchsorted(g, x, side="right") - 1, 0, g.size - 2)
        dx = x - g[i]
        slope = (v[i + 1] - v[i]) / (g[i + 1] - g[i])
        return seg[i] + v[i] * dx + 0.5 * slope * dx * dx

    def mass(self, lo, hi):
        """Total real-line mass of the closed interval [lo, hi]."""
        return self.atom_mass(lo, hi) + self.density_mass(lo, hi)

    def integrate(self, fn, lo=-math.inf, hi=math.inf, tol=None):
        """Integral of a vectorized function over [lo, hi] against the real part.

        Atoms are summed exactly in ascending |position| order; the density
        part uses Gauss-Legendre panels on the density segments with halving
        to the configured local tolerance.
        """
        tol = defaults.get("quadrature", "local_tol") if tol is None else tol
        total = 0.0
        if self.positions.size:
            sel = (self.positions >= lo) & (self.positions <= hi)
            p, m = self.positions[sel], self.masses[sel]
            order = np.argsort(np.abs(p), kind="stable")
            total += math.fsum((m * fn(p))[order])
        if self.has_density:
            g = self.density_grid
            a, b = max(lo, g[0]), min(hi, g[-1])
            if b > a:
                inner = g[(g > a) & (g < b)]
                edges = np.concatenate([[a], inner, [b]])
                n = defaults.get("quadrature", "gauss_nodes")
                val, _ = quadrature.integrate(lambda x: fn(x) * self.density(x), edges, n, tol)
                total += val
        return total

    # -- serialization ------------------------------------------------------
    def to_dict(self):
        d = {
            "symmetric": bool(self.symmetric),
            "real_atoms": [[float(p), float(m)] for p, m in zip(self.positions, self.masses)],
            "imag_atoms": [[float(h), float(m)] for h, m in zip(self.imag_heights, self.imag_masses)],
            "truncation_radius": float(self.truncation_radius),
        }
        if self.has_density:
            d["real_density"] = {"grid": self.density_grid.tolist(),
                                 "values": self.density_values.tolist()}
        return d

    @classmethod
    def from_dict(cls, d):
        pos, mass = _as_pairs(d.get("real_atoms", []))
        ih, im = _as_pairs(d.get("imag_atoms", []))
        dens = d.get("real_density")
        return cls(
            positions=pos, masses=mass,
            density_grid=None if not dens else dens["grid"],
            density_values=None if not dens else dens["values"],
            imag_heights=ih, imag_masses=im,
            symmetric=bool(d.get("symmetric", False)),
            truncation_radius=d.get("truncation_radius"),
        )

    def __eq__(self, other):
        if not isinstance(other, SpectralMeasure):
            return NotImplemented
        return self.to_dict() == other.to_dict()


# -- growth ----------------------------------------------------------------

@dataclass
class GrowthReport:
    trends: dict
    minimal_s: object
    windows: list

    def to_dict(self):
        return {"minimal_s": self.minimal_s, "windows": list(self.windows),
                "trends": {str(s): t.to_dict() for s, t in self.trends.items()}}


def polynomial_growth_exponent(mu, s_grid, windows, ratio=None):
    """Per-s trend of the partial integrals of dmu/(1+|x|^(2s)) over |x| <= R.

    ``ratio`` overrides the trend threshold; exponents close to the critical
    one change the increments by only a small factor per window.
    """
    s_grid = [float(s) for s in s_grid]
    windows = np.asarray(windows, dtype=float)
    if not s_grid:
        raise ValidationError("empty s_grid")
    if windows.size == 0 or np.any(np.diff(windows) <= 0) or windows[0] <= 0:
        raise ValidationError("windows must be positive and strictly increasing")
    if mu.mass(-windows[-1], windows[-1]) <= 0:
        raise ValidationError("measure has no mass on the largest window")
    trends = {}
    minimal = None
    for s in sorted(s_grid):
        fn = lambda x, s=s: 1.0 / (1.0 + np.abs(x) ** (2 * s))
        partial = [mu.integrate(fn, -R, R) for R in windows]
        t = trend.classify(partial, ratio=ratio)
        trends[s] = t
        if minimal is None and t.verdict == trend.CONVERGED:
            minimal = s
    return GrowthReport(trends, "none" if minimal is None else minimal, windows.tolist())


# -- majorization ----------------------------------------------------------

def interval_half_length(x, delta, k=1.0):
    return k * np.exp(-delta * np.abs(np.asarray(x, dtype=float)))


def _resolution(x, delta):
    # below float resolution an interval contains only a few representable centers
    x = np.asarray(x, dtype=float)
    return np.maximum(interval_half_length(x, delta), 4.0 * np.spacing(np.abs(x) + 1.0))


def check_grid(mu, delta, x_grid, radius=None, fraction=None):
    """Refuse grids that do not resolve the intervals I_x around mu's support.

    Near every atom p (|p| <= radius) the grid must cover [p - h, p + h] with
    gaps of at most fraction*h, h = max(e^{-delta|p|}, float resolution); on a
    density window of radius R the spacing must be at most fraction*e^{-delta R}.
    """
    fraction = defaults.get("measure", "grid_fraction") if fraction is None else fraction
    x = np.unique(np.asarray(x_grid, dtype=float))
    radius = mu.truncation_radius if radius is None else radius
    for p in mu.positions[np.abs(mu.positions) <= radius]:
        h = float(_resolution(p, delta))
        step = fraction * h
        lo = np.searchsorted(x, p - h - step, side="left")
        hi = np.searchsorted(x, p + h + step, side="right")
        pts = x[lo:hi]
        if pts.size == 0 or pts[0] > p - h + step or pts[-1] < p + h - step:
            raise GridError(f"grid does not cover the interval around the atom at {p!r}")
        if pts.size > 1 and np.max(np.diff(pts)) > step * (1 + 1e-9):
            raise GridError(f"grid too coarse near the atom at {p!r}: need spacing <= {step:.3e}")
    if mu.has_density:
        g = mu.density_grid
        a, b = max(g[0], -radius), min(g[-1], radius)
        need = fraction * float(_resolution(max(abs(a), abs(b)), delta))
        pts = x[(x >= a) & (x <= b)]
        if pts.size < 2 or np.max(np.diff(np.concatenate([[a], pts, [b]]))) > need * (1 + 1e-9):
            raise GridError(f"grid too coarse on the density window: need spacing <= {need:.3e}")
    return True


def adaptive_grid(measures, delta, radius=None, per_side=8, background=None):
    """Centers that satisfy :func:`check_grid` for every measure in ``measures``.

    Each atom p gets points p + h*j/per_side for |j| <= per_side+2 (h as in
    check_grid); an optional background array is merged in.
    """
    if isinstance(measures, SpectralMeasure):
        measures = [measures]
    pts = [] if background is None else [np.asarray(background, dtype=float)]
    offs = np.arange(-(per_side + 2), per_side + 3) / per_side
    for mu in measures:
        R = mu.truncation_radius if radius is None else radius
        p = mu.positions[np.abs(mu.positions) <= R]
        h = _resolution(p, delta)
        pts.append((p[:, None] + h[:, None] * offs[None, :]).ravel())
        if mu.has_density:
            g = mu.density_grid
            a, b = max(g[0], -R), min(g[-1], R)
            step = 0.25 * float(_resolution(max(abs(a), abs(b)), delta)) * 0.99
            n = int(math.ceil((b - a) / step)) + 1
            if n > 50_000_000:
                raise GridError("density window needs more than 5e7 grid points at this delta")
            pts.append(np.linspace(a, b, n))
    return np.unique(np.concatenate(pts)) if pts else np.zeros(0)


@dataclass
class MajorizationWitness:
    delta: float
    C: float
    n: int
    violations: list
    checked: int = 0
    worst_ratio: float = 0.0

    @property
    def holds(self):
        return not self.violations

    @property
    def verdict(self):
        return "holds on the tested grid" if self.holds else "fails"

    def to_dict(self):
        return {"delta": self.delta, "C": self.C, "n": self.n, "violations": list(self.violations),
                "checked": self.checked, "worst_ratio": self.worst_ratio, "verdict": self.verdict}


def _majorization_sides(mu, mu_tilde, delta, x):
    h = interval_half_length(x, delta)
    lhs = mu.mass(x - h, x + h)
    rhs_core = mu_tilde.mass(x - 2 * h, x + 2 * h) + np.exp(-2 * delta * np.abs(x))
    return lhs, rhs_core


def majorization_check(mu, mu_tilde, delta, n, C, x_grid, guard=True):
    """Check mu(I_x) <= C (1+|x|)^n (mu~(2I_x) + e^{-2 delta |x|}) at every grid center."""
    if delta <= 0 or C <= 0 or n < 0:
        raise ValidationError("need delta > 0, C > 0, n >= 0")
    x = np.unique(np.asarray(x_grid, dtype=float))
    if guard:
        check_grid(mu, delta, x)
    lhs, core = _majorization_sides(mu, mu_tilde, delta, x)
    rhs = C * (1 + np.abs(x)) ** n * core
    bad = lhs > rhs
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    return MajorizationWitness(float(delta), float(C), int(n), x[bad].tolist(), int(x.size),
                               float(np.max(ratio)) if ratio.size else 0.0)


def majorization_search(mu, mu_tilde, x_grid, deltas, ns, Cs):
    """First (delta, n, C) on the lattice (delta ascending outermost) with no violations."""
    x = np.unique(np.asarray(x_grid, dtype=float))
    tried = 0
    for delta in deltas:
        check_grid(mu, delta, x)
        lhs, core = _majorization_sides(mu, mu_tilde, delta, x)
        for n in ns:
            growth = (1 + np.abs(x)) ** n * core
            for C in Cs:
                tried += 1
                if np.all(lhs <= C * growth):
                    return majorization_check(mu, mu_tilde, delta, n, C, x)
    return None


def weak_equivalence_check(mu, nu, delta, n, C, x_grid, C_back=None, n_back=None):
    """Majorization in both directions; returns (forward, backward, verdict)."""
    fwd = majorization_check(mu, nu, delta, n, C, x_grid)
    bwd = majorization_check(nu, mu, delta, n if n_back is None else n_back,
                             C if C_back is None else C_back, x_grid)
    verdict = "weakly equivalent on tested grid" if fwd.holds and bwd.holds else "not shown"
    return fwd, bwd, verdict


# -- tails -----------------------------------------------------------------

@dataclass
class TailDifference:
    """psi(l) = (mu_R - mu_0)((l, inf)) sampled on a grid, with the exact step data."""

    grid: np.ndarray
    values: np.ndarray
    breakpoints: np.ndarray
    radius: float
    _mu_r: SpectralMeasure = None
    _mu_0: SpectralMeasure = None

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return _tail(self._mu_r, lam, self.radius) - _tail(self._mu_0, lam, self.radius)

    @property
    def has_density(self):
        return self._mu_r.has_density or self._mu_0.has_density

    def to_dict(self):
        return {"grid": self.grid.tolist(), "values": self.values.tolist(),
                "breakpoints": self.breakpoints.tolist(), "radius": self.radius}


def _tail(mu, lam, radius):
    """mu((lam, radius]) for the real part (open at lam)."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros(lam.shape)
    if mu.positions.size:
        suffix = np.concatenate([np.cumsum(mu.masses[::-1])[::-1], [0.0]])
        idx = np.searchsorted(mu.positions, lam, side="right")
        cut = np.searchsorted(mu.positions, radius, side="right")
        out += np.where(idx < cut, suffix[np.minimum(idx, cut)] - suffix[cut], 0.0)
    if mu.has_density:
        out += mu.density_mass(np.minimum(lam, radius), radius)
    return np.where(lam >= radius, 0.0, out)


def tail_difference(mu_r, mu_0, lam_grid):
    """Sample psi(l) = integral over (l, inf) of d(mu_R - mu_0)."""
    if not math.isclose(mu_r.truncation_radius, mu_0.truncation_radius, rel_tol=0, abs_tol=0):
        raise ValidationError("tail_difference needs a common truncation radius")
    R = mu_r.truncation_radius
    grid = np.asarray(lam_grid, dtype=float)
    if grid.size and np.any(np.diff(grid) <= 0):
        raise ValidationError("lambda grid must be increasing")
    brk = np.union1d(mu_r.positions, mu_0.positions)
    for mu in (mu_r, mu_0):
        if mu.has_density:
            brk = np.union1d(brk, mu.density_grid)
    brk = brk[(brk >= 0) & (brk <= R)]
    psi = TailDifference(grid, np.zeros(0), brk, R, mu_r, mu_0)
    psi.values = psi(grid)
    return psi


def _weighted_tail_integral(psi, delta, upper):
    """Integral over [0, upper] of e^{delta l} |psi(l)|, exact on constant pieces."""
    edges = np.union1d(psi.breakpoints[psi.breakpoints < upper], [0.0, upper])
    edges = edges[(edges >= 0) & (edges <= upper)]
    a, b = edges[:-1], edges[1:]
    if psi.has_density:
        n = defaults.get("quadrature", "gauss_nodes")
        val, _ = quadrature.integrate(lambda l: np.exp(delta * l) * np.abs(psi(l)), edges, n)
        return val
    mid = 0.5 * (a + b)
    level = np.abs(psi(mid))
    pieces = level * (np.exp(delta * b) - np.exp(delta * a)) / delta
    return math.fsum(pieces)


def proximity_test(psi, delta, windows=None):
    """Weighted tail integral of psi with a finite/growing verdict."""
    if delta <= 0:
        raise ValidationError("delta must be positive")
    R = psi.radius
    nonzero = [float(b) for b in np.concatenate([[0.0], psi.breakpoints])
               if abs(float(psi(np.array([b]))[0])) > 0]
    support_end = max(nonzero) if nonzero else 0.0
    # psi is right-continuous; its support ends at the first breakpoint after the last nonzero piece
    later = psi.breakpoints[psi.breakpoints > support_end]
    support_end = float(later[0]) if nonzero and later.size else support_end
    params = {"delta": delta, "radius": R}
    if support_end < R:
        value = _weighted_tail_integral(psi, delta, support_end) if nonzero else 0.0
        return Certificate("proximity", "tail-proximity", "finite", value, "exact", params,
                           {"support_end": support_end}, R)
    windows = np.linspace(R / 5, R, 5) if windows is None else np.asarray(windows, dtype=float)
    partial = [_weighted_tail_integral(psi, delta, w) for w in windows]
    t = trend.classify(partial)
    verdict = {trend.GROWING: "growing", trend.DIVERGING: "growing",
               trend.CONVERGED: "finite"}.get(t.verdict, "inconclusive")
    return Certificate("proximity", "tail-proximity", verdict, partial[-1], "lower_bound", params,
                       {"windows": windows.tolist(), "trend": t.to_dict(),
                        "support_end": support_end, "reaches_radius": True}, R)


def imag_tail_test(mu, delta=None, mode="gaussian", x=None):
    """Sum of m_k w(y_k) over imaginary atoms, w = e^{delta y^2} or e^{x y}."""
    if isinstance(mu, SpectralMeasure):
        y, m = mu.imag_heights, mu.imag_masses
    else:
        y, m = _as_pairs(mu)
        order = np.argsort(y, kind="stable")
        y, m = y[order], m[order]
    if mode == "gaussian":
        if delta is None or delta <= 0:
            raise ValidationError("gaussian mode needs delta > 0")
        logw = delta * y * y
    elif mode == "exponential":
        if x is None:
            raise ValidationError("exponential mode needs x")
        logw = x * y
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    params = {"delta": delta, "mode": mode, "x": x}
    with np.errstate(over="ignore"):
        terms = [float(mk) * math.exp(lw) if lw < 709 else math.inf
                 for mk, lw in zip(m.tolist(), logw.tolist())]
    value = 0.0
    partial = []
    for term in terms:  # ascending height; plain left-to-right for bit reproducibility
        value = value + term
        partial.append(value)
    if len(terms) < 4:
        return Certificate("imag-tail", "imaginary-tail", "finite", value, "exact", params,
                           {"partials": partial}, float(y[-1]) if y.size else 0.0)
    t = trend.classify(partial)
    verdict = "finite" if t.verdict == trend.CONVERGED else (
        "growing" if t.unbounded else "inconclusive")
    return Certificate("imag-tail", "imaginary-tail", verdict, value, "exact", params,
                       {"partials": partial, "trend": t.to_dict()}, float(y[-1]))
