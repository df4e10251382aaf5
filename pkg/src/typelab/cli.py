"""The ``typelab`` command line: one subcommand per module operation.

Every run writes ``report.json`` (results plus the echoed defaults, no
timestamps), ``data.csv`` when the operation produces a curve, and a
``run-log.json`` sidecar with the version, mode, timing and input digests.
Exit codes: 0 success, 1 internal error, 2 validation error, 3 when
``--require-verdict`` is set and every verdict is inconclusive.
"""

import argparse
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import certificates, defaults, measures, nazarov, products, serialize, sharpness, sturm, trend
from . import weights as weights_mod
from .errors import TypelabError, ValidationError
from .report import jsonable

EXIT_OK, EXIT_INTERNAL, EXIT_VALIDATION, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class Outcome:
    """What a handler returns: a JSON-able result and optional CSV columns."""

    def __init__(self, result, data=None):
        self.result = result
        self.data = data


# -- argument helpers ----------------------------------------------------------------

def _complex(text):
    try:
        return complex(text.replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _function(text):
    """A function spec given inline as JSON or as a path to a JSON file."""
    spec = serialize.read_json(text) if Path(text).is_file() else json.loads(text)
    return certificates.function_from_spec(spec), spec


def _eps(text):
    if text == "inverse_log":
        return sharpness.EpsilonRate.inverse_log()
    if text.startswith("power:"):
        return sharpness.EpsilonRate.power(float(text.split(":", 1)[1]))
    raise ValidationError(f"unknown eps {text!r}; use inverse_log or power:<p>")


def _test_function(text):
    """sinc:<b>:<power>[:odd] or zero."""
    if text == "zero":
        return products.TestFunction.zero()
    parts = text.split(":")
    if parts[0] != "sinc" or len(parts) not in (3, 4):
        raise ValidationError(f"unknown test function {text!r}; use sinc:<b>:<power>[:odd]")
    return products.TestFunction.sinc_power(float(parts[1]), int(parts[2]),
                                            odd=len(parts) == 4 and parts[3] == "odd")


def _windows(args, R, start=1.0):
    if getattr(args, "windows", None):
        return np.asarray(args.windows, dtype=float)
    return trend.geometric_windows(start, max(R, 4 * start))


# -- measure ---------------------------------------------------------------------------

def cmd_measure_growth(args):
    mu = serialize.load_measure(args.measure)
    W = _windows(args, mu.truncation_radius)
    rep = measures.polynomial_growth_exponent(mu, args.s, W, args.ratio)
    return Outcome(rep)


def cmd_measure_majorize(args):
    mu = serialize.load_measure(args.measure)
    mt = serialize.load_measure(args.tilde)
    x = measures.adaptive_grid([mu, mt], args.delta)
    w = measures.majorization_check(mu, mt, args.delta, args.n, args.C, x)
    return Outcome(w)


def cmd_measure_equiv(args):
    mu = serialize.load_measure(args.measure)
    nu = serialize.load_measure(args.other)
    x = measures.adaptive_grid([mu, nu], args.delta)
    fwd, bwd, verdict = measures.weak_equivalence_check(mu, nu, args.delta, args.n, args.C, x)
    return Outcome({"forward": fwd, "backward": bwd, "verdict": verdict})


def cmd_measure_proximity(args):
    mu_r = serialize.load_measure(args.measure)
    mu_0 = serialize.load_measure(args.reference)
    R = mu_r.truncation_radius
    grid = np.linspace(0.0, R, args.points)
    psi = measures.tail_difference(mu_r, mu_0, grid)
    cert = measures.proximity_test(psi, args.delta)
    return Outcome(cert, {"lambda": psi.grid, "psi": psi.values})


def cmd_measure_imagtail(args):
    mu = serialize.load_measure(args.measure)
    return Outcome(measures.imag_tail_test(mu, args.delta, args.tail_mode, args.x))


# -- entire -----------------------------------------------------------------------------

def cmd_entire_eval(args):
    F = serialize.load_product(args.zeros)
    z = np.array(args.z, dtype=complex)
    if np.all(z.imag == 0):
        z = z.real
    v = products.eval_product(F, z, N=args.N, tail_policy=args.tail_policy, allow_zeros=True)
    val = np.asarray(v.value)
    data = {"z_re": np.real(z), "z_im": np.imag(z), "value_re": np.real(val), "value_im": np.imag(val),
            "tail_bound": np.asarray(v.tail_bound) * np.ones(z.shape)}
    return Outcome(v, data)


def cmd_entire_krein(args):
    F = serialize.load_product(args.zeros)
    W, spec = _function(args.weight)
    cert = products.krein_sum(F, W, N=args.N, tail_policy=args.tail_policy)
    cert.params["weight"] = spec
    return Outcome(cert)


def cmd_entire_annihilate(args):
    B = serialize.load_product(args.zeros)
    f = _test_function(args.f)
    return Outcome(products.annihilation_residual(B, f, N=args.N, tolerance=args.tolerance,
                                                  tail_policy=args.tail_policy))


def cmd_entire_counting(args):
    mu = serialize.load_measure(args.measure)
    grid = np.asarray(args.grid, dtype=float)
    prof = products.counting(mu.positions, grid, args.c)
    return Outcome(prof, {"R": prof.grid, "n": prof.n, "N": prof.N})


def cmd_entire_exclude(args):
    mu = serialize.load_measure(args.measure)
    return Outcome(products.krein_exclusion(mu.positions, args.c, args.A, args.R_max))


def cmd_entire_shift(args):
    B = serialize.load_product(args.zeros)
    shifts = None
    if args.shift is not None:
        sel = B.positive_zeros[B.positive_zeros > args.M]
        shifts = np.full(sel.size, args.shift)
    rep = products.shift_zeros(B, None, args.M, args.delta, shifts)
    return Outcome(rep)


def cmd_entire_lq7(args):
    eta = Fraction(args.eta).limit_denominator(10 ** 12)
    ns, G, rep = products.build_lq7(lambda k: eta, args.K)
    bad = ns.check()
    if args.emit:
        serialize.save_product(Path(args.out) / "G.json", G)
    return Outcome({"nodes": ns, "derivative": rep, "node_identities_exact": not bad},
                   {"node": np.sort(ns.nodes()), "ratio": rep.ratios})


# -- weights -------------------------------------------------------------------------------

def cmd_weights_transform(args):
    W = serialize.load_weight(args.weight)
    grid = np.linspace(args.grid[0], args.grid[1], int(args.grid[2]))
    mu = serialize.load_measure(args.measure) if args.measure else None
    tw = weights_mod.weight_transform(W, args.delta, args.p, grid, mu)
    return Outcome({"l2_trend": tw.l2_trend, "delta": args.delta, "p": args.p},
                   {"x": tw.grid, "W": tw.values})


def _sampled(d):
    g = np.asarray(d["grid"], dtype=float)
    re = np.asarray(d.get("re", d.get("values")), dtype=float)
    im = np.asarray(d.get("im", np.zeros_like(re)), dtype=float)
    return lambda x: np.interp(x, g, re) + 1j * np.interp(x, g, im)


def cmd_weights_bakan(args):
    d = serialize.read_json(args.input)
    f = _sampled(d["f"])
    hs = [_sampled(h) for h in d["approximants"]]
    grid = np.asarray(d.get("check_grid", d["f"]["grid"]), dtype=float)
    rep = weights_mod.bakan_weight(f, hs, args.n, args.K, tuple(args.s), grid)
    return Outcome(rep, {"x": grid, "W": rep.weight(grid)})


# -- nazarov ----------------------------------------------------------------------------------

def cmd_nazarov_check(args):
    X = serialize.load_diffeo(args.diffeo)
    return Outcome(nazarov.gamma_check(X))


def cmd_nazarov_build(args):
    X = serialize.load_diffeo(args.diffeo)
    mu = nazarov.build_measure(X, args.c, args.K)
    path = Path(args.out) / "measure.json"
    serialize.save_measure(path, mu)
    return Outcome({"diffeo": X, "c": args.c, "K": args.K, "atoms": int(mu.positions.size),
                    "measure_file": path.name})


def cmd_nazarov_verify(args):
    X = serialize.load_diffeo(args.diffeo)
    mu = nazarov.build_measure(X, args.c, args.K)
    win = nazarov.SchwartzWindow(args.window[0], args.window[1], args.c)
    t = np.linspace(0.0, args.t_max, args.points)
    fit = tuple(args.fit) if args.fit else None
    rep = nazarov.poisson_decay_test(mu, win, t, fit_range=fit)
    return Outcome(rep, {"t": rep.t, "D": rep.D, "abs_D": np.abs(rep.D)})


def cmd_nazarov_stable(args):
    X = serialize.load_diffeo(args.diffeo)
    return Outcome(nazarov.stable_orthogonality_certificate(X, args.c, args.R_max, args.A))


# -- sharpness ------------------------------------------------------------------------------------

def cmd_sharpness_thm15i(args):
    res = sharpness.build_thm15i(_eps(args.eps), args.n_max)
    keys, rows = res.rows()
    return Outcome(res, {k: np.array([r[i] for r in rows], dtype=float) for i, k in enumerate(keys)})


def cmd_sharpness_lq1(args):
    res = sharpness.build_lq1(_eps(args.eps), args.k_max, args.y1)
    return Outcome(res)


def cmd_sharpness_thm15ii(args):
    eps = _eps(args.eps)
    lq1 = sharpness.build_lq1(eps, args.k_max, args.y1)
    res = sharpness.build_thm15ii(eps, args.K, lq1)
    if args.emit:
        for name in ("Lambda", "Lambda_star"):
            serialize.save_measure(Path(args.out) / f"{name}.json",
                                   measures.SpectralMeasure.atoms(np.unique(getattr(res, name))))
    return Outcome(res)


def cmd_sharpness_logint(args):
    eps = _eps(args.eps)
    res = sharpness.build_thm15i(eps, args.n_max)
    # log R at the step ends b_n: one window per construction step
    log_windows = args.log_windows or [float(r["b"]) for r in res.steps]
    if args.weight == "phi":
        w = sharpness.phi_weight(res.f)
    elif args.weight == "psi":
        w = sharpness.psi_weight(res.f, eps)
    elif args.weight == "exp":
        w = sharpness.LogWeight.exponential()
    else:
        w = sharpness.LogWeight.constant()
    return Outcome(sharpness.log_integral_report(w, log_windows=log_windows))


# -- certify ----------------------------------------------------------------------------------------

STATEMENTS = ("reference", "zero-type", "szego", "duffin-schaeffer", "koosis", "annihilator",
              "zoo", "batch")


def _certify_one(statement, p, out):
    """Issue one certificate from a parameter mapping (CLI flags or a batch entry)."""
    if statement == "reference":
        return certificates.reference_type(p["model"], p.get("ell", 1.0))
    if statement == "zoo":
        res, unflagged = certificates.zoo_coherence(p.get("radius", 1024.0))
        return {"suite": res, "unflagged_contradictions": unflagged,
                "verdict": "holds" if not unflagged else "fails"}
    mu = serialize.load_measure(p["measure"])
    if statement == "zero-type":
        spec = p.get("K") or {"kind": "exp_abs", "rate": 0.5}
        spec = json.loads(spec) if isinstance(spec, str) else spec
        return certificates.zero_type_certificate(mu, None, K_spec=spec)
    if statement == "szego":
        return certificates.szego_infinite_type(mu)
    if statement == "duffin-schaeffer":
        L = float(p.get("L", 1.0))
        R = mu.truncation_radius
        grid = np.arange(-R / 2, R / 2 + L / 8, L / 8)
        return certificates.duffin_schaeffer(mu, L, float(p["delta"]), grid, p.get("reference"))
    if statement == "koosis":
        omega = p.get("omega", "ones")
        if omega == "ones":
            if not (mu.positions.size and np.all(mu.positions == np.round(mu.positions))):
                raise ValidationError("koosis needs a measure on integers")
            masses = dict(zip(mu.positions.tolist(), mu.masses.tolist()))
            fn = np.vectorize(lambda k: masses.get(float(k), 0.0))
            N = int(p.get("N") or np.max(np.abs(mu.positions)))
            return certificates.koosis_lattice(fn, N)
        fn, _ = _function(omega) if isinstance(omega, str) else (certificates.function_from_spec(omega), None)
        N = int(p.get("N") or 1024)
        return certificates.koosis_lattice(fn, N)
    if statement == "annihilator":
        H = serialize.load_product(p["zeros"])
        fams = {name: _test_function(name) for name in p["f"]}
        return certificates.annihilator_lower_bound(mu, H, fams, float(p["a"]), p.get("N"))
    raise ValidationError(f"unknown statement {statement!r}; expected one of {STATEMENTS}")


def cmd_certify(args):
    if args.statement and args.statement_opt and args.statement != args.statement_opt:
        raise ValidationError("conflicting statements given positionally and with --statement")
    args.statement = args.statement or args.statement_opt
    if args.statement is None:
        raise ValidationError("certify needs a statement")
    del args.statement_opt
    if args.statement == "batch":
        if not args.manifest:
            raise ValidationError("certify batch needs --manifest")
        entries = serialize.read_json(args.manifest)
        entries = entries.get("entries", entries) if isinstance(entries, dict) else entries
        base = Path(args.manifest).parent
        for e in entries:
            for key in ("measure", "zeros"):
                if key in e:
                    e[key] = str(base / e[key]) if not Path(e[key]).is_absolute() else e[key]
                    serialize.read_json(e[key])
        return Outcome({"certificates": [
            {"statement": e["statement"], "certificate": _certify_one(e["statement"], e, args.out)}
            for e in entries]})
    p = {k: v for k, v in vars(args).items() if v is not None}
    if args.f:
        p["f"] = args.f
    return Outcome(_certify_one(args.statement, p, args.out))


# -- sturm-liouville -------------------------------------------------------------------------------

def _problem(args):
    q = serialize.load_potential(args.potential) if args.potential else sturm.Potential()
    return sturm.SLProblem(args.a, q, args.h, args.margin)


def _xgrid(args, top):
    return np.linspace(0.0, top, args.points)


def cmd_sl_omega(args):
    P = _problem(args)
    x = _xgrid(args, P.usable if args.x_max is None else args.x_max)
    data = {"x": x}
    for lam in args.lam:
        w = np.asarray(sturm.solve_omega(P, lam, x), dtype=complex)
        tag = f"{lam.real:g}" if lam.imag == 0 else f"{lam.real:g}{lam.imag:+g}i"
        data[f"re_omega[{tag}]"] = w.real
        data[f"im_omega[{tag}]"] = w.imag
    return Outcome({"problem": P, "lambda": [complex(l) for l in args.lam]}, data)


def cmd_sl_bound(args):
    P = _problem(args)
    x = _xgrid(args, P.usable if args.x_max is None else args.x_max)
    reports = {f"{l}": sturm.omega_bound_check(P, l, x) for l in args.lam}
    holds = all(r.holds for r in reports.values())
    return Outcome({"problem": P, "verdict": "holds" if holds else "fails",
                    "min_slack": {k: float(np.min(np.where(r.vacuous, np.inf, r.slack)))
                                  for k, r in reports.items()},
                    "vacuous_points": {k: int(np.sum(r.vacuous)) for k, r in reports.items()}})


def cmd_sl_weyl(args):
    P = _problem(args)
    f = serialize.load_bump(args.f)
    lam = np.linspace(args.lam_range[0], args.lam_range[1], int(args.lam_range[2]))
    W = np.asarray(sturm.weyl_transform(f, P, lam))
    return Outcome({"problem": P, "f": f}, {"lambda": lam, "Wf": W.real})


def cmd_sl_parseval(args):
    P = _problem(args)
    f = serialize.load_bump(args.f)
    mu = serialize.load_measure(args.measure)
    rep = sturm.parseval_check(f, P, mu, tol=args.tolerance)
    verdict = "holds" if rep.relative_error <= args.tolerance else "fails"
    return Outcome({"problem": P, "f": f, "parseval": rep, "verdict": verdict})


def _phi_grid(x_max, points):
    near = np.linspace(0.0, 1e-2, 9)
    return np.unique(np.concatenate([near, np.linspace(0.0, x_max, points)]))


def cmd_sl_phi(args):
    mu = serialize.load_measure(args.measure)
    x = _phi_grid(args.x_max, args.points)
    ph = sturm.phi_transform(mu, x, a=args.a)
    return Outcome({"a": args.a, "x_max": args.x_max}, {"x": ph.x, "Phi": ph.values})


def cmd_sl_glcheck(args):
    if args.phi:
        cols = serialize.read_csv(args.phi)
        ph = sturm.PhiFunction(cols["x"], cols["Phi"], a=args.a)
    else:
        mu = serialize.load_measure(args.measure)
        top = args.x_max if args.x_max is not None else 2 * args.a * 0.95
        ph = sturm.phi_transform(mu, _phi_grid(top, args.points), a=args.a)
    return Outcome(sturm.gl_check(ph, args.h_expected, args.a))


def cmd_sl_pairing(args):
    mu = serialize.load_measure(args.measure)
    f = serialize.load_bump(args.f)
    rep = sturm.pairing_test(mu, f, args.sigma, args.a)
    return Outcome(rep)


# -- parser -------------------------------------------------------------------------------------------

def _common(p):
    p.add_argument("--out", default="typelab-out", help="output directory")
    p.add_argument("--require-verdict", action="store_true",
                   help="exit 3 when every verdict is inconclusive")
    p.add_argument("--mode", choices=("strict", "parallel"), default="strict")
    p.add_argument("--seed", type=int, default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="typelab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=defaults.VERSION)
    top = ap.add_subparsers(dest="group", required=True)

    def sub(group, name, fn, **kw):
        p = group.add_parser(name, **kw)
        _common(p)
        p.set_defaults(handler=fn)
        return p

    g = top.add_parser("measure").add_subparsers(dest="op", required=True)
    p = sub(g, "growth", cmd_measure_growth)
    p.add_argument("--measure", required=True)
    p.add_argument("--s", type=float, nargs="+", default=[0.5, 1.0, 1.5])
    p.add_argument("--windows", type=float, nargs="+")
    p.add_argument("--ratio", type=float)
    p = sub(g, "majorize", cmd_measure_majorize)
    p.add_argument("--measure", required=True)
    p.add_argument("--tilde", required=True)
    for name, typ in (("--delta", float), ("--n", float), ("--C", float)):
        p.add_argument(name, type=typ, required=True)
    p = sub(g, "equiv", cmd_measure_equiv)
    p.add_argument("--measure", required=True)
    p.add_argument("--other", required=True)
    for name, typ in (("--delta", float), ("--n", float), ("--C", float)):
        p.add_argument(name, type=typ, required=True)
    p = sub(g, "proximity", cmd_measure_proximity)
    p.add_argument("--measure", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--points", type=int, default=513)
    p = sub(g, "imagtail", cmd_measure_imagtail)
    p.add_argument("--measure", required=True)
    p.add_argument("--tail-mode", dest="tail_mode", default="gaussian",
                   choices=("gaussian", "exponential"))
    p.add_argument("--delta", type=float)
    p.add_argument("--x", type=float)

    g = top.add_parser("entire").add_subparsers(dest="op", required=True)
    p = sub(g, "eval", cmd_entire_eval)
    p.add_argument("--zeros", required=True)
    p.add_argument("--tail-policy", dest="tail_policy", choices=products.TAIL_POLICIES)
    p.add_argument("--z", type=_complex, nargs="+", required=True)
    p.add_argument("--N", type=int)
    p = sub(g, "krein", cmd_entire_krein)
    p.add_argument("--zeros", required=True)
    p.add_argument("--tail-policy", dest="tail_policy", choices=products.TAIL_POLICIES)
    p.add_argument("--weight", required=True, help="function spec JSON or file")
    p.add_argument("--N", type=int)
    p = sub(g, "annihilate", cmd_entire_annihilate)
    p.add_argument("--zeros", required=True)
    p.add_argument("--tail-policy", dest="tail_policy", choices=products.TAIL_POLICIES)
    p.add_argument("--f", required=True, help="sinc:<b>:<power>[:odd] or zero")
    p.add_argument("--N", type=int)
    p.add_argument("--tolerance", type=float)
    p = sub(g, "counting", cmd_entire_counting)
    p.add_argument("--measure", required=True)
    p.add_argument("--grid", type=float, nargs="+", required=True)
    p.add_argument("--c", type=float)
    p = sub(g, "exclude", cmd_entire_exclude)
    p.add_argument("--measure", required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--A", type=float, nargs="+", default=[1.0, 10.0, 100.0])
    p.add_argument("--R-max", dest="R_max", type=float, required=True)
    p = sub(g, "shift", cmd_entire_shift)
    p.add_argument("--zeros", required=True)
    p.add_argument("--M", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--shift", type=float)
    p = sub(g, "lq7", cmd_entire_lq7)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--emit", action="store_true", help="write G.json")

    g = top.add_parser("weights").add_subparsers(dest="op", required=True)
    p = sub(g, "transform", cmd_weights_transform)
    p.add_argument("--weight", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--grid", type=float, nargs=3, required=True, metavar=("LO", "HI", "N"))
    p.add_argument("--measure")
    p = sub(g, "bakan", cmd_weights_bakan)
    p.add_argument("--input", required=True, help="JSON with sampled f and approximants")
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--K", type=int)
    p.add_argument("--s", type=float, nargs="*", default=[])

    g = top.add_parser("nazarov").add_subparsers(dest="op", required=True)
    p = sub(g, "check", cmd_nazarov_check)
    p.add_argument("--diffeo", required=True)
    for name, fn in (("build", cmd_nazarov_build), ("verify", cmd_nazarov_verify)):
        p = sub(g, name, fn)
        p.add_argument("--diffeo", required=True)
        p.add_argument("--c", type=float, default=1.0)
        p.add_argument("--K", type=int, required=True)
        if name == "verify":
            p.add_argument("--t-max", dest="t_max", type=float, default=500.0)
            p.add_argument("--points", type=int, default=2001)
            p.add_argument("--window", type=float, nargs=2, default=[2.0, 5.0])
            p.add_argument("--fit", type=float, nargs=2)
    p = sub(g, "stable", cmd_nazarov_stable)
    p.add_argument("--diffeo", required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--R-max", dest="R_max", type=float, default=1e4)
    p.add_argument("--A", type=float, nargs="+", default=[1.0, 10.0, 100.0])

    g = top.add_parser("sharpness").add_subparsers(dest="op", required=True)
    p = sub(g, "thm15i", cmd_sharpness_thm15i)
    p.add_argument("--eps", default="inverse_log")
    p.add_argument("--n-max", dest="n_max", type=int, default=8)
    p = sub(g, "lq1", cmd_sharpness_lq1)
    p.add_argument("--eps", default="inverse_log")
    p.add_argument("--k-max", dest="k_max", type=int, default=8)
    p.add_argument("--y1", type=float, default=10.0)
    p = sub(g, "thm15ii", cmd_sharpness_thm15ii)
    p.add_argument("--eps", default="inverse_log")
    p.add_argument("--K", type=int, default=200)
    p.add_argument("--k-max", dest="k_max", type=int, default=8)
    p.add_argument("--y1", type=float, default=10.0)
    p.add_argument("--emit", action="store_true")
    p = sub(g, "logint", cmd_sharpness_logint)
    p.add_argument("--weight", choices=("phi", "psi", "exp", "const"), required=True)
    p.add_argument("--eps", default="inverse_log")
    p.add_argument("--n-max", dest="n_max", type=int, default=8)
    p.add_argument("--log-windows", dest="log_windows", type=float, nargs="+")

    p = top.add_parser("certify")
    _common(p)
    p.set_defaults(handler=cmd_certify)
    p.add_argument("statement", nargs="?", choices=STATEMENTS)
    p.add_argument("--statement", dest="statement_opt", choices=STATEMENTS,
                   help="alternative to the positional statement")
    p.add_argument("--measure")
    p.add_argument("--zeros")
    p.add_argument("--manifest")
    p.add_argument("--model")
    p.add_argument("--ell", type=float)
    p.add_argument("--K", help="majorant function spec (JSON)")
    p.add_argument("--omega", help="'ones' or a function spec")
    p.add_argument("--N", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--reference", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--f", nargs="+", help="test functions sinc:<b>:<power>[:odd]")
    p.add_argument("--radius", type=float)

    g = top.add_parser("sl").add_subparsers(dest="op", required=True)

    def sl(name, fn, problem=True):
        p = sub(g, name, fn)
        if problem:
            p.add_argument("--potential")
            p.add_argument("--a", type=float, required=True)
            p.add_argument("--h", type=float, default=0.0)
            p.add_argument("--margin", type=float, default=0.0)
        return p

    p = sl("omega", cmd_sl_omega)
    p.add_argument("--lam", type=_complex, nargs="+", required=True)
    p.add_argument("--x-max", dest="x_max", type=float)
    p.add_argument("--points", type=int, default=101)
    p = sl("bound", cmd_sl_bound)
    p.add_argument("--lam", type=_complex, nargs="+", required=True)
    p.add_argument("--x-max", dest="x_max", type=float)
    p.add_argument("--points", type=int, default=101)
    p = sl("weyl", cmd_sl_weyl)
    p.add_argument("--f", required=True)
    p.add_argument("--lam-range", dest="lam_range", type=float, nargs=3, default=[0.0, 50.0, 201],
                   metavar=("LO", "HI", "N"))
    p = sl("parseval", cmd_sl_parseval)
    p.add_argument("--f", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p = sl("phi", cmd_sl_phi, problem=False)
    p.add_argument("--measure", required=True)
    p.add_argument("--a", type=float)
    p.add_argument("--x-max", dest="x_max", type=float, required=True)
    p.add_argument("--points", type=int, default=401)
    p = sl("glcheck", cmd_sl_glcheck, problem=False)
    p.add_argument("--phi", help="CSV written by 'sl phi'")
    p.add_argument("--measure")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--h-expected", dest="h_expected", type=float)
    p.add_argument("--x-max", dest="x_max", type=float)
    p.add_argument("--points", type=int, default=401)
    p = sl("pairing", cmd_sl_pairing, problem=False)
    p.add_argument("--measure", required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--a", type=float)
    p.add_argument("--sigma", type=float, nargs="+")

    p = top.add_parser("run", help="execute a JSON job manifest")
    p.add_argument("manifest")
    p.add_argument("--require-verdict", action="store_true")
    return ap


# -- manifests, artifacts and exit codes ------------------------------------------------------------

INPUT_KEYS = ("measure", "tilde", "other", "reference", "zeros", "diffeo", "potential", "f",
              "weight", "input", "phi", "manifest")


def manifest_argv(manifest, base=Path(".")):
    """argv for a manifest {command, inputs, params, output_dir, mode, seed}."""
    if "command" not in manifest:
        raise ValidationError("manifest needs a 'command'")
    argv = str(manifest["command"]).split()
    for key, path in manifest.get("inputs", {}).items():
        full = Path(path) if Path(path).is_absolute() else base / path
        serialize.read_json(full) if full.suffix == ".json" else None
        if not full.is_file():
            raise ValidationError(f"input file not found: {full}")
        argv += [f"--{key}", str(full)]
    for key, val in manifest.get("params", {}).items():
        flag = f"--{key.replace('_', '-')}"
        if isinstance(val, bool):
            argv += [flag] if val else []
        elif isinstance(val, (list, tuple)):
            argv += [flag, *map(str, val)]
        else:
            argv += [flag, str(val)]
    if "output_dir" in manifest:
        out = Path(manifest["output_dir"])
        argv += ["--out", str(out if out.is_absolute() else base / out)]
    if manifest.get("mode"):
        argv += ["--mode", manifest["mode"]]
    if manifest.get("seed") is not None:
        argv += ["--seed", str(manifest["seed"])]
    return argv


def _verdicts(obj):
    """Outermost verdicts only: trends nested inside a verdict-bearing result are evidence."""
    out = []
    if isinstance(obj, dict):
        if isinstance(obj.get("verdict"), str):
            return [obj["verdict"]]
        for v in obj.values():
            out.extend(_verdicts(v))
    elif isinstance(obj, list):
        for v in obj:
            out.extend(_verdicts(v))
    return out


def _inputs(args):
    found = {}
    for key in INPUT_KEYS:
        val = getattr(args, key, None)
        if isinstance(val, str) and Path(val).is_file():
            found[key] = {"path": val, "sha256": serialize.digest(val)}
    return found


def _params(args):
    skip = {"handler", "group", "op", "out"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def threads():
    """Parallelism cap from TYPELAB_THREADS (None when unset)."""
    raw = os.environ.get("TYPELAB_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"TYPELAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError("TYPELAB_THREADS must be a positive integer")
    return n


def execute(args):
    """Run a parsed command and write its artifacts; returns the exit code."""
    started = time.time()
    out = Path(args.out)
    nthreads = threads()
    if args.seed is not None:
        np.random.seed(args.seed)
    outcome = args.handler(args)
    command = " ".join(x for x in (args.group, getattr(args, "op", None)) if x)
    result = jsonable(outcome.result)
    report = {"command": command, "version": defaults.VERSION, "params": jsonable(_params(args)),
              "defaults": defaults.snapshot(), "result": result}
    serialize.write_json(out / "report.json", report)
    if outcome.data is not None:
        serialize.write_csv(out / "data.csv", outcome.data)
    log = {"version": defaults.VERSION, "mode": args.mode, "command": command,
           "threads": nthreads, "inputs": _inputs(args), "started": started,
           "elapsed_seconds": time.time() - started, "python": sys.version.split()[0]}
    serialize.write_json(out / "run-log.json", log)
    verdicts = _verdicts(result)
    print(json.dumps({"command": command, "verdicts": verdicts, "out": str(out)}))
    if args.require_verdict and verdicts and all(v == "inconclusive" for v in verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if args.group == "run":
            path = Path(args.manifest)
            manifest = serialize.read_json(path)
            sub_argv = manifest_argv(manifest, path.parent)
            if args.require_verdict:
                sub_argv.append("--require-verdict")
            args = parser.parse_args(sub_argv)
        return execute(args)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    except (ValidationError, ValueError) as exc:
        print(f"typelab: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TypelabError as exc:
        print(f"typelab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - the documented exit code for anything unexpected
        print(f"typelab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
