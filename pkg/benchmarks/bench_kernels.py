"""Compiled vs pure-Python kernel timings.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.  Each row times
one kernel on a representative workload under both backends and checks that
the outputs agree to 1e-12 (relative).
"""

import argparse
import time

import numpy as np

from typelab import kernels
from typelab import nazarov as Z
from typelab import sturm as SL


def _workloads():
    zeros = np.ascontiguousarray(np.arange(1, 20_001, dtype=float) - 0.5)
    z = np.ascontiguousarray(np.linspace(0.1, 5000.3, 400))
    zc = np.linspace(-50, 50, 200) + 2j
    z2c = zc * zc
    mu = Z.build_measure(Z.GammaDiffeo.arcsinh_shift(0.5), 1.0, 20_000)
    window = Z.SchwartzWindow(2.0, 5.0)
    t = np.linspace(20, 500, 481)
    prob = SL.SLProblem(3.0, SL.Potential("constant", 1.0), 0.5)
    x = np.linspace(0, 3, 301)
    nsub = np.full(300, 8, dtype=np.int64)
    qoff, qst = SL._stages(prob, x, nsub)
    lam = np.linspace(0, 50, 200).astype(complex)
    return {
        "log_factor_sum (400 x 2e4)": lambda: kernels.log_factor_sum(z * z, zeros),
        "log_factor_sum_complex (200 x 2e4)": lambda: kernels.log_factor_sum_complex(
            np.ascontiguousarray(z2c.real), np.ascontiguousarray(z2c.imag), zeros),
        "derivative_log_sums (5e3 zeros)": lambda: kernels.derivative_log_sums(zeros[:5000]),
        "lattice_convolution (Poisson test, K=2e4)": lambda: Z.poisson_decay_test(mu, window, t).D,
        "rk4_interaction (200 lambda x 2400 steps)": lambda: kernels.rk4_interaction(
            lam, x, nsub, qoff, qst, 0.5),
    }


def _flatten(out):
    if isinstance(out, tuple):
        return [np.asarray(o) for o in out]
    return [np.asarray(out)]


def _time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    before = kernels.BACKEND
    print(f"{'kernel':44s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s} {'agree':>6s}")
    try:
        for name, fn in _workloads().items():
            res = {}
            for b in backends:
                kernels.use_backend(b)
                res[b] = _time(fn, args.repeat)
            tp, outp = res["python"]
            if "compiled" in res:
                tc, outc = res["compiled"]
                agree = all(np.all(np.abs(a - c) <= 1e-12 * np.maximum(1.0, np.abs(a)))
                            for a, c in zip(_flatten(outp), _flatten(outc)))
                print(f"{name:44s} {tp:11.4f} {tc:13.4f} {tp / tc:7.1f}x {str(agree):>6s}")
            else:
                print(f"{name:44s} {tp:11.4f} {'n/a':>13s} {'':>8s} {'':>6s}")
    finally:
        kernels.use_backend(before)


if __name__ == "__main__":
    main()
