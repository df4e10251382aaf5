"""Window-increment trend rule shared by every module.

Partial sums (or integrals) are taken over an increasing list of windows and
the last three increments are classified:

* ``converged``: each increment is at most 1/ratio of the previous one
  (all-zero increments also count as converged);
* ``growing``: each increment is at least ``ratio`` times the previous one;
* ``diverging``: increments of one sign whose sizes stay within a factor
  1/level_ratio of each other (linear growth in the window index, which is
  how logarithmic divergence looks on geometric windows);
* ``inconclusive``: anything else, or fewer than three increments.
"""

from dataclasses import dataclass, field

import numpy as np

from . import defaults

CONVERGED = "converged"
GROWING = "growing"
DIVERGING = "diverging"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Trend:
    verdict: str
    partials: list
    increments: list = field(default_factory=list)

    @property
    def unbounded(self):
        return self.verdict in (GROWING, DIVERGING)

    def to_dict(self):
        return {"verdict": self.verdict, "partials": list(self.partials),
                "increments": list(self.increments)}


def classify(partials, ratio=None, level_ratio=None, count=None):
    """Classify a sequence of partial sums with the window-increment rule."""
    cfg = defaults.get("trend")
    ratio = cfg["ratio"] if ratio is None else ratio
    level_ratio = cfg["level_ratio"] if level_ratio is None else level_ratio
    count = cfg["increments"] if count is None else count
    p = [float(v) for v in partials]
    inc = [b - a for a, b in zip(p[:-1], p[1:])]
    if len(inc) < count:
        return Trend(INCONCLUSIVE, p, inc)
    last = np.array(inc[-count:])
    mag = np.abs(last)
    if not np.all(np.isfinite(last)):
        return Trend(DIVERGING, p, inc)
    if np.all(mag[1:] * ratio <= mag[:-1]) or np.all(mag == 0.0):
        return Trend(CONVERGED, p, inc)
    same_sign = np.all(last > 0) or np.all(last < 0)
    if same_sign and np.all(mag[1:] >= ratio * mag[:-1]):
        return Trend(GROWING, p, inc)
    if same_sign and mag.min() >= level_ratio * mag.max():
        return Trend(DIVERGING, p, inc)
    return Trend(INCONCLUSIVE, p, inc)


def geometric_windows(r0, r1, factor=4.0):
    """Windows r0, r0*factor, ... ending exactly at r1."""
    if not (0 < r0 < r1) or factor <= 1:
        raise ValueError("need 0 < r0 < r1 and factor > 1")
    n = int(np.ceil(np.log(r1 / r0) / np.log(factor) - 1e-12))
    w = r0 * factor ** np.arange(n + 1, dtype=float)
    w[-1] = r1
    return w


def loglog_slope(x, y):
    """Least-squares slope of log|y| against log x."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
