"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting ``TYPELAB_BACKEND=python``
forces the numpy fallback.  ``use_backend`` switches at runtime (tests and
the benchmark compare the two).
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_NAMES = (
    "log_factor_sum",
    "log_factor_sum_complex",
    "derivative_log_sums",
    "lattice_convolution",
    "rk4_interaction",
)

BACKEND = None


def available_backends():
    return ["python"] + (["compiled"] if _ckernels is not None else [])


def use_backend(name):
    """Bind the kernel functions of this module to ``name`` ('compiled' or 'python')."""
    global BACKEND
    if name == "compiled":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not built")
        src = _ckernels
    elif name == "python":
        src = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(src, fn)
    BACKEND = name
    return name


use_backend("python" if os.environ.get("TYPELAB_BACKEND") == "python" or _ckernels is None
            else "compiled")
