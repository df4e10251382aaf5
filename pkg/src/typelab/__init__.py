"""Numerical laboratory for the exponential type of measures and related spectral objects."""

import os as _os

# TYPELAB_THREADS caps the native thread pools; it must be applied before numpy loads them.
if _os.environ.get("TYPELAB_THREADS", "").isdigit() and int(_os.environ["TYPELAB_THREADS"]) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["TYPELAB_THREADS"])

from .defaults import VERSION as __version__  # noqa: E402
from .measures import SpectralMeasure  # noqa: E402
from .report import Certificate  # noqa: E402

__all__ = ["SpectralMeasure", "Certificate", "__version__"]
