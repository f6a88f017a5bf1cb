"""Hot numeric kernels with two interchangeable backends.

The numba backend JIT-compiles the inner loops (`_numba`); the numpy
backend (`_numpy`) implements the same contracts without compilation.
Selection is driven by the ``GRAVRED_NUMBA`` environment variable:

    GRAVRED_NUMBA=1     require numba (import error if unavailable)
    GRAVRED_NUMBA=0     force the numpy fallback
    GRAVRED_NUMBA=auto  use numba when importable (default)

Both backends draw from the same splitmix64 streams, so Monte Carlo
channel/winner decisions match across backends; event times may differ
in the last ulp (different libm paths for log1p).

``benchmarks/bench_kernels.py`` times the two backends side by side.
"""

import os
import warnings

from . import _numpy as numpy_impl

_FLAG = os.environ.get("GRAVRED_NUMBA", "auto").strip().lower()

numba_impl = None
if _FLAG not in ("0", "false", "off", "no"):
    try:
        from . import _numba as numba_impl
    except Exception as exc:  # pragma: no cover - depends on environment
        if _FLAG in ("1", "true", "on", "yes"):
            raise
        warnings.warn(f"numba kernels unavailable, using numpy fallback: {exc}")
        numba_impl = None

active = numba_impl if numba_impl is not None else numpy_impl


def backend_name():
    return "numba" if active is numba_impl and numba_impl is not None else "numpy"


def get_impl(name=None):
    """Return a kernel backend module by name (None/'active', 'numpy', 'numba')."""
    if name in (None, "active"):
        return active
    if name == "numpy":
        return numpy_impl
    if name == "numba":
        if numba_impl is None:
            raise RuntimeError("numba backend not available (GRAVRED_NUMBA=%s)" % _FLAG)
        return numba_impl
    raise ValueError(f"unknown kernel backend {name!r}")
