"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is picked once at import time. Set ``PHASEDBS_NO_NUMBA=1`` to
force the numpy path; it is also used when numba cannot be imported.
Both implementations stay importable as ``numpy_impl`` / ``numba_impl`` so
they can be benchmarked and cross-checked side by side.
"""

import contextlib
import os
import sys

from . import _numpy as numpy_impl

try:
    from . import _numba as numba_impl
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_impl = None


def _select():
    flag = os.environ.get("PHASEDBS_NO_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes") or numba_impl is None:
        return "numpy", numpy_impl
    return "numba", numba_impl


BACKEND, _impl = _select()

fir_q15 = _impl.fir_q15
lpe_phase = _impl.lpe_phase
cordic_phase = _impl.cordic_phase
trig_lookup = _impl.trig_lookup
weighted_trig_sums = _impl.weighted_trig_sums

_NAMES = ("fir_q15", "lpe_phase", "cordic_phase", "trig_lookup", "weighted_trig_sums")


@contextlib.contextmanager
def use_backend(name):
    """Temporarily route the dispatched kernels to ``"numba"`` or ``"numpy"``."""
    impl = {"numpy": numpy_impl, "numba": numba_impl}.get(name)
    if impl is None:
        raise ValueError(f"backend {name!r} is not available")
    mod = sys.modules[__name__]
    saved = {n: getattr(mod, n) for n in _NAMES + ("BACKEND",)}
    for n in _NAMES:
        setattr(mod, n, getattr(impl, n))
    mod.BACKEND = name
    try:
        yield impl
    finally:
        for n, f in saved.items():
            setattr(mod, n, f)


__all__ = [
    "BACKEND", "numpy_impl", "numba_impl", "use_backend",
    "fir_q15", "lpe_phase", "cordic_phase", "trig_lookup", "weighted_trig_sums",
]
