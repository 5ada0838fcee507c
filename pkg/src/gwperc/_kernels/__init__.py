"""Kernel backend selection.

``GWPERC_BACKEND=numpy`` forces the pure-numpy kernels; otherwise numba is
used when it imports. Both produce the same numbers from the same seeds.
"""
import os

from . import _hash, _numpy

BACKEND = "numpy"
_impl = _numpy

# workqueue is always built in; avoids probing for a usable TBB
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

if os.environ.get("GWPERC_BACKEND", "numba").strip().lower() != "numpy":
    try:
        from . import _numba as _impl  # noqa: F811

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba missing
        pass


def get(name, backend=None):
    """Kernel ``name`` from the active backend, or from ``backend`` if given."""
    if backend is None:
        return getattr(_impl, name)
    if backend == "numpy":
        return getattr(_numpy, name)
    if backend == "numba":
        from . import _numba

        return getattr(_numba, name)
    raise ValueError(f"unknown backend {backend!r}")


def set_threads(threads):
    """Worker count for parallel kernels; results never depend on it."""
    if threads is None:
        threads = os.environ.get("GWPERC_THREADS")
    if threads is None or BACKEND != "numba":
        return
    import numba

    numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))


__all__ = ["BACKEND", "get", "set_threads", "_hash"]
