"""Runtime switches read from the environment.

``BMA_IDENTIFY_NUMBA``   set to ``0`` to force the pure-numpy kernels.
``BMA_IDENTIFY_THREADS`` cap on worker threads used by Monte Carlo loops.
"""

import os

_FALSY = {"0", "false", "no", "off", ""}


def _numba_requested():
    return os.environ.get("BMA_IDENTIFY_NUMBA", "1").strip().lower() not in _FALSY


def _numba_importable():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_AVAILABLE = _numba_importable()
USE_NUMBA = NUMBA_AVAILABLE and _numba_requested()


def max_threads():
    """Worker-thread cap from ``BMA_IDENTIFY_THREADS`` (default: CPU count)."""
    raw = os.environ.get("BMA_IDENTIFY_THREADS")
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"BMA_IDENTIFY_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"BMA_IDENTIFY_THREADS must be >= 1, got {n}")
    return n


def threads_capped():
    raw = os.environ.get("BMA_IDENTIFY_THREADS")
    return raw is not None and raw.strip() != ""
