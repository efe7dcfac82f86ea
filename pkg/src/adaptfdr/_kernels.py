"""Row-wise threshold kernels over matrices of sorted p-values.

Every kernel takes ``sp``, a C-contiguous ``(n, m)`` float64 array whose rows
are sorted ascending, and returns one rejection count per row. Two
implementations exist for each: a numba ``@njit`` loop and a vectorised numpy
version. The module-level names dispatch to numba unless the environment sets
``ADAPTFDR_DISABLE_NUMBA=1`` (or numba is unavailable).

The linear step-up kernel builds its constants as ``(i * level) / m`` so that
it reproduces ``np.arange(1, m + 1) * level / m`` bit for bit.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def _env_disabled() -> bool:
    return os.environ.get("ADAPTFDR_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _env_disabled()


# ---------------------------------------------------------------- numpy path


def stepdown_count_np(sp, alphas):
    if sp.shape[1] == 0:
        return np.zeros(sp.shape[0], dtype=np.int64)
    fail = sp > alphas
    first = np.argmax(fail, axis=1)
    return np.where(fail.any(axis=1), first, sp.shape[1]).astype(np.int64)


def stepup_count_np(sp, alphas):
    m = sp.shape[1]
    if m == 0:
        return np.zeros(sp.shape[0], dtype=np.int64)
    ok = sp <= alphas
    last = m - np.argmax(ok[:, ::-1], axis=1)
    return np.where(ok.any(axis=1), last, 0).astype(np.int64)


def stepup_linear_count_np(sp, levels, caps):
    m = sp.shape[1]
    if m == 0:
        return np.zeros(sp.shape[0], dtype=np.int64)
    alphas = np.arange(1, m + 1) * levels[:, None] / m
    alphas = np.minimum(alphas, caps[:, None])
    return stepup_count_np(sp, alphas)


def count_le_np(sp, thresholds):
    ok = sp <= thresholds[:, None]
    return ok.sum(axis=1).astype(np.int64)


def prefix_sum_at_np(flags, k):
    """``flags[r, :k[r]].sum()`` for every row ``r``."""
    n, m = flags.shape
    csum = np.zeros((n, m + 1), dtype=np.int64)
    np.cumsum(flags, axis=1, out=csum[:, 1:])
    return csum[np.arange(n), k]


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def stepdown_count_nb(sp, alphas):
        n, m = sp.shape
        out = np.empty(n, dtype=np.int64)
        for r in range(n):
            k = 0
            while k < m and sp[r, k] <= alphas[k]:
                k += 1
            out[r] = k
        return out

    @numba.njit(cache=True)
    def stepup_count_nb(sp, alphas):
        n, m = sp.shape
        out = np.empty(n, dtype=np.int64)
        for r in range(n):
            k = m
            while k > 0 and sp[r, k - 1] > alphas[k - 1]:
                k -= 1
            out[r] = k
        return out

    @numba.njit(cache=True)
    def stepup_linear_count_nb(sp, levels, caps):
        n, m = sp.shape
        out = np.empty(n, dtype=np.int64)
        for r in range(n):
            level = levels[r]
            cap = caps[r]
            k = m
            while k > 0:
                a = (np.float64(k) * level) / m
                if a > cap:
                    a = cap
                if sp[r, k - 1] <= a:
                    break
                k -= 1
            out[r] = k
        return out

    @numba.njit(cache=True)
    def count_le_nb(sp, thresholds):
        n, m = sp.shape
        out = np.empty(n, dtype=np.int64)
        for r in range(n):
            t = thresholds[r]
            # rows are sorted: binary search for the last index <= t
            lo, hi = 0, m
            while lo < hi:
                mid = (lo + hi) // 2
                if sp[r, mid] <= t:
                    lo = mid + 1
                else:
                    hi = mid
            out[r] = lo
        return out

    @numba.njit(cache=True)
    def prefix_sum_at_nb(flags, k):
        n = flags.shape[0]
        out = np.empty(n, dtype=np.int64)
        for r in range(n):
            s = 0
            for j in range(k[r]):
                s += flags[r, j]
            out[r] = s
        return out

    _NUMBA = {
        "stepdown_count": stepdown_count_nb,
        "stepup_count": stepup_count_nb,
        "stepup_linear_count": stepup_linear_count_nb,
        "count_le": count_le_nb,
        "prefix_sum_at": prefix_sum_at_nb,
    }
else:  # pragma: no cover
    _NUMBA = {}

_NUMPY = {
    "stepdown_count": stepdown_count_np,
    "stepup_count": stepup_count_np,
    "stepup_linear_count": stepup_linear_count_np,
    "count_le": count_le_np,
    "prefix_sum_at": prefix_sum_at_np,
}


def implementations(backend: str) -> dict:
    """Kernel table for ``backend`` in ``{"numba", "numpy"}``."""
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        return _NUMBA
    if backend == "numpy":
        return _NUMPY
    raise ValueError(f"unknown backend {backend!r}")


BACKEND = "numba" if USE_NUMBA else "numpy"
_active = implementations(BACKEND)

stepdown_count = _active["stepdown_count"]
stepup_count = _active["stepup_count"]
stepup_linear_count = _active["stepup_linear_count"]
count_le = _active["count_le"]
prefix_sum_at = _active["prefix_sum_at"]
