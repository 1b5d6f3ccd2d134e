"""Hot inner loops, compiled with numba when available.

Set ``FBMRUIN_DISABLE_NUMBA=1`` to force the pure-numpy versions.  Both
implementations are always importable as ``*_numba`` / ``*_numpy`` so tests
and the benchmark can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("FBMRUIN_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def crossing_scan_numpy(increments, shift, levels, tau_index):
    paths = np.cumsum(increments, axis=1)
    hit = paths + shift > levels
    any_hit = hit.any(axis=1)
    first = np.where(any_hit, hit.argmax(axis=1), -1).astype(np.int64)
    at_tau = paths[:, tau_index].copy() if tau_index >= 0 else np.zeros(len(paths))
    return first, at_tau


def log_ratio_numpy(values, num_offset, den_offset):
    top = np.max(values + num_offset, axis=1)
    den = values + den_offset
    m = np.max(den, axis=1)
    lse = m + np.log(np.sum(np.exp(den - m[:, None]), axis=1))
    return top - lse


def _crossing_scan_py(increments, shift, levels, tau_index):
    n_paths, n = increments.shape
    first = np.full(n_paths, -1, dtype=np.int64)
    at_tau = np.zeros(n_paths)
    for p in range(n_paths):
        acc = 0.0
        for j in range(n):
            acc += increments[p, j]
            if j == tau_index:
                at_tau[p] = acc
            if first[p] < 0 and acc + shift[j] > levels[j]:
                first[p] = j
            if first[p] >= 0 and j >= tau_index:
                break
    return first, at_tau


def _log_ratio_py(values, num_offset, den_offset):
    n_paths, n = values.shape
    out = np.empty(n_paths)
    for p in range(n_paths):
        top = -np.inf
        m = -np.inf
        for j in range(n):
            a = values[p, j] + num_offset[j]
            if a > top:
                top = a
            b = values[p, j] + den_offset[j]
            if b > m:
                m = b
        s = 0.0
        for j in range(n):
            s += np.exp(values[p, j] + den_offset[j] - m)
        out[p] = top - (m + np.log(s))
    return out


if NUMBA_AVAILABLE:
    _jit = numba.njit(cache=True, nogil=True, fastmath=False)
    crossing_scan_numba = _jit(_crossing_scan_py)
    log_ratio_numba = _jit(_log_ratio_py)
else:  # pragma: no cover
    crossing_scan_numba = crossing_scan_numpy
    log_ratio_numba = log_ratio_numpy


def crossing_scan(increments, shift, levels, tau_index=-1):
    """Cumulate increments row-wise and find the first index where path + shift > level.

    Returns ``(first, at_tau)``: the first crossing index per row (``-1`` when
    there is none) and the unshifted cumulated value at ``tau_index``.
    """
    increments = np.ascontiguousarray(increments, dtype=np.float64)
    shift = np.ascontiguousarray(shift, dtype=np.float64)
    levels = np.ascontiguousarray(levels, dtype=np.float64)
    if USE_NUMBA:
        return crossing_scan_numba(increments, shift, levels, int(tau_index))
    return crossing_scan_numpy(increments, shift, levels, int(tau_index))


def log_ratio(values, num_offset, den_offset):
    """Row-wise ``max(values + num) - logsumexp(values + den)``."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    num_offset = np.ascontiguousarray(num_offset, dtype=np.float64)
    den_offset = np.ascontiguousarray(den_offset, dtype=np.float64)
    if USE_NUMBA:
        return log_ratio_numba(values, num_offset, den_offset)
    return log_ratio_numpy(values, num_offset, den_offset)
