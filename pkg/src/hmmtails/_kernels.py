"""Sequential inner loops (chain stepping, affine recursion, block accumulation).

All randomness is drawn by the caller with numpy generators; these kernels
are deterministic functions of their inputs.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def walk(cdf, start, u):
    """One chain path: ``out[t]`` is the state after the t-th transition from ``start``."""
    d = cdf.shape[0]
    out = np.empty(u.shape[0], dtype=np.int64)
    s = start
    for t in range(u.shape[0]):
        k = np.searchsorted(cdf[s], u[t], side="right")
        s = k if k < d else d - 1
        out[t] = s
    return out


@njit(cache=True, nogil=True)
def step_many(cdf, cur, u):
    """One transition for each of many independent chains."""
    d = cdf.shape[0]
    out = np.empty(cur.shape[0], dtype=np.int64)
    for i in range(cur.shape[0]):
        k = np.searchsorted(cdf[cur[i]], u[i], side="right")
        out[i] = k if k < d else d - 1
    return out


@njit(cache=True, nogil=True)
def affine(q, m, r0):
    """``r[t] = q[t] + m[t] * r[t-1]`` with ``r[-1] = r0``."""
    out = np.empty(q.shape[0])
    r = r0
    for t in range(q.shape[0]):
        r = q[t] + m[t] * r
        out[t] = r
    return out


@njit(cache=True, nogil=True)
def accumulate_blocks(cut, q, m, a, b, length, max_len):
    """Split a path into regeneration blocks.

    ``cut[t]`` marks a regeneration at step t (a new block starts there).
    ``(a, b, length)`` is the open block carried in from the previous chunk.
    Returns the closed blocks, the open block, and an overflow flag.
    """
    n = q.shape[0]
    a_out = np.empty(n)
    b_out = np.empty(n)
    len_out = np.empty(n, dtype=np.int64)
    k = 0
    for t in range(n):
        if cut[t] and length > 0:
            a_out[k] = a
            b_out[k] = b
            len_out[k] = length
            k += 1
            a = 0.0
            b = 1.0
            length = 0
        a += b * q[t]
        b *= m[t]
        length += 1
        if length > max_len:
            return a_out[:k], b_out[:k], len_out[:k], a, b, length, True
    return a_out[:k], b_out[:k], len_out[:k], a, b, length, False
