"""Compiled enumeration loops for the exact solver.

Combinations are visited in lexicographic order and a candidate replaces
the incumbent only on a strictly larger score, so among ties the
lexicographically smallest index tuple wins.  Constraints and support are
evaluated only for candidates that would improve the incumbent.
"""

import numpy as np
from numba import njit

POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


@njit(cache=True)
def _admissible(idx, s, C, thr, bits, popc, p):
    npairs = s * (s - 1) / 2.0
    for c in range(C.shape[0]):
        t = 0.0
        for a in range(s):
            for b in range(a + 1, s):
                t += C[c, idx[a], idx[b]]
        if not (t / npairs >= thr[c]):
            return False
    if p > 0:
        cnt = 0
        for w in range(bits.shape[1]):
            u = 0
            for a in range(s):
                u |= bits[idx[a], w]
            cnt += popc[u]
        if cnt < p:
            return False
    return True


@njit(cache=True)
def best_pair(O, C, thr, bits, popc, p):
    n = O.shape[0]
    best = -np.inf
    out = np.full(2, -1, dtype=np.int64)
    idx = np.zeros(2, dtype=np.int64)
    for i in range(n):
        idx[0] = i
        for j in range(i + 1, n):
            val = O[i, j]
            if val > best:
                idx[1] = j
                if _admissible(idx, 2, C, thr, bits, popc, p):
                    best = val
                    out[0] = i
                    out[1] = j
    return best, out


@njit(cache=True)
def best_triple(O, C, thr, bits, popc, p):
    n = O.shape[0]
    best = -np.inf
    out = np.full(3, -1, dtype=np.int64)
    idx = np.zeros(3, dtype=np.int64)
    for i in range(n):
        idx[0] = i
        for j in range(i + 1, n):
            oij = O[i, j]
            idx[1] = j
            for l in range(j + 1, n):
                val = (oij + O[i, l] + O[j, l]) / 3.0
                if val > best:
                    idx[2] = l
                    if _admissible(idx, 3, C, thr, bits, popc, p):
                        best = val
                        out[0] = i
                        out[1] = j
                        out[2] = l
    return best, out


@njit(cache=True)
def best_of_size(s, O, C, thr, bits, popc, p):
    n = O.shape[0]
    best = -np.inf
    out = np.full(s, -1, dtype=np.int64)
    idx = np.arange(s)
    npairs = s * (s - 1) / 2.0
    while True:
        tot = 0.0
        for a in range(s):
            for b in range(a + 1, s):
                tot += O[idx[a], idx[b]]
        val = tot / npairs
        if val > best and _admissible(idx, s, C, thr, bits, popc, p):
            best = val
            out[:] = idx
        i = s - 1
        while i >= 0 and idx[i] == n - s + i:
            i -= 1
        if i < 0:
            break
        idx[i] += 1
        for j in range(i + 1, s):
            idx[j] = idx[j - 1] + 1
    return best, out
