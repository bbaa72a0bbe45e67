"""Numba kernels for the hot paths: the trajectory sweep and rank statistics.

The sweep parallelizes over publications; every publication writes only its
own output slots, so results are bit-identical regardless of thread count or
scheduling. Scratch marker arrays are per-thread and use the publication
index as a stamp, which avoids clearing them between iterations.
"""

from __future__ import annotations

import numpy as np
from numba import get_thread_id, njit, prange


@njit(cache=True, parallel=True)
def sweep_kernel(years, ref_indptr, ref_indices, cit_indptr, cit_indices,
                 t_caps, offsets, min_refs, min_cites, nr_strict,
                 out_nf, out_nb, out_nr, out_d,
                 ref_mark, cit_mark, cand_mark):
    n = years.shape[0]
    for p in prange(n):
        tid = get_thread_id()
        y = years[p]
        t_cap = t_caps[p]
        base = offsets[p]
        marker = p + 1
        n_refs = ref_indptr[p + 1] - ref_indptr[p]

        for j in range(ref_indptr[p], ref_indptr[p + 1]):
            ref_mark[tid, ref_indices[j]] = marker

        # Citers of p, sorted by year: classify each into "cites a reference
        # of p too" (overlap) vs "cites only p" (exclusive) at its lag.
        for j in range(cit_indptr[p], cit_indptr[p + 1]):
            q = cit_indices[j]
            lag = years[q] - y
            if lag < 0:
                lag = 0
            if lag > t_cap:
                break
            cit_mark[tid, q] = marker
            overlap = False
            for k in range(ref_indptr[q], ref_indptr[q + 1]):
                if ref_mark[tid, ref_indices[k]] == marker:
                    overlap = True
                    break
            if overlap:
                out_nb[base + lag] += 1
            else:
                out_nf[base + lag] += 1

        # Publications citing a reference of p but not p itself, at/after
        # p's year, deduplicated across references. Citer lists are year
        # sorted, so binary-search to p's year and stop past the window.
        for j in range(ref_indptr[p], ref_indptr[p + 1]):
            r = ref_indices[j]
            lo = cit_indptr[r]
            hi = cit_indptr[r + 1]
            while lo < hi:
                mid = (lo + hi) // 2
                if years[cit_indices[mid]] < y:
                    lo = mid + 1
                else:
                    hi = mid
            for k in range(lo, cit_indptr[r + 1]):
                q = cit_indices[k]
                yq = years[q]
                if yq - y > t_cap:
                    break
                if nr_strict and yq == y:
                    continue
                if q == p:
                    continue
                if cit_mark[tid, q] == marker:
                    continue
                if cand_mark[tid, q] == marker:
                    continue
                cand_mark[tid, q] = marker
                out_nr[base + (yq - y)] += 1

        # Per-lag deltas -> cumulative window counts and D values.
        cf = 0
        cb = 0
        cr = 0
        for t in range(t_cap + 1):
            cf += out_nf[base + t]
            cb += out_nb[base + t]
            cr += out_nr[base + t]
            out_nf[base + t] = cf
            out_nb[base + t] = cb
            out_nr[base + t] = cr
            denom = cf + cb + cr
            if n_refs < min_refs or cf + cb < min_cites or denom == 0:
                out_d[base + t] = np.nan
            else:
                out_d[base + t] = np.float64(cf - cb) / np.float64(denom)


@njit(cache=True)
def merge_count(values, buf, lo, mid, hi):
    inv = 0
    i = lo
    j = mid
    k = lo
    while i < mid and j < hi:
        if values[j] < values[i]:
            inv += mid - i
            buf[k] = values[j]
            j += 1
        else:
            buf[k] = values[i]
            i += 1
        k += 1
    while i < mid:
        buf[k] = values[i]
        i += 1
        k += 1
    while j < hi:
        buf[k] = values[j]
        j += 1
        k += 1
    for k in range(lo, hi):
        values[k] = buf[k]
    return inv


@njit(cache=True)
def count_inversions(values):
    """Strict inversions in ``values`` (modified in place), via mergesort."""
    n = values.shape[0]
    buf = np.empty(n, values.dtype)
    inv = 0
    width = 1
    while width < n:
        lo = 0
        while lo + width < n:
            mid = lo + width
            hi = min(lo + 2 * width, n)
            inv += merge_count(values, buf, lo, mid, hi)
            lo += 2 * width
        width *= 2
    return inv
