# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rating-matrix kernels.

Semantics match cofigel._core_py exactly for every integer output; floats
can differ by summation-order noise, which the shared 12-decimal rank
quantization absorbs before any ordering decision. The speed comes from
exploiting sparsity: co-positive counts are accumulated over each user's
positive-item list instead of dense matrix products.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport rint, sqrt

cnp.import_array()

cdef double SCALE = 1e12  # rank quantization, matches _core_py.RANK_DECIMALS


def base_derive(values):
    """See _core_py.base_derive."""
    cdef cnp.int8_t[:, ::1] vals = np.ascontiguousarray(values, dtype=np.int8)
    cdef Py_ssize_t n_users = vals.shape[0]
    cdef Py_ssize_t n_items = vals.shape[1]

    sim_arr = np.zeros((n_items, n_items), dtype=np.float64)
    ranks_arr = np.zeros((n_users, n_items), dtype=np.float64)
    pred_arr = np.zeros((n_users, n_items), dtype=np.uint8)
    npos_arr = np.zeros(n_items, dtype=np.int64)
    counts_arr = np.zeros((n_items, n_items), dtype=np.int64)

    cdef cnp.float64_t[:, ::1] sim = sim_arr
    cdef cnp.float64_t[:, ::1] ranks = ranks_arr
    cdef cnp.uint8_t[:, ::1] pred = pred_arr
    cdef cnp.int64_t[::1] npos = npos_arr
    cdef cnp.int64_t[:, ::1] counts = counts_arr

    cdef Py_ssize_t u, i, j, a, b, n_pos
    cdef cnp.int64_t[::1] pos_buf = np.empty(max(n_items, 1), dtype=np.int64)

    for u in range(n_users):
        n_pos = 0
        for i in range(n_items):
            if vals[u, i] == 1:
                pos_buf[n_pos] = i
                n_pos += 1
        for a in range(n_pos):
            i = pos_buf[a]
            counts[i, i] += 1
            for b in range(a + 1, n_pos):
                j = pos_buf[b]
                counts[i, j] += 1
                counts[j, i] += 1

    for i in range(n_items):
        npos[i] = counts[i, i]
    for i in range(n_items):
        for j in range(n_items):
            if counts[i, j] > 0:
                sim[i, j] = counts[i, j] / sqrt(<double>(npos[i]) * <double>(npos[j]))

    cdef double acc
    cdef int reach
    for u in range(n_users):
        n_pos = 0
        for j in range(n_items):
            if vals[u, j] == 1:
                pos_buf[n_pos] = j
                n_pos += 1
        if n_pos == 0:
            continue
        for i in range(n_items):
            acc = 0.0
            reach = 0
            for a in range(n_pos):
                j = pos_buf[a]
                acc += sim[i, j]
                if counts[i, j] > 0:
                    reach = 1
            ranks[u, i] = acc
            if vals[u, i] < 0 and reach:
                pred[u, i] = 1

    return sim_arr, ranks_arr, pred_arr, npos_arr


def label_derive(ranks, predictable, int k, tie_order):
    """See _core_py.label_derive."""
    cdef cnp.float64_t[:, ::1] rk = np.ascontiguousarray(ranks, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] pred = np.ascontiguousarray(predictable, dtype=np.uint8)
    cdef cnp.int64_t[::1] tie = np.ascontiguousarray(tie_order, dtype=np.int64)
    cdef Py_ssize_t n_users = rk.shape[0]
    cdef Py_ssize_t n_items = rk.shape[1]

    labels_arr = np.zeros((n_users, n_items), dtype=np.uint8)
    gplus_arr = np.zeros(n_items, dtype=np.int64)
    cdef cnp.uint8_t[:, ::1] labels = labels_arr
    cdef cnp.int64_t[::1] gplus = gplus_arr

    cdef cnp.uint8_t[::1] taken = np.zeros(max(n_items, 1), dtype=np.uint8)
    cdef Py_ssize_t u, i, picked, best
    cdef double best_q, q

    for u in range(n_users):
        for i in range(n_items):
            taken[i] = 0
        picked = 0
        # Select k maxima by (quantized rank desc, tie order asc); the
        # comparator is total, so this equals taking a sorted prefix.
        while picked < k:
            best = -1
            best_q = 0.0
            for i in range(n_items):
                if pred[u, i] == 0 or taken[i]:
                    continue
                q = rint(rk[u, i] * SCALE) / SCALE
                if best < 0 or q > best_q or (q == best_q and tie[i] < tie[best]):
                    best = i
                    best_q = q
            if best < 0:
                break
            taken[best] = 1
            labels[u, best] = 1
            gplus[best] += 1
            picked += 1

    return labels_arr, gplus_arr


def gain_vector(values, predictable, Py_ssize_t u):
    """See _core_py.gain_vector."""
    cdef cnp.int8_t[:, ::1] vals = np.ascontiguousarray(values, dtype=np.int8)
    cdef cnp.uint8_t[:, ::1] pred = np.ascontiguousarray(predictable, dtype=np.uint8)
    cdef Py_ssize_t n_users = vals.shape[0]
    cdef Py_ssize_t n_items = vals.shape[1]

    gains_arr = np.ones(n_items, dtype=np.int64)
    cdef cnp.int64_t[::1] gains = gains_arr
    cdef Py_ssize_t v, i
    cdef bint share

    for v in range(n_users):
        if v == u:
            continue
        share = False
        for i in range(n_items):
            if vals[u, i] == 1 and vals[v, i] == 1:
                share = True
                break
        if not share:
            continue
        for i in range(n_items):
            if vals[v, i] < 0 and pred[v, i] == 0:
                gains[i] += 1
    return gains_arr


def gain_best(values, predictable):
    """See _core_py.gain_best."""
    cdef cnp.int8_t[:, ::1] vals = np.ascontiguousarray(values, dtype=np.int8)
    cdef cnp.uint8_t[:, ::1] pred = np.ascontiguousarray(predictable, dtype=np.uint8)
    cdef Py_ssize_t n_users = vals.shape[0]
    cdef Py_ssize_t n_items = vals.shape[1]

    best_arr = np.zeros(n_items, dtype=np.int64)
    if n_users == 0 or n_items == 0:
        return best_arr
    cdef cnp.int64_t[::1] best = best_arr

    # share[v, w]: v and w have some co-positive item
    share_arr = np.zeros((n_users, n_users), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] share = share_arr
    cdef Py_ssize_t v, w, i
    for v in range(n_users):
        for w in range(v + 1, n_users):
            for i in range(n_items):
                if vals[v, i] == 1 and vals[w, i] == 1:
                    share[v, w] = 1
                    share[w, v] = 1
                    break

    cdef cnp.int64_t gain
    for v in range(n_users):
        for i in range(n_items):
            if vals[v, i] >= 0:
                continue  # only users with the item unrated are candidates
            gain = 1
            for w in range(n_users):
                if w != v and share[v, w] and vals[w, i] < 0 and pred[w, i] == 0:
                    gain += 1
            if gain > best[i]:
                best[i] = gain
    return best_arr
