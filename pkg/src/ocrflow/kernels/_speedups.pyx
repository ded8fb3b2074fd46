# Compiled versions of the string-alignment and CTC collapse kernels.
# Must stay behaviourally identical to kernels/_pure.py.

import numpy as np

cimport numpy as cnp

cnp.import_array()


def levenshtein_cp(cnp.int32_t[:] a, cnp.int32_t[:] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    cdef cnp.ndarray[cnp.int32_t, ndim=1] prev_arr = np.arange(m + 1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cur_arr = np.zeros(m + 1, dtype=np.int32)
    cdef cnp.int32_t[:] prev = prev_arr
    cdef cnp.int32_t[:] cur = cur_arr
    cdef cnp.int32_t[:] tmp
    cdef Py_ssize_t i, j
    cdef cnp.int32_t ai, best, cand
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            cand = prev[j] + 1
            if cand < best:
                best = cand
            cand = cur[j - 1] + 1
            if cand < best:
                best = cand
            cur[j] = best
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[m])


def dp_matrix(cnp.int32_t[:] a, cnp.int32_t[:] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] d_arr = np.zeros((n + 1, m + 1), dtype=np.int32)
    cdef cnp.int32_t[:, :] d = d_arr
    cdef Py_ssize_t i, j
    cdef cnp.int32_t ai, best, cand
    for i in range(n + 1):
        d[i, 0] = i
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = d[i - 1, j - 1] + (0 if ai == b[j - 1] else 1)
            cand = d[i - 1, j] + 1
            if cand < best:
                best = cand
            cand = d[i, j - 1] + 1
            if cand < best:
                best = cand
            d[i, j] = best
    return d_arr


def collapse_argmax(cnp.int32_t[:] argmaxes, Py_ssize_t blank_index):
    cdef Py_ssize_t t
    cdef cnp.int32_t v, last = -1
    cdef Py_ssize_t start = 0
    runs = []
    for t in range(argmaxes.shape[0]):
        v = argmaxes[t]
        if v != last:
            if last != -1 and last != blank_index:
                runs.append((int(last), int(start), int(t)))
            last = v
            start = t
    if last != -1 and last != blank_index:
        runs.append((int(last), int(start), int(argmaxes.shape[0])))
    return runs
