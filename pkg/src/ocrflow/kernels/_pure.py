"""Pure-Python implementations of the hot kernels.

Signatures mirror the compiled ``_speedups`` module exactly; the package
selects one of the two at import time.
"""

import numpy as np


def levenshtein_cp(a, b):
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            cur[j] = min(prev[j - 1] + cost, prev[j] + 1, cur[j - 1] + 1)
        prev, cur = cur, prev
    return prev[m]


def dp_matrix(a, b):
    n, m = len(a), len(b)
    d = np.zeros((n + 1, m + 1), dtype=np.int32)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        ai = a[i - 1]
        row = d[i]
        prev = d[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            row[j] = min(prev[j - 1] + cost, prev[j] + 1, row[j - 1] + 1)
    return d


def collapse_argmax(argmaxes, blank_index):
    runs = []
    last = -1
    start = 0
    for t, v in enumerate(argmaxes):
        v = int(v)
        if v != last:
            if last != -1 and last != blank_index:
                runs.append((last, start, t))
            last = v
            start = t
    if last != -1 and last != blank_index:
        runs.append((last, start, len(argmaxes)))
    return runs
