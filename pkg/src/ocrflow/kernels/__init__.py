"""Hot string kernels: compiled extension when available, pure fallback.

The Levenshtein/alignment dynamic programs and the CTC collapse loop are
the inner loops of evaluation and decoding. A Cython build of them is
used when the extension compiled; otherwise the pure-Python versions in
``_pure`` are selected at import time. ``BACKEND`` reports which one won.
"""

import numpy as np

try:
    from ocrflow.kernels import _speedups as _impl

    BACKEND = "cython"
except ImportError:  # extension not built
    from ocrflow.kernels import _pure as _impl

    BACKEND = "pure"

from ocrflow.kernels import _pure


def _codepoints(s):
    return np.array([ord(c) for c in s], dtype=np.int32)


def levenshtein(a, b):
    """Minimal insert/delete/substitute count between two strings."""
    return int(_impl.levenshtein_cp(_codepoints(a), _codepoints(b)))


def alignment_matrix(a, b):
    """Full (len(a)+1) x (len(b)+1) edit-distance DP matrix (int32)."""
    return np.asarray(_impl.dp_matrix(_codepoints(a), _codepoints(b)))


def collapse_argmax(argmaxes, blank_index):
    """CTC collapse of a per-column argmax sequence.

    Returns a list of (label_index, run_start, run_end) with repeats
    merged and blanks removed; run_end is exclusive.
    """
    return _impl.collapse_argmax(np.asarray(argmaxes, dtype=np.int32), blank_index)


def levenshtein_pure(a, b):
    """Pure-backend distance, kept addressable for benchmarking."""
    return int(_pure.levenshtein_cp(_codepoints(a), _codepoints(b)))
