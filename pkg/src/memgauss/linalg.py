"""Dense LU factorization with partial pivoting for small MNA systems."""

from __future__ import annotations

import numpy as np

from .errors import MemgaussError


class SingularMatrix(MemgaussError):
    """System has no unique solution (floating node, source loop, ...)."""

    def __init__(self, message, unknown=None):
        self.unknown = unknown
        super().__init__(message)


# pivot counts as zero below this multiple of eps * n * (column scale)
_PIVOT_FACTOR = 16.0


def lu_factor(a: np.ndarray, labels=None):
    """Factor ``a`` in place of a copy; returns ``(lu, perm)`` with ``P A = L U``.

    ``labels[j]`` names unknown ``j`` for the singular-matrix message.
    """
    lu = np.array(a, dtype=np.result_type(a, float), copy=True)
    n = lu.shape[0]
    if lu.shape != (n, n):
        raise ValueError("matrix must be square")
    perm = np.arange(n)
    col_scale = np.max(np.abs(lu), axis=0) if n else np.zeros(0)
    eps = np.finfo(float).eps
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        pivot = abs(lu[p, k])
        if pivot == 0.0 or pivot <= _PIVOT_FACTOR * eps * n * col_scale[k]:
            what = labels[k] if labels is not None else f"unknown {k}"
            raise SingularMatrix(f"singular MNA matrix at {what}", unknown=what)
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def lu_solve(factors, b: np.ndarray) -> np.ndarray:
    lu, perm = factors
    n = lu.shape[0]
    x = np.array(b, dtype=np.result_type(lu, b), copy=True)[perm]
    for k in range(n):
        x[k + 1:] -= lu[k + 1:, k] * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x


def solve(a: np.ndarray, b: np.ndarray, labels=None) -> np.ndarray:
    return lu_solve(lu_factor(a, labels), b)
