"""Implicit-shift QL for real symmetric tridiagonal matrices.

A straight port of the classic tql2/tqli iteration with Wilkinson shifts and
accumulated Givens rotations.  It is kept dependency free and deterministic;
the spectrum module uses it as the ``"ql"`` backend and as an independent
cross-check of the LAPACK backend.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError

MAX_SWEEPS_PER_EIGENVALUE = 60


def tridiagonal_ql(diag, offdiag, vectors: bool = True):
    """Eigen-decompose the symmetric tridiagonal matrix (diag, offdiag).

    Returns ascending eigenvalues and, if requested, the matrix whose column
    ``k`` is the eigenvector of eigenvalue ``k``.
    """
    d = np.array(diag, dtype=float)
    n = d.size
    if n == 0:
        raise ValueError("empty matrix")
    if np.size(offdiag) != n - 1:
        raise ValueError("offdiag must have length len(diag) - 1")
    e = np.zeros(n)
    e[: n - 1] = offdiag
    # rows of zt are eigenvector components; row access keeps rotations contiguous
    zt = np.eye(n) if vectors else None

    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= np.finfo(float).eps * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > MAX_SWEEPS_PER_EIGENVALUE:
                raise ConvergenceError(f"QL iteration did not converge for eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if zt is not None:
                    zi = zt[i].copy()
                    zt[i] = c * zi - s * zt[i + 1]
                    zt[i + 1] = s * zi + c * zt[i + 1]
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0

    order = np.argsort(d, kind="stable")
    d = d[order]
    if zt is None:
        return d, None
    return d, zt[order].T.copy()
