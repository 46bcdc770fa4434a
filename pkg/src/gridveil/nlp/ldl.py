"""Sparse LDL^T factorization for symmetric quasi-definite systems.

Up-looking factorization driven by the elimination tree, without
numerical pivoting: the interior-point caller regularizes its KKT
matrices until they are quasi-definite, at which point the
factorization exists, is stable enough with iterative refinement, and
the inertia can be read off the signs of D. The symbolic analysis is
done once per sparsity pattern; only the numeric phase runs per
iteration.

Matrices are handed over as the upper triangle in CSC form after a
reverse Cuthill-McKee reordering to limit fill-in.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from numba import njit
from scipy.sparse.csgraph import reverse_cuthill_mckee
from scipy.sparse.linalg import splu


def _candidate_orderings(m: sp.csc_matrix) -> list[np.ndarray]:
    """Fill-reducing orderings to try; the cheapest by exact fill wins.

    Reverse Cuthill-McKee suits the banded, mesh-like KKT systems of
    power networks; SuperLU's minimum-degree column ordering covers
    less structured patterns. Both depend only on the sparsity pattern.
    """
    perms = [np.asarray(reverse_cuthill_mckee(m, symmetric_mode=True), dtype=np.int64)]
    try:
        pattern = sp.csc_matrix(
            (np.ones(m.nnz), m.indices, m.indptr), shape=m.shape
        ) + float(m.shape[0]) * sp.eye(m.shape[0], format="csc")
        lu = splu(pattern, permc_spec="MMD_AT_PLUS_A",
                  options={"SymmetricMode": True, "DiagPivotThresh": 0.0})
        perms.append(np.asarray(lu.perm_c, dtype=np.int64))
    except Exception:  # ordering is a heuristic; fall back silently
        pass
    return perms


@njit(cache=True)
def _etree_and_counts(n, Ap, Ai):
    parent = np.full(n, -1, dtype=np.int64)
    flag = np.empty(n, dtype=np.int64)
    lnz = np.zeros(n, dtype=np.int64)
    for k in range(n):
        flag[k] = k
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            if i < k:
                while flag[i] != k:
                    if parent[i] == -1:
                        parent[i] = k
                    lnz[i] += 1
                    flag[i] = k
                    i = parent[i]
    return parent, lnz


@njit(cache=True)
def _factor(n, Ap, Ai, Ax, parent, Lp, Li, Lx, D):
    y = np.zeros(n, dtype=np.float64)
    flag = np.empty(n, dtype=np.int64)
    lnz = np.zeros(n, dtype=np.int64)
    pattern = np.empty(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    for k in range(n):
        flag[k] = k
        top = n
        diag = 0.0
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            if i == k:
                diag += Ax[p]
            elif i < k:
                y[i] += Ax[p]
                length = 0
                while flag[i] != k:
                    stack[length] = i
                    length += 1
                    flag[i] = k
                    i = parent[i]
                while length > 0:
                    length -= 1
                    top -= 1
                    pattern[top] = stack[length]
        D[k] = diag
        for t in range(top, n):
            i = pattern[t]
            yi = y[i]
            y[i] = 0.0
            end = Lp[i] + lnz[i]
            for p in range(Lp[i], end):
                y[Li[p]] -= Lx[p] * yi
            l_ki = yi / D[i]
            D[k] -= l_ki * yi
            Li[end] = k
            Lx[end] = l_ki
            lnz[i] += 1
        if D[k] == 0.0 or not np.isfinite(D[k]):
            return k + 1
    return 0


@njit(cache=True)
def _solve(n, Lp, Li, Lx, D, b):
    x = b.copy()
    for j in range(n):
        xj = x[j]
        if xj != 0.0:
            for p in range(Lp[j], Lp[j + 1]):
                x[Li[p]] -= Lx[p] * xj
    for j in range(n):
        x[j] /= D[j]
    for j in range(n - 1, -1, -1):
        acc = x[j]
        for p in range(Lp[j], Lp[j + 1]):
            acc -= Lx[p] * x[Li[p]]
        x[j] = acc
    return x


class LdlSolver:
    """Factorization object bound to one sparsity pattern.

    ``analyze`` fixes the ordering and symbolic structure; ``refactor``
    runs the numeric phase on new values with the same pattern and
    reports the inertia; ``solve`` applies the current factors.
    """

    def __init__(self, matrix: sp.spmatrix):
        m = sp.csc_matrix(matrix)
        self.n = m.shape[0]
        best = None
        for perm in _candidate_orderings(m):
            self.perm = perm
            upper = self._permuted_upper(m)
            Ap = upper.indptr.astype(np.int64)
            Ai = upper.indices.astype(np.int64)
            parent, lnz = _etree_and_counts(self.n, Ap, Ai)
            fill = int(lnz.sum())
            if best is None or fill < best[0]:
                best = (fill, perm, Ap, Ai, parent, lnz)
        _, self.perm, self._Ap, self._Ai, self.parent, lnz = best
        self.inv_perm = np.argsort(self.perm)
        self.Lp = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(lnz, out=self.Lp[1:])
        self.Li = np.empty(self.Lp[-1], dtype=np.int64)
        self.Lx = np.empty(self.Lp[-1], dtype=np.float64)
        self.D = np.empty(self.n, dtype=np.float64)
        self._ok = False

    def _permuted_upper(self, m: sp.csc_matrix) -> sp.csc_matrix:
        p = m[self.perm, :][:, self.perm]
        u = sp.triu(p, format="csc")
        u.sort_indices()
        return u

    def refactor(self, matrix: sp.spmatrix) -> tuple[int, int, int]:
        """Factor new values; returns the inertia ``(pos, neg, zero)``.

        A zero or non-finite pivot aborts and counts as a zero
        eigenvalue, which callers treat as wrong inertia.
        """
        upper = self._permuted_upper(sp.csc_matrix(matrix))
        if not np.array_equal(upper.indptr, self._Ap) or not np.array_equal(upper.indices, self._Ai):
            raise ValueError("sparsity pattern changed between analyze and refactor")
        status = _factor(self.n, self._Ap, self._Ai, upper.data.astype(np.float64),
                         self.parent, self.Lp, self.Li, self.Lx, self.D)
        if status != 0:
            self._ok = False
            return 0, 0, self.n
        self._ok = True
        pos = int(np.sum(self.D > 0))
        neg = int(np.sum(self.D < 0))
        return pos, neg, self.n - pos - neg

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if not self._ok:
            raise RuntimeError("no valid factorization available")
        b = np.asarray(rhs, dtype=np.float64)[self.perm]
        x = _solve(self.n, self.Lp, self.Li, self.Lx, self.D, b)
        return x[self.inv_perm]
