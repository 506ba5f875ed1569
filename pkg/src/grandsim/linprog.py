"""Small dense solvers: a two-phase simplex and a projection onto a polytope.

Both are written for problems with a handful of rows and at most a few
hundred columns, which is all the packing LPs here ever need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SolverError", "LPResult", "simplex", "project_onto_polytope"]


class SolverError(RuntimeError):
    """A numerical routine failed to converge; ``state`` holds the last iterate."""

    def __init__(self, message: str, state: dict | None = None):
        super().__init__(message)
        self.state = state or {}


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    duals: np.ndarray
    basis: list
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run_phase(T, basis, cost_row, n_cols, tol, max_iter, iters):
    """Bland's-rule simplex on tableau ``T`` whose last row is the cost row."""
    m = len(basis)
    while True:
        if iters > max_iter:
            raise SolverError("simplex iteration limit reached", {"basis": list(basis)})
        reduced = T[cost_row, :n_cols]
        candidates = np.flatnonzero(reduced < -tol)
        if candidates.size == 0:
            return iters
        col = int(candidates[0])
        column = T[:m, col]
        rhs = T[:m, -1]
        best, leave = None, None
        for r in range(m):
            if column[r] > tol:
                ratio = rhs[r] / column[r]
                if (
                    best is None
                    or ratio < best - tol
                    or (abs(ratio - best) <= tol and basis[r] < basis[leave])
                ):
                    best, leave = ratio, r
        if leave is None:
            raise SolverError("LP is unbounded", {"basis": list(basis), "column": col})
        _pivot(T, leave, col)
        basis[leave] = col
        iters += 1


def simplex(c, A, b, tol: float = 1e-11, max_iter: int = 10_000) -> LPResult:
    """Minimize ``c @ x`` subject to ``A @ x == b`` and ``x >= 0``.

    Dense two-phase tableau simplex with Bland's anti-cycling rule.  The
    returned ``duals`` ``y`` satisfy ``A.T @ y <= c`` (up to ``tol``) and
    ``b @ y == value`` at the optimum.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A1 = A * sign[:, None]
    b1 = b * sign

    # phase 1: columns [x | artificials | rhs], rows [constraints | cost]
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A1
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b1
    T[m, :n] = -A1.sum(axis=0)
    T[m, -1] = -b1.sum()
    basis = list(range(n, n + m))
    iters = _run_phase(T, basis, m, n + m, tol, max_iter, 0)
    if -T[m, -1] > 1e-9 * max(1.0, np.abs(b1).sum()):
        raise SolverError("LP is infeasible", {"phase1_value": -T[m, -1]})

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            cols = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
            if cols.size:
                _pivot(T, r, int(cols[0]))
                basis[r] = int(cols[0])
                keep.append(r)
        else:
            keep.append(r)
    T = np.vstack([T[keep][:, list(range(n)) + [-1]], np.zeros(n + 1)])
    basis = [basis[r] for r in keep]
    m2 = len(basis)

    # phase 2 cost row: c - c_B B^-1 A, expressed through the current tableau
    T[m2, :n] = c
    T[m2, -1] = 0.0
    for r, j in enumerate(basis):
        if T[m2, j] != 0.0:
            T[m2] -= T[m2, j] * T[r]
    iters = _run_phase(T, basis, m2, n, tol, max_iter, iters)

    x = np.zeros(n)
    x[basis] = T[:m2, -1]
    x[np.abs(x) < tol] = 0.0
    B = A[:, basis]
    duals, *_ = np.linalg.lstsq(B.T, c[basis], rcond=None)
    return LPResult(x=x, value=float(c @ x), duals=duals, basis=list(basis), iterations=iters)


def project_onto_polytope(
    point,
    A,
    b,
    start,
    tol: float = 1e-12,
    max_iter: int = 1000,
) -> np.ndarray:
    """Euclidean projection of ``point`` onto ``{u >= 0 : A @ u == b}``.

    Primal active-set method started from the feasible point ``start``; the
    working set is the set of coordinates pinned at zero.
    """
    x = np.asarray(point, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    u = np.array(start, dtype=float)
    u[u < 0] = 0.0
    n = len(u)
    active = u <= tol
    u[active] = 0.0

    for _ in range(max_iter):
        free = np.flatnonzero(~active)
        g = u - x
        AF = A[:, free]
        gF = g[free]
        if free.size:
            # minimize 0.5 * |p + g|^2 on the face: p_F = -(I - AF^+ AF) gF
            pF = -(gF - np.linalg.pinv(AF) @ (AF @ gF))
        else:
            pF = np.zeros(0)
        if np.linalg.norm(pF) <= tol * max(1.0, np.linalg.norm(u)):
            if free.size:
                y, *_ = np.linalg.lstsq(AF.T, gF, rcond=None)
            else:
                y = np.zeros(A.shape[0])
            pinned = np.flatnonzero(active)
            if pinned.size == 0:
                return u
            mult = g[pinned] - A[:, pinned].T @ y
            worst = int(np.argmin(mult))
            if mult[worst] >= -tol:
                return u
            active[pinned[worst]] = False
            continue
        alpha, block = 1.0, None
        for j, pj in zip(free, pF):
            if pj < 0:
                limit = -u[j] / pj
                if limit < alpha:
                    alpha, block = limit, j
        u[free] += alpha * pF
        if block is not None:
            u[block] = 0.0
            active[block] = True
        u[u < 0] = 0.0
    raise SolverError("projection did not converge", {"u": u.tolist(), "n": n})
