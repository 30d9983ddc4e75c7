"""Dense two-phase tableau simplex for ``max c'x s.t. A x <= rhs`` with free ``x``.

Free variables are split as ``x = u - v``; each row gets a slack, and rows with
a negative right-hand side are negated and given an artificial variable for
phase one. Pricing is Dantzig's largest reduced cost until ``2 (rows + cols)``
iterations have passed, then Bland's rule to rule out cycling.
"""

import enum
from dataclasses import dataclass

import numpy as np


class LPStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    UNBOUNDED = "Unbounded"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"


class LPSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearProgram:
    """``max c'x`` subject to ``A x <= rhs``; ``x`` unrestricted in sign."""

    c: np.ndarray
    A: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        rhs = np.asarray(self.rhs, dtype=float).ravel()
        if A.shape != (rhs.size, c.size):
            raise ValueError(f"A has shape {A.shape}, expected ({rhs.size}, {c.size})")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", rhs)

    @property
    def shape(self):
        return self.A.shape


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    value: float
    x: np.ndarray | None
    dual: np.ndarray | None = None
    iterations: int = 0
    cs_residual: float = float("nan")

    @property
    def ok(self):
        return self.status is LPStatus.OPTIMAL


class _Tableau:
    def __init__(self, T, basis, tol):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    def pivot(self, r, c):
        T = self.T
        T[r] /= T[r, c]
        col = T[:, c].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, c] = 0.0
        T[r, c] = 1.0
        self.basis[r] = c

    def run(self, ncols, bland_after, max_iter):
        """Iterate on the first ``ncols`` columns; returns a status."""
        T, tol = self.T, self.tol
        while True:
            if self.iterations >= max_iter:
                return LPStatus.ITERATION_LIMIT
            reduced = T[-1, :ncols]
            if self.iterations < bland_after:
                c = int(np.argmax(reduced))
                if reduced[c] <= tol:
                    return LPStatus.OPTIMAL
            else:
                candidates = np.nonzero(reduced > tol)[0]
                if candidates.size == 0:
                    return LPStatus.OPTIMAL
                c = int(candidates[0])
            column = T[:-1, c]
            rows = np.nonzero(column > tol)[0]
            if rows.size == 0:
                return LPStatus.UNBOUNDED
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * max(1.0, abs(best))]
            r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            self.pivot(r, c)
            self.iterations += 1


def solve_lp(lp, max_iter=100_000, tol=1e-9):
    """Solve ``lp`` and return an ``LPResult``.

    On ``Optimal`` the result carries the primal point, the dual multipliers
    ``y >= 0`` (with ``A'y = c``) and the complementary-slackness residual.
    """
    A, rhs, c = lp.A, lp.rhs, lp.c
    nrows, nvars = A.shape
    if nrows == 0:
        if np.any(np.abs(c) > tol):
            return LPResult(LPStatus.UNBOUNDED, np.inf, None)
        return LPResult(LPStatus.OPTIMAL, 0.0, np.zeros(nvars), np.zeros(0), 0, 0.0)

    sign = np.where(rhs < 0, -1.0, 1.0)
    # columns: u (nvars) | v (nvars) | slack (nrows)
    M = np.hstack([A, -A, np.eye(nrows)]) * sign[:, None]
    b = rhs * sign
    c_std = np.concatenate([c, -c, np.zeros(nrows)])
    nstd = M.shape[1]

    needs_art = np.nonzero(sign < 0)[0]
    nart = needs_art.size
    art = np.zeros((nrows, nart))
    art[needs_art, np.arange(nart)] = 1.0

    T = np.zeros((nrows + 1, nstd + nart + 1))
    T[:-1, :nstd] = M
    T[:-1, nstd:nstd + nart] = art
    T[:-1, -1] = b
    basis = [nstd - nrows + i for i in range(nrows)]
    for k, i in enumerate(needs_art):
        basis[i] = nstd + k

    tab = _Tableau(T, basis, tol)
    bland_after = 2 * (nrows + nvars)

    active = np.ones(nrows, dtype=bool)
    if nart:
        c1 = np.zeros(nstd + nart)
        c1[nstd:] = -1.0
        T[-1, :-1] = c1 - c1[basis] @ T[:-1, :-1]
        T[-1, -1] = -(c1[basis] @ T[:-1, -1])
        status = tab.run(nstd + nart, bland_after, max_iter)
        if status is LPStatus.ITERATION_LIMIT:
            return LPResult(status, np.nan, None, iterations=tab.iterations)
        phase1_value = -T[-1, -1]
        if phase1_value < -tol * max(1.0, np.abs(b).max()):
            return LPResult(LPStatus.INFEASIBLE, np.nan, None, iterations=tab.iterations)
        for r in range(nrows):
            if tab.basis[r] >= nstd:
                row = T[r, :nstd]
                nz = np.nonzero(np.abs(row) > tol)[0]
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                else:
                    active[r] = False
        keep = np.append(np.nonzero(active)[0], nrows)
        T = T[keep][:, list(range(nstd)) + [T.shape[1] - 1]]
        tab.T = T
        tab.basis = [bv for bv, a_ in zip(tab.basis, active) if a_]

    T = tab.T
    cb = c_std[tab.basis]
    T[-1, :-1] = c_std - cb @ T[:-1, :-1]
    T[-1, -1] = -(cb @ T[:-1, -1])
    status = tab.run(nstd, bland_after, max_iter)
    if status is not LPStatus.OPTIMAL:
        value = np.inf if status is LPStatus.UNBOUNDED else np.nan
        return LPResult(status, value, None, iterations=tab.iterations)

    z = np.zeros(nstd)
    z[tab.basis] = T[:-1, -1]
    x = z[:nvars] - z[nvars:2 * nvars]

    y = np.zeros(nrows)
    rows = np.nonzero(active)[0]
    B = M[rows][:, tab.basis]
    y_std = np.linalg.lstsq(B.T, c_std[tab.basis], rcond=None)[0]
    y[rows] = y_std * sign[rows]

    value = float(c @ x)
    slack = rhs - A @ x
    cs = max(
        float(np.max(np.abs(A.T @ y - c))) if nvars else 0.0,
        float(np.max(np.maximum(-y, 0.0))),
        float(np.max(np.abs(y * slack))),
        float(np.max(np.maximum(-slack, 0.0))),
    )
    return LPResult(LPStatus.OPTIMAL, value, x, y, tab.iterations, cs)
