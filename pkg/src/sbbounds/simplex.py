"""Dense revised simplex with Bland's rule, run on the dual of an inequality LP.

The primal is ``max c.v  s.t.  A v <= b`` with ``v`` free.  Its dual,
``min b.lam  s.t.  A^T lam = c, lam >= 0``, has one equality per primal
variable, so the basis stays ``n_vars`` square no matter how many primal rows
exist.  Each primal row is one dual column, which makes lazy row generation
plain column generation with a warm-started basis.  At a dual optimum the
simplex multipliers are an optimal primal point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

PIVOT_TOL = 1e-9
COST_TOL = 1e-11
PHASE1_TOL = 1e-9
REFACTOR_EVERY = 64
PRICE_CHUNK = 512


@dataclass
class SimplexResult:
    status: str
    primal: np.ndarray | None
    objective: float
    iterations: int


class DualColumnSimplex:
    """Holds the dual problem and its basis across column additions."""

    def __init__(self, c: np.ndarray):
        c = np.asarray(c, dtype=float)
        self.m = len(c)
        self.rhs = c
        # artificial column k is sign(c_k) e_k so the starting basis is feasible
        self.sign = np.where(c < 0, -1.0, 1.0)
        self.cap = max(4 * self.m, 64)
        self.cols = np.zeros((self.m, self.cap))
        self.cols[:, : self.m] = np.diag(self.sign)
        self.cost = np.zeros(self.cap)
        self.ncols = self.m
        self.basis = np.arange(self.m)
        self.is_basic = np.zeros(self.cap, dtype=bool)
        self.is_basic[: self.m] = True
        self.binv = np.diag(self.sign)
        self.xb = np.abs(c)
        self.iterations = 0
        self.phase1_done = False
        self._since_refactor = 0

    def add_column(self, a: np.ndarray, b: float) -> int:
        """Append a dual column for the primal row ``a . v <= b``; returns its index."""
        if self.ncols == self.cap:
            grow = self.cap
            self.cols = np.hstack([self.cols, np.zeros((self.m, grow))])
            self.cost = np.concatenate([self.cost, np.zeros(grow)])
            self.is_basic = np.concatenate([self.is_basic, np.zeros(grow, dtype=bool)])
            self.cap += grow
        k = self.ncols
        self.cols[:, k] = a
        self.cost[k] = b
        self.ncols += 1
        return k

    # -- linear algebra ---------------------------------------------------

    def _refactor(self):
        B = self.cols[:, self.basis]
        self.binv = np.linalg.inv(B)
        self.xb = self.binv @ self.rhs
        self.xb[np.abs(self.xb) < 1e-13] = 0.0
        self._since_refactor = 0

    def _pivot(self, r: int, q: int, w: np.ndarray, theta: float):
        self.xb -= theta * w
        self.xb[r] = theta
        pr = self.binv[r] / w[r]
        self.binv -= np.outer(w, pr)
        self.binv[r] = pr
        self.is_basic[self.basis[r]] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self._refactor()

    # -- pricing and ratio test ---------------------------------------------

    def _entering(self, costs: np.ndarray, pi: np.ndarray) -> int:
        """Lowest-index non-artificial column with negative reduced cost (Bland)."""
        for start in range(self.m, self.ncols, PRICE_CHUNK):
            stop = min(start + PRICE_CHUNK, self.ncols)
            d = costs[start:stop] - pi @ self.cols[:, start:stop]
            cand = np.flatnonzero((d < -COST_TOL) & ~self.is_basic[start:stop])
            if len(cand):
                return start + int(cand[0])
        return -1

    def _leaving(self, w: np.ndarray) -> tuple[int, float]:
        """Min-ratio row; ties go to the basic column with the lowest index (Bland)."""
        art = self.basis < self.m
        # once phase I is over, a basic artificial sits at zero and must stay there
        zero_rows = art & (np.abs(w) > PIVOT_TOL) if self.phase1_done else np.zeros(self.m, bool)
        pos = (w > PIVOT_TOL) & ~zero_rows
        ratios = np.full(self.m, np.inf)
        ratios[pos] = np.maximum(self.xb[pos], 0.0) / w[pos]
        ratios[zero_rows] = 0.0
        best = ratios.min()
        if not np.isfinite(best):
            return -1, np.inf
        tied = np.flatnonzero(ratios <= best + 1e-12 * max(1.0, best))
        r = int(tied[np.argmin(self.basis[tied])])
        return r, float(ratios[r])

    def _iterate(self, costs: np.ndarray, limit: int) -> str:
        while True:
            if self.iterations >= limit:
                return ITERATION_LIMIT
            pi = costs[self.basis] @ self.binv
            q = self._entering(costs, pi)
            if q < 0:
                return OPTIMAL
            w = self.binv @ self.cols[:, q]
            r, theta = self._leaving(w)
            if r < 0:
                return UNBOUNDED
            self._pivot(r, q, w, theta)

    # -- phases -------------------------------------------------------------

    def _phase1(self, limit: int) -> str:
        costs = np.zeros(self.ncols)
        costs[: self.m] = 1.0
        status = self._iterate(costs, limit)
        if status == ITERATION_LIMIT:
            return status
        self._refactor()
        if float(np.sum(self.xb[self.basis < self.m])) > PHASE1_TOL:
            return INFEASIBLE
        # pivot zero-level artificials out wherever a real column allows it
        for r in range(self.m):
            if self.basis[r] >= self.m:
                continue
            row = self.binv[r] @ self.cols[:, self.m : self.ncols]
            row[self.is_basic[self.m : self.ncols]] = 0.0
            cand = np.flatnonzero(np.abs(row) > 1e-7)
            if len(cand):
                q = self.m + int(cand[0])
                w = self.binv @ self.cols[:, q]
                self._pivot(r, q, w, 0.0)
        self._refactor()
        self.phase1_done = True
        return OPTIMAL

    def solve(self, limit: int, refactor: bool = True) -> SimplexResult:
        """Optimize from the current basis; runs phase I on first call.

        ``refactor=False`` skips the closing refactorization, which dominates the
        cost of a warm restart after one added column; call :meth:`refine` before
        trusting the final point.
        """
        if not self.phase1_done:
            status = self._phase1(limit)
            if status == INFEASIBLE:
                # dual infeasible: the primal is unbounded or infeasible
                return SimplexResult(UNBOUNDED, None, np.inf, self.iterations)
            if status != OPTIMAL:
                return SimplexResult(status, None, np.nan, self.iterations)
        costs = self.cost[: self.ncols].copy()
        costs[: self.m] = 0.0
        status = self._iterate(costs, limit)
        if status == UNBOUNDED:
            return SimplexResult(INFEASIBLE, None, -np.inf, self.iterations)
        if status != OPTIMAL:
            return SimplexResult(status, None, np.nan, self.iterations)
        if refactor:
            self._refactor()
        return self._current(costs)

    def _current(self, costs: np.ndarray) -> SimplexResult:
        primal = costs[self.basis] @ self.binv
        objective = float(costs[self.basis] @ self.xb)
        return SimplexResult(OPTIMAL, primal, objective, self.iterations)

    def refine(self) -> SimplexResult:
        """Refactorize and recompute the point at the current (optimal) basis."""
        self._refactor()
        costs = self.cost[: self.ncols].copy()
        costs[: self.m] = 0.0
        return self._current(costs)
