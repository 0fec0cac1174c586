"""Full and lazily generated solves of an :class:`LPInstance`, plus residual checks."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .lp_model import LPInstance, Relation, Row
from .simplex import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    DualColumnSimplex,
)

FEAS_TOL = 1e-9
CUT_TOL = 1e-10
FULL_ROW_LIMIT = 10_000
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class LPSolution:
    objective_value: float
    assignment: np.ndarray | None
    status: str
    var_names: tuple[str, ...]
    diagnostics: dict = field(default_factory=dict)

    @property
    def y(self) -> float:
        return float(self.assignment[0])

    @property
    def x(self) -> np.ndarray:
        return self.assignment[1:]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective_value,
            "assignment": None
            if self.assignment is None
            else dict(zip(self.var_names, map(float, self.assignment))),
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class FeasibilityReport:
    max_residual: float
    worst_row: int
    worst_label: str

    def feasible(self, tol: float = FEAS_TOL) -> bool:
        return self.max_residual <= tol


def most_violated(lp: LPInstance, assignment) -> tuple[int, float]:
    """Row with the largest violation; ``np.argmax`` keeps the smallest row id on ties."""
    res = lp.residuals(assignment)
    r = int(np.argmax(res))
    return r, float(res[r])


def check_feasible(lp: LPInstance, assignment, tol: float = FEAS_TOL) -> FeasibilityReport:
    r, v = most_violated(lp, assignment)
    return FeasibilityReport(max(v, 0.0), r, lp.row_label(r))


def _dense(lp: LPInstance, row: Row) -> list[tuple[np.ndarray, float]]:
    """The row as one or two ``a . v <= b`` pieces."""
    a = np.zeros(lp.n_vars)
    for k, c in row.coeffs:
        a[k] += c
    if row.relation is Relation.LE:
        return [(a, row.rhs)]
    if row.relation is Relation.GE:
        return [(-a, -row.rhs)]
    return [(a, row.rhs), (-a, -row.rhs)]


class _Session:
    def __init__(self, lp: LPInstance):
        self.lp = lp
        c = np.zeros(lp.n_vars)
        for k, v in lp.objective:
            c[k] += v
        self.c = c
        self.simplex = DualColumnSimplex(c)
        self.active: set[int] = set()

    def add(self, row_id: int):
        if row_id in self.active:
            return
        self.active.add(row_id)
        for a, b in _dense(self.lp, self.lp.row(row_id)):
            self.simplex.add_column(a, b)

    def limit(self) -> int:
        return self.simplex.iterations + 50 * (len(self.active) + self.lp.n_vars)

    def result(self, status, v, started, rounds) -> LPSolution:
        lp = self.lp
        n_expl = len(lp.rows)
        diag = {
            "iterations": self.simplex.iterations,
            "active_rows": len(self.active),
            "active_w2_rows": sum(1 for r in self.active if r >= n_expl),
            "cut_rounds": rounds,
            "seconds": round(time.perf_counter() - started, 6),
        }
        if v is None:
            diag["max_residual"] = None
            return LPSolution(float("nan"), None, status, lp.var_names, diag)
        report = check_feasible(lp, v)
        diag["max_residual"] = report.max_residual
        diag["worst_row"] = report.worst_label
        return LPSolution(float(self.c @ v), v, status, lp.var_names, diag)


def _final(session: _Session, res, started, rounds, feas_tol) -> LPSolution:
    if res.status == UNBOUNDED:
        # dual infeasible: decide between primal infeasible and unbounded with a zero objective
        probe = DualColumnSimplex(np.zeros(session.lp.n_vars))
        for r in sorted(session.active):
            for a, b in _dense(session.lp, session.lp.row(r)):
                probe.add_column(a, b)
        zero = probe.solve(session.limit())
        status = INFEASIBLE if zero.status == INFEASIBLE else UNBOUNDED
        return session.result(status, None, started, rounds)
    if res.status != OPTIMAL:
        return session.result(res.status, None, started, rounds)
    sol = session.result(OPTIMAL, res.primal, started, rounds)
    if sol.diagnostics["max_residual"] > feas_tol:
        sol.status = NUMERICAL_FAILURE
    return sol


def solve_full(lp: LPInstance, feas_tol: float = FEAS_TOL) -> LPSolution:
    """Every row enters the simplex at once; refused above ten thousand rows."""
    if lp.n_rows > FULL_ROW_LIMIT:
        raise ValueError(f"solve_full handles at most {FULL_ROW_LIMIT} rows, got {lp.n_rows}; use solve_lazy")
    started = time.perf_counter()
    session = _Session(lp)
    for r in range(lp.n_rows):
        session.add(r)
    res = session.simplex.solve(session.limit())
    return _final(session, res, started, 0, feas_tol)


def initial_rows(lp: LPInstance) -> list[int]:
    """Explicit rows plus the two W2 diagonals ``j = 0`` and ``j = n - i``."""
    rows = list(range(len(lp.rows)))
    n = lp.n_w2
    if n:
        for i in range(n + 1):
            rows.append(lp.w2_row_id(i, 0))
            if n - i:
                rows.append(lp.w2_row_id(i, n - i))
    return sorted(rows)


def solve_lazy(lp: LPInstance, feas_tol: float = FEAS_TOL, cut_tol: float = CUT_TOL) -> LPSolution:
    """Row generation over the W2 family: solve, add the most violated row, repeat."""
    started = time.perf_counter()
    session = _Session(lp)
    for r in initial_rows(lp):
        session.add(r)
    rounds = 0
    while True:
        res = session.simplex.solve(session.limit(), refactor=False)
        if res.status != OPTIMAL:
            return _final(session, res, started, rounds, feas_tol)
        r, viol = most_violated(lp, res.primal)
        if viol <= cut_tol:
            res = session.simplex.refine()
            r, viol = most_violated(lp, res.primal)
            if viol <= cut_tol:
                return _final(session, res, started, rounds, feas_tol)
        if r in session.active:
            # the simplex already holds this row; the excess is round-off
            return _final(session, res, started, rounds, feas_tol)
        session.add(r)
        rounds += 1


def solve(lp: LPInstance, method: str = "lazy", feas_tol: float = FEAS_TOL) -> LPSolution:
    if method == "lazy":
        return solve_lazy(lp, feas_tol)
    if method == "full":
        return solve_full(lp, feas_tol)
    raise ValueError(f"unknown method {method!r}")
