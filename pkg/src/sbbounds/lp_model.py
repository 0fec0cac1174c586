"""Builders for the auxiliary LP families and their plain-text export.

The W2 family has ``(n+1)(n+2)/2`` rows, far too many to store at ``n = 1000``,
so an :class:`LPInstance` keeps the structural rows and the W1 row explicitly
and describes the W2 rows implicitly.  Rows are generated on demand and every
W-row slack is evaluated with the adversary's prefix-sum kernel.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse

from .adversary import W1_CONSTANT, exp_table, prefix_sums, w2_table
from .gain_function import ONE_MINUS_INV_E, FunctionSpace


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class LPFamily(str, Enum):
    AUG = "AUG"
    AUG_UB_F0 = "AUG_UB_F0"
    AUG_UB_F1 = "AUG_UB_F1"
    DISCRETE_P = "DISCRETE_P"
    CUSTOM = "CUSTOM"


@dataclass(frozen=True)
class Row:
    coeffs: tuple[tuple[int, float], ...]
    relation: Relation
    rhs: float
    name: str

    def lhs(self, v: np.ndarray) -> float:
        return math.fsum(c * v[k] for k, c in self.coeffs)

    def residual(self, v: np.ndarray) -> float:
        """Positive when the row is violated."""
        d = self.lhs(v) - self.rhs
        if self.relation is Relation.LE:
            return d
        if self.relation is Relation.GE:
            return -d
        return abs(d)


@dataclass(frozen=True)
class LPInstance:
    """Maximize ``objective . v`` subject to ``rows`` and, if ``n_w2 > 0``, the implicit W2 family.

    Variable 0 is ``y`` and variable ``1 + t`` is the grid value at index ``t``.
    ``w1_row`` is the index of the W1 row within ``rows`` (``-1`` if absent);
    its slack is evaluated with the shared kernel using ``w1_constant``.
    """

    var_names: tuple[str, ...]
    objective: tuple[tuple[int, float], ...]
    rows: tuple[Row, ...]
    tau: float
    family: LPFamily = LPFamily.CUSTOM
    n: int = 0
    n_w2: int = 0
    w1_row: int = -1
    w1_constant: float = W1_CONSTANT

    def __post_init__(self):
        nv = len(self.var_names)
        for row in (*self.rows, Row(self.objective, Relation.LE, 0.0, "objective")):
            for k, _ in row.coeffs:
                if not (0 <= k < nv):
                    raise ValueError(f"row {row.name!r} references undeclared variable {k}")
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.n_w2 and self.n_w2 != self.n:
            raise ValueError("the W2 family must match the grid resolution")

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def w2_count(self) -> int:
        m = self.n_w2
        return (m + 1) * (m + 2) // 2 if m else 0

    @property
    def n_rows(self) -> int:
        return len(self.rows) + self.w2_count

    # W2 rows follow the explicit rows, in lexicographic (i, j) order
    def w2_row_id(self, i: int, j: int) -> int:
        n = self.n_w2
        if not (0 <= i <= n and 0 <= j <= n - i):
            raise ValueError(f"(i={i}, j={j}) outside the W2 index set for n={n}")
        return len(self.rows) + i * (n + 1) - i * (i - 1) // 2 + j

    def w2_pair(self, row_id: int) -> tuple[int, int]:
        n = self.n_w2
        r = row_id - len(self.rows)
        if not (0 <= r < self.w2_count):
            raise ValueError(f"row {row_id} is not a W2 row")
        i = 0
        while r > n - i:
            r -= n - i + 1
            i += 1
        return i, r

    def w2_row(self, i: int, j: int) -> Row:
        """``y - sum_{t<=i} (e_t/n) x_t + (1 - j/n) x_{i+j} <= sum_{i<t<=i+j} e_t/n + (1 - j/n)``."""
        n = self.n_w2
        e = exp_table(n)
        _, Q = prefix_sums(np.zeros(n + 1), n)
        k = i + j
        w = 1.0 - j / n
        coeffs = {0: 1.0}
        for t in range(1, i + 1):
            coeffs[1 + t] = -e[t] / n
        coeffs[1 + k] = coeffs.get(1 + k, 0.0) + w
        return Row(
            tuple(sorted((key, c) for key, c in coeffs.items() if c != 0.0)),
            Relation.LE,
            float((Q[k] - Q[i]) + w),
            f"W2({i},{j})",
        )

    def row(self, row_id: int) -> Row:
        if 0 <= row_id < len(self.rows):
            return self.rows[row_id]
        return self.w2_row(*self.w2_pair(row_id))

    def row_label(self, row_id: int) -> str:
        return self.row(row_id).name if row_id < len(self.rows) else "W2(%d,%d)" % self.w2_pair(row_id)

    def iter_rows(self) -> Iterator[tuple[int, Row]]:
        yield from enumerate(self.rows)
        n = self.n_w2
        if n:
            rid = len(self.rows)
            for i in range(n + 1):
                for j in range(n - i + 1):
                    yield rid, self.w2_row(i, j)
                    rid += 1

    def residuals(self, v: Sequence[float]) -> np.ndarray:
        """Violation of every row in row-id order; positive entries are violated."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n_vars,):
            raise ValueError(f"assignment must have {self.n_vars} entries, got {v.shape}")
        out = np.empty(self.n_rows)
        A, rhs, sense = self._explicit
        d = A @ v - rhs
        out[: len(self.rows)] = np.where(sense == 0, np.abs(d), sense * d)
        if self.w1_row >= 0:
            P, _ = prefix_sums(v[1:], self.n)
            out[self.w1_row] = v[0] - (P[self.n] + self.w1_constant)
        if self.n_w2:
            table = w2_table(v[1:], self.n_w2)
            flat = table[np.isfinite(table)]  # row-major keeps lexicographic order
            out[len(self.rows):] = v[0] - flat
        return out

    @cached_property
    def _explicit(self):
        """Explicit rows as a sparse matrix, their rhs, and a sense (+1 LE, -1 GE, 0 EQ)."""
        data, ri, ci = [], [], []
        for r, row in enumerate(self.rows):
            for k, c in row.coeffs:
                data.append(c)
                ri.append(r)
                ci.append(k)
        A = sparse.csr_matrix((data, (ri, ci)), shape=(len(self.rows), self.n_vars))
        rhs = np.array([row.rhs for row in self.rows])
        sign = {Relation.LE: 1.0, Relation.GE: -1.0, Relation.EQ: 0.0}
        sense = np.array([sign[row.relation] for row in self.rows])
        return A, rhs, sense

    def materialized(self) -> "LPInstance":
        """Same LP with every W2 row stored explicitly and W1 treated as a plain row."""
        return LPInstance(
            self.var_names,
            self.objective,
            tuple(row for _, row in self.iter_rows()),
            self.tau,
            self.family,
            self.n,
        )

    def objective_value(self, v: Sequence[float]) -> float:
        return math.fsum(c * float(v[k]) for k, c in self.objective)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "n": self.n,
            "tau": self.tau,
            "n_vars": self.n_vars,
            "var_names": list(self.var_names),
            "objective": [[k, c] for k, c in self.objective],
            "constraints": [
                {
                    "name": row.name,
                    "coeffs": [[k, c] for k, c in row.coeffs],
                    "relation": row.relation.value,
                    "rhs": row.rhs,
                }
                for _, row in self.iter_rows()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "LPInstance":
        return cls(
            tuple(data["var_names"]),
            tuple((int(k), float(c)) for k, c in data["objective"]),
            tuple(
                Row(
                    tuple((int(k), float(c)) for k, c in r["coeffs"]),
                    Relation(r["relation"]),
                    float(r["rhs"]),
                    r["name"],
                )
                for r in data["constraints"]
            ),
            float(data["tau"]),
            LPFamily(data["family"]),
            int(data["n"]),
        )


def _var_names(n: int, letter: str) -> tuple[str, ...]:
    return ("y",) + tuple(f"{letter}{t}" for t in range(n + 1))


def _w1_row(n: int, constant: float) -> Row:
    e = exp_table(n)
    coeffs = ((0, 1.0),) + tuple((1 + t, -e[t] / n) for t in range(1, n + 1))
    return Row(coeffs, Relation.LE, constant, "W1")


def _envelope_rows(n: int) -> list[Row]:
    rows = [
        Row(((1 + t, 1.0),), Relation.GE, 1.0 - math.exp(-t / n), f"env[{t}]")
        for t in range(n)
    ]
    rows += [
        Row(((1 + t, 1.0), (2 + t, -1.0)), Relation.LE, 0.0, f"mono[{t}]")
        for t in range(n)
    ]
    rows.append(Row(((1 + n, 1.0),), Relation.EQ, ONE_MINUS_INV_E, "end"))
    return rows


def _check_n(n: int):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")


def _assemble(n, letter, structural, tau, family, w1_constant) -> LPInstance:
    rows = tuple(structural) + (_w1_row(n, w1_constant),)
    return LPInstance(
        _var_names(n, letter),
        ((0, 1.0),),
        rows,
        tau,
        family,
        n,
        n_w2=n,
        w1_row=len(rows) - 1,
        w1_constant=w1_constant,
    )


def build_aug_lp(n: int) -> LPInstance:
    """Lower-bound LP over the F3 grid: envelope, monotonicity, ``x_n = 1 - 1/e``, W1, W2."""
    _check_n(n)
    return _assemble(n, "x", _envelope_rows(n), ONE_MINUS_INV_E, LPFamily.AUG, W1_CONSTANT)


def build_aug_ub_lp(n: int, space: "FunctionSpace | str") -> LPInstance:
    """Upper-bound LP: ``0 <= x_t <= x_{t+1} <= cap`` with cap 1 (F0) or ``1 - 1/e`` (F1)."""
    _check_n(n)
    space = FunctionSpace.parse(space)
    if space is FunctionSpace.F0:
        cap, family = 1.0, LPFamily.AUG_UB_F0
    elif space is FunctionSpace.F1:
        cap, family = ONE_MINUS_INV_E, LPFamily.AUG_UB_F1
    else:
        raise ValueError(f"upper-bound LP is defined for F0/F1 only, got {space.value}; use build_aug_lp")
    rows = [Row(((1 + t, 1.0),), Relation.GE, 0.0, f"lo[{t}]") for t in range(n)]
    rows += [Row(((1 + t, 1.0), (2 + t, -1.0)), Relation.LE, 0.0, f"mono[{t}]") for t in range(n)]
    rows += [Row(((2 + t, 1.0),), Relation.LE, cap, f"cap[{t + 1}]") for t in range(n)]
    return _assemble(n, "x", rows, cap, family, W1_CONSTANT)


def discrete_p_resolution(p: float) -> int:
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    n = round(1.0 / p)
    if abs(n * p - 1.0) > 1e-9:
        raise ValueError(f"1/p must be an integer, got p={p}")
    return n


def discrete_w1_constant(n: int) -> float:
    """``sum_{k=1}^{n} e^{-(1 + k/n)} / n``: the W1 tail term with ``p = 1/n``."""
    return math.fsum(math.exp(-(1.0 + k / n)) / n for k in range(1, n + 1))


def build_discrete_p_lp(p: float) -> LPInstance:
    """Same structure as the AUG LP at ``n = 1/p`` with the finite-``p`` W1 constant."""
    n = discrete_p_resolution(p)
    return _assemble(
        n, "a", _envelope_rows(n), ONE_MINUS_INV_E, LPFamily.DISCRETE_P, discrete_w1_constant(n)
    )


# --- text export -----------------------------------------------------------

_HEADER = "# sbbounds lp v1"


def _num(v: float) -> str:
    return f"{v:+.16e}"


def export_lp(lp: LPInstance) -> str:
    """Plain text, one constraint per line, coefficients with 17 significant digits."""
    lines = [
        _HEADER,
        f"family {lp.family.value}",
        f"n {lp.n}",
        f"tau {_num(lp.tau)}",
        "vars " + " ".join(lp.var_names),
    ]

    def terms(coeffs):
        return " ".join(f"{_num(c)} {lp.var_names[k]}" for k, c in coeffs)

    lines.append(f"max: {terms(lp.objective)}")
    for _, row in lp.iter_rows():
        lines.append(f"{row.name}: {terms(row.coeffs)} {row.relation.value} {_num(row.rhs)}")
    return "\n".join(lines) + "\n"


_TERM = re.compile(r"([+-]\d\.\d+e[+-]\d+) (\S+)")


def import_lp(text: str) -> LPInstance:
    """Inverse of :func:`export_lp`; every row comes back explicit."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise ValueError("not an sbbounds LP export")
    meta = {}
    body = []
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key in ("family", "n", "tau", "vars"):
            meta[key] = rest
        else:
            body.append(ln)
    names = tuple(meta["vars"].split())
    index = {name: k for k, name in enumerate(names)}

    def parse_terms(s):
        out = []
        for coef, name in _TERM.findall(s):
            if name not in index:
                raise ValueError(f"unknown variable {name!r}")
            out.append((index[name], float(coef)))
        return tuple(out)

    objective = ()
    rows = []
    for ln in body:
        name, _, rest = ln.partition(": ")
        if name == "max":
            objective = parse_terms(rest)
            continue
        lhs, rel, rhs = rest.rsplit(" ", 2)
        rows.append(Row(parse_terms(lhs), Relation(rel), float(rhs), name))
    return LPInstance(names, objective, tuple(rows), float(meta["tau"]), LPFamily(meta["family"]), int(meta["n"]))
