"""The adversary's payoff functional for Stochastic Balance.

All integrals are right-endpoint Riemann sums on the ``n``-grid, the same sums
that appear in the auxiliary LP rows.  ``w1_discrete``/``w2_discrete`` and the
LP row evaluator in :mod:`sbbounds.lp_model` share :func:`prefix_sums`, so a row
slack equals ``W - y`` bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .gain_function import (
    FunctionSpace,
    GridFunction,
    check_space,
)

W1_CONSTANT = math.exp(-1.0) * (1.0 - math.exp(-1.0))
W1_MARKER = "W1"


class NotInF3Error(ValueError):
    """Raised when the two-branch simplification is applied outside F3."""


@lru_cache(maxsize=64)
def _exp_table(n: int, length: int) -> np.ndarray:
    table = np.exp(-np.arange(length, dtype=float) / n)
    table.setflags(write=False)
    return table


def exp_table(n: int, length: int | None = None) -> np.ndarray:
    """``e^(-t/n)`` for ``t = 0..length-1`` (default ``n + 1``); read-only and cached."""
    return _exp_table(int(n), int(n + 1 if length is None else length))


def prefix_sums(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``P[i] = (1/n) sum_{t<=i} x_t e^(-t/n)`` and ``Q[k] = (1/n) sum_{t<=k} e^(-t/n)``.

    Both start at ``t = 1`` so ``P[0] = Q[0] = 0``.  ``x`` may be longer than
    ``n + 1`` (tail-extended) and the sums extend with it.
    """
    x = np.asarray(x, dtype=float)
    e = exp_table(n, len(x))
    P = np.zeros(len(x))
    Q = np.zeros(len(x))
    P[1:] = np.cumsum(x[1:] * e[1:]) / n
    Q[1:] = np.cumsum(e[1:]) / n
    return P, Q


def w1_from_values(x: np.ndarray, n: int, constant: float = W1_CONSTANT) -> float:
    P, _ = prefix_sums(x, n)
    return float(P[n] + constant)


def w2_from_values(x: np.ndarray, n: int, i: int, j: int) -> float:
    if not (0 <= i <= n and 0 <= j <= n - i):
        raise ValueError(f"(i={i}, j={j}) outside the W2 index set for n={n}")
    P, Q = prefix_sums(x, n)
    k = i + j
    return float(P[i] + (Q[k] - Q[i]) + ((1.0 - j / n) * (1.0 - x[k])))


def w2_table(x: np.ndarray, n: int) -> np.ndarray:
    """Every W2 value in one ``(n+1, n+1)`` array; entries with ``i + j > n`` are ``inf``."""
    x = np.asarray(x, dtype=float)[: n + 1]
    P, Q = prefix_sums(x, n)
    i = np.arange(n + 1)[:, None]
    j = np.arange(n + 1)[None, :]
    k = i + j
    valid = k <= n
    kc = np.where(valid, k, n)
    out = P[i] + (Q[kc] - Q[i]) + ((1.0 - j / n) * (1.0 - x[kc]))
    return np.where(valid, out, np.inf)


def w1_discrete(f: GridFunction) -> float:
    return w1_from_values(f.x, f.n)


def w2_discrete(f: GridFunction, i: int, j: int) -> float:
    return w2_from_values(f.x, f.n, i, j)


def l_of_f(f: GridFunction, tie_tol: float | None = None) -> tuple[float, "str | tuple[int, int]"]:
    """Two-branch payoff ``min(W1, min_ij W2)`` and the binding constraint.

    Only valid for F3 members.  Rows within ``tie_tol`` of the minimum count as
    tied; ties go to W1, then to the lexicographically smallest ``(i, j)``.  The
    default tolerance ``1/n^2`` is the local error of one Riemann step, below
    which two rows are not distinguishable at resolution ``n``.
    """
    if check_space(f, FunctionSpace.F3):
        raise NotInF3Error(
            "l_of_f needs an F3 member; use l_of_f_full_grid for general functions"
        )
    n = f.n
    tie_tol = 1.0 / n**2 if tie_tol is None else tie_tol
    w1 = w1_discrete(f)
    table = w2_table(f.x, n)
    w2_min = float(table.min())
    value = min(w1, w2_min)
    if w1 <= value + tie_tol:
        return value, W1_MARKER
    # row-major flatten gives lexicographic (i, j) order
    first = int(np.flatnonzero(table.ravel() <= value + tie_tol)[0])
    return value, divmod(first, n + 1)


def full_grid_ratios(f: GridFunction, a: int, ell_max: float = 3.0) -> np.ndarray:
    """Payoff ratios at pre-load ``a/n`` as an array indexed ``[k, j]``.

    ``k`` is the total load ``psi = k/n`` (``k >= 1``), ``j`` the Type I part
    ``psi_tilde = j/n`` with ``j <= k``.  Invalid cells are ``nan``.
    """
    n = f.n
    length = int(math.ceil(ell_max * n)) + n + 1
    x = f.extended(length)
    P, Q = prefix_sums(x, n)
    k = np.arange(n + 1)[:, None]
    j = np.arange(n + 1)[None, :]
    num = P[a] + (Q[a + j] - Q[a]) + ((k - j) / n) * (1.0 - x[a + j])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / (k / n)
    return np.where((j <= k) & (k >= 1), ratio, np.nan)


def l_of_f_full_grid(f: GridFunction, ell_max: float = 3.0) -> float:
    """Minimum payoff ratio over the full (pre-load, total load, Type I load) grid.

    Works for any non-decreasing ``f``; no F3 structure is assumed.
    """
    if check_space(f, FunctionSpace.F0):
        raise ValueError("l_of_f_full_grid needs a non-decreasing gain function")
    if ell_max < 1:
        raise ValueError(f"ell_max must be >= 1, got {ell_max}")
    n = f.n
    a_max = int(math.ceil(ell_max * n))
    best = math.inf
    for a in range(a_max + 1):
        best = min(best, float(np.nanmin(full_grid_ratios(f, a, ell_max))))
    return best


@dataclass(frozen=True)
class AdversaryStrategy:
    ell: float
    psi: float
    psi_tilde: float

    def __post_init__(self):
        if self.ell < 0:
            raise ValueError(f"pre-load must be nonnegative, got {self.ell}")
        if not (0.0 <= self.psi <= 1.0):
            raise ValueError(f"psi must lie in [0, 1], got {self.psi}")
        if not (0.0 <= self.psi_tilde <= self.psi):
            raise ValueError(f"psi_tilde must lie in [0, psi], got {self.psi_tilde}")


@dataclass(frozen=True)
class TypeSequence:
    """Pre-load ``ell`` then arrivals of load ``p``; ``q[v] = 1`` is Type I, 0 is Type II."""

    ell: float
    p: float
    q: tuple[int, ...]

    def __post_init__(self):
        if self.ell < 0:
            raise ValueError(f"pre-load must be nonnegative, got {self.ell}")
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        object.__setattr__(self, "q", tuple(int(b) for b in self.q))
        if any(b not in (0, 1) for b in self.q):
            raise ValueError("q must be a 0/1 sequence")

    @classmethod
    def from_strategy(cls, strat: AdversaryStrategy, p: float) -> "TypeSequence":
        """Type I block then Type II block, as the swap argument prescribes."""
        ones = _count(strat.psi_tilde, p)
        zeros = _count(strat.psi - strat.psi_tilde, p)
        return cls(strat.ell, p, (1,) * ones + (0,) * zeros)


def _count(load: float, p: float) -> int:
    return int(math.ceil(load / p - 1e-9)) if load > 0 else 0


def preload_alpha(ell: float, p: float, f: GridFunction) -> float:
    """Right-endpoint sum of ``e^-z f(z)`` over the pre-load, step ``ell / ceil(ell/p)``."""
    m = _count(ell, p)
    if m == 0:
        return 0.0
    dz = ell / m
    return math.fsum(math.exp(-s * dz) * f.at(s * dz) * dz for s in range(1, m + 1))


@dataclass(frozen=True)
class ArrivalRecord:
    load: float
    kind: int
    contribution: float
    floor: float


def sequence_contributions(seq: TypeSequence, f: GridFunction) -> list[ArrivalRecord]:
    """Per-arrival expected ``(delta alpha + beta) / w*`` for a deterministic type sequence.

    A Type I arrival at load ``a`` pays ``p e^-a`` and raises the load by ``p``;
    Type II pays ``p (1 - f(a))`` and leaves the load alone.  ``floor`` is the
    per-arrival lower bound ``p min(e^-a, 1 - f(a))``.
    """
    out = []
    raised = 0
    for kind in seq.q:
        load = seq.ell + raised * seq.p
        type1 = seq.p * math.exp(-load)
        type2 = seq.p * (1.0 - f.at(load))
        out.append(ArrivalRecord(load, kind, type1 if kind else type2, min(type1, type2)))
        raised += kind
    return out


def kappa_sequence(seq: TypeSequence, f: GridFunction) -> float:
    """Expected ``(alpha_u* + sum beta_v) / w*`` under the type sequence."""
    records = sequence_contributions(seq, f)
    return preload_alpha(seq.ell, seq.p, f) + math.fsum(r.contribution for r in records)


def _alpha_integral(ell: float, f: "GridFunction | Callable[[float], float]") -> float:
    if ell <= 0:
        return 0.0
    if isinstance(f, GridFunction):
        # exact for the piecewise-constant right-endpoint reading of f
        n = f.n
        total = []
        t = 1
        while (t - 1) / n < ell:
            lo, hi = (t - 1) / n, min(t / n, ell)
            value = f.values[t] if t <= n else f.tail
            total.append(value * (math.exp(-lo) - math.exp(-hi)))
            t += 1
        return math.fsum(total)
    val, _ = integrate.quad(lambda z: math.exp(-z) * f(z), 0.0, ell, limit=200, epsabs=1e-13)
    return val


def kappa_integral(
    ell: float, psi: float, psi_tilde: float, f: "GridFunction | Callable[[float], float]"
) -> float:
    """Vanishing-``p`` payoff: pre-load alpha, the Type I block, then the Type II block."""
    fz = f.at(ell + psi_tilde) if isinstance(f, GridFunction) else f(ell + psi_tilde)
    return (
        _alpha_integral(ell, f)
        + (math.exp(-ell) - math.exp(-(ell + psi_tilde)))
        + (psi - psi_tilde) * (1.0 - fz)
    )


def swap_pairs(q: Sequence[int]) -> list[int]:
    """Positions ``v`` where ``q[v], q[v+1] == 0, 1``."""
    return [v for v in range(len(q) - 1) if q[v] == 0 and q[v + 1] == 1]
