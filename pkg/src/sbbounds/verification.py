"""Property suites behind ``sbbounds verify``; each returns check records with pass/fail."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adversary import (
    AdversaryStrategy,
    TypeSequence,
    full_grid_ratios,
    kappa_integral,
    kappa_sequence,
    sequence_contributions,
    swap_pairs,
)
from .convergence import double_solution, halve_solution, random_feasible_point
from .gain_function import ONE_MINUS_INV_E, GridFunction, analytic_f4_value, sample_analytic_f4
from .lp_model import build_aug_lp
from .lp_solver import OPTIMAL, check_feasible, solve_lazy
from .simulator import (
    Arrival,
    OfflineNode,
    SimInstance,
    estimate_kappa,
    run_stochastic_balance,
)


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    detail: dict

    def to_dict(self) -> dict:
        return {"suite": self.suite, "name": self.name, "passed": self.passed, "detail": self.detail}


def random_f0(n: int, rng: np.random.Generator) -> GridFunction:
    values = np.sort(rng.uniform(0.0, 1.0, n + 1))
    return GridFunction.from_values(values.tolist(), tail=float(values[-1]))


def random_f3(n: int, rng: np.random.Generator) -> GridFunction:
    _, x = random_feasible_point(n, rng)
    return GridFunction.from_values(x.tolist(), tail=ONE_MINUS_INV_E)


def lemma_suite(n_list=(5, 10, 20), points: int = 200, seed: int = 0, tol: float = 1e-12) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for n in n_list:
        big, small = build_aug_lp(2 * n), build_aug_lp(n)
        worst_up = worst_down = 0.0
        for _ in range(points):
            y, x = random_feasible_point(n, rng)
            yy, xx = double_solution(y, x, n)
            worst_up = max(worst_up, check_feasible(big, np.r_[yy, xx]).max_residual)
            y, x = random_feasible_point(2 * n, rng)
            yy, xx = halve_solution(y, x, n)
            worst_down = max(worst_down, check_feasible(small, np.r_[yy, xx]).max_residual)
        out.append(Check("lemmas", f"double n={n}", worst_up <= tol, {"max_residual": worst_up}))
        out.append(Check("lemmas", f"halve n={2 * n}", worst_down <= tol, {"max_residual": worst_down}))
    return out


def cauchy_suite(n_list=(10, 25, 50)) -> list[Check]:
    cache: dict[int, float] = {}

    def eta(n):
        if n not in cache:
            sol = solve_lazy(build_aug_lp(n))
            if sol.status != OPTIMAL:
                raise RuntimeError(f"AUG LP at n={n} ended with status {sol.status}")
            cache[n] = sol.objective_value
        return cache[n]

    out = []
    for n in n_list:
        gap = abs(eta(2 * n) - eta(n))
        limit = ONE_MINUS_INV_E / (2 * n)
        out.append(Check("cauchy", f"n={n}", gap <= limit, {"gap": gap, "limit": limit}))
    return out


def swap_check(rng: np.random.Generator, triples: int = 100) -> Check:
    violations = 0
    worst = math.inf
    for _ in range(triples):
        p = float(rng.choice([0.05, 0.1, 0.2]))
        length = int(rng.integers(2, round(1 / p) + 1))
        q = rng.integers(0, 2, length)
        q[rng.integers(0, length - 1)] = 0
        q[-1] = 1
        q = tuple(int(b) for b in q)
        pairs = swap_pairs(q)
        v = pairs[int(rng.integers(0, len(pairs)))]
        swapped = q[:v] + (1, 0) + q[v + 2 :]
        f = random_f0(20, rng)
        ell = float(rng.uniform(0.0, 1.5))
        diff = kappa_sequence(TypeSequence(ell, p, q), f) - kappa_sequence(TypeSequence(ell, p, swapped), f)
        worst = min(worst, diff)
        violations += diff < 0
    return Check("adversary", "swap monotonicity", violations == 0, {"triples": triples, "min_gain": worst})


def psi_collapse_violations(f: GridFunction, ell_max: float = 3.0, tie: float = 1e-12) -> int:
    """Grid cells ``(a, j)`` whose ratio over ``k`` is not minimized at ``k = n``."""
    n = f.n
    bad = 0
    for a in range(int(math.ceil(ell_max * n)) + 1):
        R = full_grid_ratios(f, a, ell_max)
        best = np.nanmin(R, axis=0)
        bad += int(np.sum(R[n] > best + tie))
    return bad


def psi_collapse_check(rng: np.random.Generator, members: int = 20, n: int = 50) -> Check:
    counts = [psi_collapse_violations(random_f3(n, rng)) for _ in range(members)]
    return Check("adversary", "psi collapse", sum(counts) == 0, {"members": members, "n": n, "violations": sum(counts)})


def floor_check(rng: np.random.Generator, sequences: int = 100) -> Check:
    bad = 0
    for _ in range(sequences):
        p = float(rng.choice([0.01, 0.05, 0.1]))
        q = rng.integers(0, 2, int(rng.integers(1, round(1 / p) + 1)))
        seq = TypeSequence(float(rng.uniform(0, 2)), p, tuple(q))
        bad += sum(r.contribution < r.floor for r in sequence_contributions(seq, random_f0(20, rng)))
    return Check("adversary", "per-arrival floor (accounting)", bad == 0, {"sequences": sequences, "violations": bad})


def floor_instance(ell_star: float, p: float, weights, loads) -> SimInstance:
    """Pre-load ``u* = 0`` to ``ell_star``, then one arrival adjacent to ``u*`` and competitors."""
    offline = [OfflineNode(0, 1.0)]
    offline += [OfflineNode(1 + k, float(w), float(l)) for k, (w, l) in enumerate(zip(weights, loads))]
    pre = [Arrival((0,), in_s=False) for _ in range(int(round(ell_star / p)))]
    last = Arrival(tuple(range(len(offline))))
    return SimInstance(tuple(offline), tuple(pre + [last]), p, target=0)


def floor_simulation_check(f: GridFunction, rng: np.random.Generator, cases: int = 5, trials: int = 4000, seed: int = 0) -> Check:
    worst = math.inf
    for c in range(cases):
        p = 0.1
        ell_star = p * int(rng.integers(0, 15))
        k = int(rng.integers(1, 4))
        inst = floor_instance(ell_star, p, rng.uniform(0.5, 1.5, k), rng.uniform(0.0, 1.0, k))
        gains = np.empty(trials)
        for t in range(trials):
            full = run_stochastic_balance(inst, f, seed + c, t)
            before = sum(
                p * f.at(s * p) for s in range(len(inst.arrivals) - 1) if s * p < full.thresholds[0]
            )
            gains[t] = (full.alpha[0] - before) + full.beta[-1]
        mean = float(gains.mean())
        se = float(gains.std(ddof=1)) / math.sqrt(trials)
        floor = p * min(math.exp(-ell_star), 1.0 - f.at(ell_star))
        worst = min(worst, (mean - floor + 3 * se))
    return Check("adversary", "per-arrival floor (simulated)", bool(worst >= 0), {"min_margin": worst})


def adversary_suite(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    return [
        swap_check(rng),
        psi_collapse_check(rng),
        floor_check(rng),
        floor_simulation_check(sample_analytic_f4(100), rng, seed=seed),
    ]


def random_strategy(rng: np.random.Generator) -> AdversaryStrategy:
    psi = float(rng.uniform(0.05, 1.0))
    return AdversaryStrategy(float(rng.uniform(0.0, 1.5)), psi, float(rng.uniform(0.0, psi)))


def simulation_suite(trials: int = 100_000, seed: int = 0, strategies: int = 10, p: float = 1e-3) -> list[Check]:
    rng = np.random.default_rng(seed)
    f = sample_analytic_f4(1000)
    out = []
    for s in range(strategies):
        strat = random_strategy(rng)
        res = estimate_kappa(strat, f, p, trials, seed + s)
        target = kappa_integral(strat.ell, strat.psi, strat.psi_tilde, analytic_f4_value)
        z = abs(res.mean - target) / res.stderr if res.stderr > 0 else math.inf
        out.append(
            Check(
                "simulation",
                f"kappa({strat.ell:.3f}, {strat.psi:.3f}, {strat.psi_tilde:.3f})",
                z <= 3,
                {"mean": res.mean, "stderr": res.stderr, "formula": target, "z": z},
            )
        )
    res = estimate_kappa(AdversaryStrategy(0.0, 1.0, 1.0), f, p, trials, seed + strategies)
    z = abs(res.mean - ONE_MINUS_INV_E) / res.stderr
    out.append(Check("simulation", "pure Type I", z <= 3, {"mean": res.mean, "stderr": res.stderr, "z": z}))
    return out


SUITES = ("lemmas", "cauchy", "adversary", "simulation")


def run_suite(name: str, trials: int = 100_000, seed: int = 0) -> list[Check]:
    if name == "lemmas":
        return lemma_suite(seed=seed)
    if name == "cauchy":
        return cauchy_suite()
    if name == "adversary":
        return adversary_suite(seed)
    if name == "simulation":
        return simulation_suite(trials, seed)
    if name == "all":
        return [c for s in SUITES for c in run_suite(s, trials, seed)]
    raise ValueError(f"unknown suite {name!r}")
