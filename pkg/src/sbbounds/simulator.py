"""Monte Carlo runs of Stochastic Balance under the threshold formulation.

Each offline node ``u`` draws ``Theta_u ~ Exp(1)`` and stays available while its
load is below ``Theta_u``.  Every trial owns an independent Philox stream keyed
by the master seed with the trial index in the counter, so results do not
depend on the order in which trials run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adversary import AdversaryStrategy, _count
from .gain_function import GridFunction

ORACLE = "oracle"
GADGET = "gadget"
# below this many neighbors plain floats beat numpy dispatch
SCALAR_NEIGHBORS = 16


@dataclass(frozen=True)
class OfflineNode:
    id: int
    weight: float
    initial_load: float = 0.0


@dataclass(frozen=True)
class Arrival:
    neighbors: tuple[int, ...] = ()
    # accounting-only Type II arrival: fixed beta, no graph interaction
    oracle_beta: float | None = None
    in_s: bool = True


@dataclass(frozen=True)
class SimInstance:
    offline: tuple[OfflineNode, ...]
    arrivals: tuple[Arrival, ...]
    p: float
    target: int | None = None

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        ids = [u.id for u in self.offline]
        if ids != list(range(len(ids))):
            raise ValueError("offline ids must be 0..m-1 in order")
        for u in self.offline:
            if not u.weight > 0:
                raise ValueError(f"node {u.id} has non-positive weight {u.weight}")
            if u.initial_load < 0:
                raise ValueError(f"node {u.id} has negative initial load")
        for a in self.arrivals:
            bad = [k for k in a.neighbors if not (0 <= k < len(ids))]
            if bad:
                raise ValueError(f"arrival references unknown offline node {bad[0]}")

    def to_dict(self) -> dict:
        out = {
            "offline": [
                {"id": u.id, "weight": u.weight}
                | ({"initial_load": u.initial_load} if u.initial_load else {})
                for u in self.offline
            ],
            "arrivals": [
                {"neighbors": list(a.neighbors)}
                | ({"oracle_beta": a.oracle_beta} if a.oracle_beta is not None else {})
                for a in self.arrivals
            ],
            "p": self.p,
        }
        if self.target is not None:
            out["target"] = self.target
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "SimInstance":
        return cls(
            tuple(
                OfflineNode(int(u["id"]), float(u["weight"]), float(u.get("initial_load", 0.0)))
                for u in data["offline"]
            ),
            tuple(
                Arrival(tuple(int(k) for k in a.get("neighbors", ())), a.get("oracle_beta"))
                for a in data["arrivals"]
            ),
            float(data["p"]),
            data.get("target"),
        )

    @classmethod
    def from_json(cls, text: str) -> "SimInstance":
        return cls.from_dict(json.loads(text))


@dataclass
class TrialOutcome:
    thresholds: np.ndarray
    loads: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    assigned_to: np.ndarray  # -1 when the arrival had no available neighbor
    matched: np.ndarray

    @property
    def matched_weight_units(self) -> np.ndarray:
        return self.matched


@dataclass
class SimResult:
    trials: int
    mean: float
    stderr: float
    match_frequency: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "mean": self.mean,
            "stderr": self.stderr,
            "match_frequency": self.match_frequency,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) % 2**64, counter=[0, 0, int(trial), 0]))


def sample_thresholds(seed: int, trial: int, count: int) -> np.ndarray:
    """``Theta = -ln(U)`` for nodes ``0..count-1`` of one trial."""
    u = 1.0 - trial_generator(seed, trial).random(count)  # in (0, 1]
    return -np.log(u)


def f_lookup(f: GridFunction, loads: np.ndarray) -> np.ndarray:
    """Vectorized :meth:`GridFunction.at`, bit-identical to the scalar version."""
    loads = np.asarray(loads, dtype=float)
    t = np.ceil(loads * f.n - 1e-9).astype(np.int64)
    t = np.clip(t, 0, f.n + 1)
    t = np.where(loads <= 1.0 + 1e-12, t, f.n + 1)
    table = np.append(f.x, f.tail)
    return table[t]


def _summary(values: np.ndarray) -> tuple[float, float]:
    trials = len(values)
    # ascending trial order keeps the mean bit-stable
    mean = math.fsum(values.tolist()) / trials
    if trials < 2:
        return mean, 0.0
    var = math.fsum(((values - mean) ** 2).tolist()) / (trials - 1)
    return mean, math.sqrt(var / trials)


def _pick_scalar(neighbors, f, p, theta, w, init, count) -> tuple[int, float]:
    """Same choice and arithmetic as the vectorized branch, without numpy overhead."""
    best, best_f, best_score = -1, 0.0, -math.inf
    for u in neighbors:
        load = float(init[u]) + int(count[u]) * p
        if not load < theta[u]:
            continue
        fu = f.at(load)
        score = float(w[u]) * p * (1.0 - fu)
        if score > best_score or (score == best_score and u > best):
            best, best_f, best_score = u, fu, score
    return best, best_f


def run_stochastic_balance(inst: SimInstance, f: GridFunction, seed: int, trial: int = 0) -> TrialOutcome:
    """One trial: assign each arrival to the available neighbor with the largest ``w p (1 - f(load))``.

    Ties go to the largest id, so the lowest id (the designated target) loses
    every tie.  Dual updates split each assignment's ``w p`` into
    ``alpha += w p f(load)`` and ``beta = w p (1 - f(load))``.
    """
    m = len(inst.offline)
    p = inst.p
    theta = sample_thresholds(seed, trial, m)
    w = np.array([u.weight for u in inst.offline])
    init = np.array([u.initial_load for u in inst.offline])
    count = np.zeros(m, dtype=np.int64)
    alpha = np.zeros(m)
    beta = np.zeros(len(inst.arrivals))
    assigned = np.full(len(inst.arrivals), -1, dtype=np.int64)
    for v, arr in enumerate(inst.arrivals):
        if arr.oracle_beta is not None:
            beta[v] = arr.oracle_beta
            continue
        if not arr.neighbors:
            continue
        if len(arr.neighbors) <= SCALAR_NEIGHBORS:
            u, fu = _pick_scalar(arr.neighbors, f, p, theta, w, init, count)
            if u < 0:
                continue
            alpha[u] += w[u] * p * fu
            beta[v] = w[u] * p * (1.0 - fu)
            count[u] += 1
            assigned[v] = u
            continue
        nb = np.asarray(arr.neighbors, dtype=np.int64)
        load = init[nb] + count[nb] * p
        ok = load < theta[nb]
        if not ok.any():
            continue
        nb, load = nb[ok], load[ok]
        fv = f_lookup(f, load)
        score = w[nb] * p * (1.0 - fv)
        top = score == score.max()
        k = int(np.flatnonzero(top)[np.argmax(nb[top])])
        u = int(nb[k])
        alpha[u] += w[u] * p * fv[k]
        beta[v] = w[u] * p * (1.0 - fv[k])
        count[u] += 1
        assigned[v] = u
    loads = init + count * p
    return TrialOutcome(theta, loads, alpha, beta, assigned, loads >= theta)


def _target_payoff(inst: SimInstance, out: TrialOutcome) -> float:
    u = inst.target
    w = inst.offline[u].weight
    beta_s = 0.0
    for v, arr in enumerate(inst.arrivals):
        if arr.in_s:
            beta_s += out.beta[v]
    return (out.alpha[u] + beta_s) / w


def build_adversarial_instance(
    w_star: float,
    strat: AdversaryStrategy,
    p: float,
    mode: str = ORACLE,
    f: GridFunction | None = None,
    M: int = 1000,
    ell_tilde: float = 0.5,
) -> SimInstance:
    """Target ``u* = 0``, pre-load arrivals, a Type I block, then a Type II block.

    Gadget mode gives every Type II arrival ``M`` fresh competitor nodes at load
    ``ell_tilde`` whose weight makes their score at least ``u*``'s; ``f`` is
    needed to tune that weight.  Oracle mode replaces Type II by its accounting
    contribution and needs ``f`` for the same reason.
    """
    if not (0.0 < p <= 1.0) or abs(round(1.0 / p) * p - 1.0) > 1e-9:
        raise ValueError(f"1/p must be an integer, got p={p}")
    if not w_star > 0:
        raise ValueError(f"target weight must be positive, got {w_star}")
    if mode not in (ORACLE, GADGET):
        raise ValueError(f"unknown mode {mode!r}")
    n_pre = _count(strat.ell, p)
    n_one = _count(strat.psi_tilde, p)
    n_two = _count(strat.psi - strat.psi_tilde, p)
    offline = [OfflineNode(0, w_star)]
    arrivals = [Arrival((0,), in_s=False) for _ in range(n_pre)]
    arrivals += [Arrival((0,)) for _ in range(n_one)]
    if n_two:
        if f is None:
            raise ValueError("Type II arrivals need the gain function to set their tie")
        nominal = (n_pre + n_one) * p
        f_star = float(f_lookup(f, np.array([nominal]))[0])
        target_score = w_star * p * (1.0 - f_star)
        if mode == ORACLE:
            arrivals += [Arrival((), oracle_beta=target_score) for _ in range(n_two)]
        else:
            if M < 1:
                raise ValueError(f"M must be >= 1, got {M}")
            w_tilde = competitor_weight(f, w_star, f_star, p, ell_tilde)
            for _ in range(n_two):
                first = len(offline)
                offline += [OfflineNode(first + c, w_tilde, ell_tilde) for c in range(M)]
                arrivals.append(Arrival((0,) + tuple(range(first, first + M))))
    return SimInstance(tuple(offline), tuple(arrivals), p, target=0)


def competitor_weight(f: GridFunction, w_star: float, f_star: float, p: float, ell_tilde: float) -> float:
    """Smallest double ``w`` with ``w p (1 - f(ell_tilde)) >= w* p (1 - f*)`` in floating point."""
    g = 1.0 - float(f_lookup(f, np.array([ell_tilde]))[0])
    if g <= 0:
        raise ValueError("competitor load leaves no room: f(ell_tilde) = 1")
    goal = w_star * p * (1.0 - f_star)
    w = w_star * (1.0 - f_star) / g
    while w * p * g < goal:
        w = math.nextafter(w, math.inf)
    while w > 0 and math.nextafter(w, 0.0) * p * g >= goal:
        w = math.nextafter(w, 0.0)
    return w


def log10_all_copies_busy(M: int, ell_tilde: float) -> float:
    """``log10`` of the chance that all ``M`` competitors are already matched."""
    return M * math.log10(-math.expm1(-ell_tilde))


def _oracle_fast_path(inst: SimInstance, f: GridFunction, trials: int, seed: int) -> np.ndarray:
    """Target-only chains, vectorized over trials; same arithmetic as the general path."""
    p = inst.p
    w = inst.offline[0].weight
    theta = np.array([sample_thresholds(seed, t, 1)[0] for t in range(trials)])
    count = np.zeros(trials, dtype=np.int64)
    alpha = np.zeros(trials)
    beta_s = np.zeros(trials)
    for arr in inst.arrivals:
        if arr.oracle_beta is not None:
            beta_s += arr.oracle_beta
            continue
        load = count * p
        ok = load < theta
        fv = f_lookup(f, load)
        alpha = np.where(ok, alpha + w * p * fv, alpha)
        if arr.in_s:
            beta_s = beta_s + np.where(ok, w * p * (1.0 - fv), 0.0)
        count += ok
    return (alpha + beta_s) / w


def _is_target_chain(inst: SimInstance) -> bool:
    return (
        inst.target == 0
        and len(inst.offline) == 1
        and inst.offline[0].initial_load == 0.0
        and all(a.oracle_beta is not None or a.neighbors == (0,) for a in inst.arrivals)
    )


def target_payoffs(inst: SimInstance, f: GridFunction, trials: int, seed: int, vectorized: bool = True) -> np.ndarray:
    """Per-trial ``(alpha_u* + sum_S beta_v) / w*``."""
    if inst.target is None:
        raise ValueError("instance has no designated target")
    if vectorized and _is_target_chain(inst):
        return _oracle_fast_path(inst, f, trials, seed)
    return np.array([_target_payoff(inst, run_stochastic_balance(inst, f, seed, t)) for t in range(trials)])


def estimate_kappa(
    strat: AdversaryStrategy,
    f: GridFunction,
    p: float,
    trials: int,
    seed: int,
    mode: str = ORACLE,
    M: int = 1000,
    ell_tilde: float = 0.5,
) -> SimResult:
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    inst = build_adversarial_instance(1.0, strat, p, mode, f, M, ell_tilde)
    values = target_payoffs(inst, f, trials, seed)
    mean, se = _summary(values)
    return SimResult(trials, mean, se)


def run_instance_batch(inst: SimInstance, f: GridFunction, trials: int, seed: int) -> SimResult:
    """Matched-weight statistics of Stochastic Balance on an arbitrary instance."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    w = np.array([u.weight for u in inst.offline])
    totals = np.empty(trials)
    freq = np.zeros(len(inst.offline))
    for t in range(trials):
        out = run_stochastic_balance(inst, f, seed, t)
        totals[t] = math.fsum((w * out.matched).tolist())
        freq += out.matched
    mean, se = _summary(totals)
    return SimResult(trials, mean, se, (freq / trials).tolist())
