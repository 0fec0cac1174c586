import math

import numpy as np
import pytest

from sbbounds.adversary import AdversaryStrategy, kappa_integral
from sbbounds.gain_function import ONE_MINUS_INV_E, GridFunction, sample_analytic_f4
from sbbounds.simulator import (
    GADGET,
    ORACLE,
    Arrival,
    OfflineNode,
    SimInstance,
    build_adversarial_instance,
    competitor_weight,
    estimate_kappa,
    f_lookup,
    log10_all_copies_busy,
    run_instance_batch,
    run_stochastic_balance,
    sample_thresholds,
    target_payoffs,
)
from sbbounds.verification import random_strategy

F_STAR = sample_analytic_f4(1000)
ZERO = GridFunction.from_values([0.0] * 101)


def chain(p, count, w=1.0):
    return SimInstance((OfflineNode(0, w),), tuple(Arrival((0,)) for _ in range(count)), p, target=0)


def test_single_node_match_frequency():
    res = run_instance_batch(chain(0.01, 100), F_STAR, 10_000, seed=3)
    assert abs(res.mean - ONE_MINUS_INV_E) <= 3 * res.stderr
    assert res.match_frequency == [res.mean]


def test_single_node_matched_iff_threshold_at_most_one():
    inst = chain(0.1, 10)
    for t in range(200):
        out = run_stochastic_balance(inst, F_STAR, seed=8, trial=t)
        # ten arrivals of load 0.1 fill the node exactly when theta <= 1 (up to float accumulation)
        if abs(out.thresholds[0] - 1.0) > 1e-9:
            assert bool(out.matched[0]) == (out.thresholds[0] <= 1.0)


def test_empty_neighbors_change_nothing():
    inst = SimInstance((OfflineNode(0, 1.0),), (Arrival(()), Arrival(())), 0.5, target=0)
    out = run_stochastic_balance(inst, F_STAR, seed=1)
    assert out.loads.tolist() == [0.0]
    assert out.assigned_to.tolist() == [-1, -1]
    assert out.beta.tolist() == [0.0, 0.0] and out.alpha.tolist() == [0.0]


def test_tie_goes_to_larger_id():
    inst = SimInstance((OfflineNode(0, 1.0), OfflineNode(1, 1.0)), (Arrival((0, 1)),), 0.1)
    for t in range(20):
        out = run_stochastic_balance(inst, ZERO, seed=2, trial=t)
        assert out.assigned_to.tolist() == [1]


def test_instance_validation():
    with pytest.raises(ValueError):
        SimInstance((OfflineNode(0, 0.0),), (), 0.5)
    with pytest.raises(ValueError):
        SimInstance((OfflineNode(0, 1.0),), (Arrival((3,)),), 0.5)
    with pytest.raises(ValueError):
        SimInstance((OfflineNode(0, 1.0),), (), 0.0)
    with pytest.raises(ValueError):
        SimInstance((OfflineNode(1, 1.0),), (), 0.5)


def test_instance_json_round_trip():
    inst = build_adversarial_instance(1.0, AdversaryStrategy(0.2, 0.5, 0.1), 0.1, GADGET, F_STAR, M=3)
    back = SimInstance.from_json(inst.to_json())
    assert back.offline == inst.offline
    assert [a.neighbors for a in back.arrivals] == [a.neighbors for a in inst.arrivals]


def test_construction_counts():
    inst = build_adversarial_instance(1.0, AdversaryStrategy(0.0, 1.0, 1.0), 0.01)
    assert len(inst.arrivals) == 100
    assert all(a.neighbors == (0,) and a.in_s for a in inst.arrivals)
    inst = build_adversarial_instance(1.0, AdversaryStrategy(0.5, 1.0, 0.0), 0.1, ORACLE, F_STAR)
    pre = [a for a in inst.arrivals if not a.in_s]
    two = [a for a in inst.arrivals if a.oracle_beta is not None]
    assert (len(pre), len(two), len(inst.arrivals)) == (5, 10, 15)
    assert two[0].oracle_beta == pytest.approx(0.1 * (1 - F_STAR.at(0.5)), abs=1e-16)


def test_construction_validation():
    s = AdversaryStrategy(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        build_adversarial_instance(1.0, s, 0.3)
    with pytest.raises(ValueError):
        build_adversarial_instance(1.0, s, 0.1)  # Type II needs f
    with pytest.raises(ValueError):
        build_adversarial_instance(1.0, s, 0.1, "mixed", F_STAR)
    with pytest.raises(ValueError):
        AdversaryStrategy(0.0, 0.5, 0.7)


def test_gadget_layout_and_weight():
    inst = build_adversarial_instance(1.0, AdversaryStrategy(0.0, 0.2, 0.0), 0.1, GADGET, F_STAR, M=5)
    assert len(inst.offline) == 1 + 2 * 5
    assert inst.arrivals[1].neighbors == (0, 6, 7, 8, 9, 10)
    w = inst.offline[1].weight
    g = 1 - F_STAR.at(0.5)
    goal = 0.1 * (1 - F_STAR.at(0.0))
    assert w * 0.1 * g >= goal > math.nextafter(w, 0.0) * 0.1 * g
    assert w == competitor_weight(F_STAR, 1.0, F_STAR.at(0.0), 0.1, 0.5)


def test_all_copies_busy_bound():
    val = log10_all_copies_busy(2000, 0.5)
    assert val < -400
    assert val == pytest.approx(2000 * math.log10(1 - math.exp(-0.5)), rel=1e-14)


def test_pure_type_one_mean():
    res = estimate_kappa(AdversaryStrategy(0.0, 1.0, 1.0), F_STAR, 0.001, 20_000, seed=11)
    assert abs(res.mean - ONE_MINUS_INV_E) <= 3 * res.stderr


def test_type_two_with_zero_function_is_deterministic():
    res = estimate_kappa(AdversaryStrategy(0.0, 1.0, 0.0), ZERO, 0.01, 10_000, seed=4)
    assert res.stderr == 0.0
    assert res.mean == pytest.approx(1.0, abs=1e-12)


def test_mixed_strategy_matches_formula():
    res = estimate_kappa(AdversaryStrategy(0.5, 1.0, 0.3), F_STAR, 0.001, 20_000, seed=5)
    exact = kappa_integral(0.5, 1.0, 0.3, F_STAR)
    assert abs(res.mean - exact) <= 3 * res.stderr + 2e-3


def test_gain_conservation_and_load_cap():
    rng = np.random.default_rng(9)
    m, p = 6, 0.05
    offline = tuple(OfflineNode(u, float(rng.uniform(0.5, 2.0))) for u in range(m))
    arrivals = tuple(Arrival(tuple(sorted(rng.choice(m, size=rng.integers(1, m + 1), replace=False).tolist())))
                     for _ in range(150))
    inst = SimInstance(offline, arrivals, p)
    w = np.array([u.weight for u in offline])
    for t in range(50):
        out = run_stochastic_balance(inst, F_STAR, seed=21, trial=t)
        gained = p * sum(w[u] for u in out.assigned_to if u >= 0)
        assert out.alpha.sum() + out.beta.sum() == pytest.approx(gained, rel=1e-12)
        # an arrival is only assigned while the node's load is below its threshold
        assert np.all(out.loads - p < out.thresholds + 1e-12)
        assert np.array_equal(out.matched, out.loads >= out.thresholds)


def test_fast_path_bit_identical():
    f = F_STAR
    for strat in (AdversaryStrategy(0.3, 0.8, 0.5), AdversaryStrategy(0.0, 1.0, 1.0)):
        inst = build_adversarial_instance(1.0, strat, 0.05, ORACLE, f)
        fast = target_payoffs(inst, f, 300, seed=6)
        slow = target_payoffs(inst, f, 300, seed=6, vectorized=False)
        assert np.array_equal(fast, slow)


def test_determinism():
    s = AdversaryStrategy(0.2, 0.9, 0.4)
    a = estimate_kappa(s, F_STAR, 0.01, 2000, seed=7)
    b = estimate_kappa(s, F_STAR, 0.01, 2000, seed=7)
    assert a == b
    c = estimate_kappa(s, F_STAR, 0.01, 2000, seed=8)
    assert c.mean != a.mean


def test_threshold_streams_are_per_trial():
    # the threshold of trial t does not depend on which trials ran before it
    assert np.array_equal(sample_thresholds(5, 17, 3), sample_thresholds(5, 17, 3))
    assert sample_thresholds(5, 17, 3)[0] != sample_thresholds(5, 18, 3)[0]
    assert np.all(sample_thresholds(5, 0, 1000) > 0)


def test_f_lookup_matches_grid_function():
    loads = np.array([0.0, 0.0005, 0.3, 1.0, 1.2])
    assert f_lookup(F_STAR, loads).tolist() == [F_STAR.at(z) for z in loads]


def test_gadget_agrees_with_oracle():
    rng = np.random.default_rng(13)
    for _ in range(10):
        s = random_strategy(rng)
        o = estimate_kappa(s, F_STAR, 0.05, 600, seed=1)
        g = estimate_kappa(s, F_STAR, 0.05, 600, seed=1, mode=GADGET, M=1000)
        joint = math.hypot(o.stderr, g.stderr)
        assert abs(o.mean - g.mean) <= 3 * joint + 1e-12


def test_per_arrival_floor_in_expectation():
    from sbbounds.verification import floor_simulation_check

    assert floor_simulation_check(F_STAR, np.random.default_rng(2), cases=3, trials=3000).passed


def test_complete_bipartite_star():
    inst = chain(0.01, 100, w=2.5)
    res = run_instance_batch(inst, F_STAR, 10_000, seed=12)
    assert abs(res.mean - 2.5 * ONE_MINUS_INV_E) <= 3 * res.stderr


def test_zero_arrivals():
    inst = SimInstance((OfflineNode(0, 1.0),), (), 0.1)
    res = run_instance_batch(inst, F_STAR, 100, seed=0)
    assert (res.mean, res.stderr) == (0.0, 0.0)
    with pytest.raises(ValueError):
        run_instance_batch(inst, F_STAR, 0, seed=0)


def test_scalar_and_vector_branches_agree(monkeypatch):
    import sbbounds.simulator as sim

    rng = np.random.default_rng(31)
    offline = tuple(OfflineNode(u, float(rng.choice([1.0, 1.5, 2.0]))) for u in range(5))
    arrivals = tuple(Arrival(tuple(sorted(rng.choice(5, size=rng.integers(1, 6), replace=False).tolist())))
                     for _ in range(60))
    inst = SimInstance(offline, arrivals, 0.05)
    scalar = [run_stochastic_balance(inst, F_STAR, 3, t) for t in range(40)]
    monkeypatch.setattr(sim, "SCALAR_NEIGHBORS", 0)
    vector = [run_stochastic_balance(inst, F_STAR, 3, t) for t in range(40)]
    for a, b in zip(scalar, vector):
        assert np.array_equal(a.assigned_to, b.assigned_to)
        assert np.array_equal(a.alpha, b.alpha) and np.array_equal(a.beta, b.beta)
