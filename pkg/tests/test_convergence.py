import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbbounds.convergence import (
    InfeasibleInputError,
    bound_from_eta,
    bound_from_zeta,
    build_lp,
    certify,
    double_solution,
    halve_solution,
    random_feasible_point,
    report_from_solution,
    round_report,
    table_csv,
    table_row,
)
from sbbounds.gain_function import ONE_MINUS_INV_E, envelope_function
from sbbounds.lp_model import build_aug_lp
from sbbounds.lp_solver import check_feasible, solve_lazy

SHIFT = ONE_MINUS_INV_E


def test_double_example():
    y, x = double_solution(0.3, [0.0, SHIFT], 1)
    assert np.array_equal(x, [0.0, SHIFT, SHIFT])
    assert y == 0.3 - SHIFT / 2
    assert y == pytest.approx(-0.0161, abs=1e-4)


def test_halve_example():
    y, x = halve_solution(0.2, [0.0, 0.5, SHIFT], 1)
    assert np.array_equal(x, [0.0, SHIFT])
    assert y == pytest.approx(-0.1161, abs=1e-4)


def test_maps_reject_infeasible_input():
    with pytest.raises(InfeasibleInputError) as err:
        double_solution(0.9, [0.0, SHIFT], 1)
    assert err.value.label.startswith("W")
    with pytest.raises(InfeasibleInputError):
        halve_solution(0.2, [0.0, 0.1, SHIFT], 1)  # below the envelope
    with pytest.raises(ValueError):
        double_solution(0.0, [0.0, SHIFT], 2)


def test_envelope_maps():
    y, x = double_solution(0.0, envelope_function(10).x, 10)
    assert check_feasible(build_aug_lp(20), np.concatenate([[y], x])).max_residual <= 1e-12
    y, x = halve_solution(0.0, envelope_function(20).x, 10)
    assert check_feasible(build_aug_lp(10), np.concatenate([[y], x])).max_residual <= 1e-12


def test_optimal_points_map_below_optima():
    s50, s100 = solve_lazy(build_aug_lp(50)), solve_lazy(build_aug_lp(100))
    y, x = double_solution(s50.y, s50.x, 50)
    assert check_feasible(build_aug_lp(100), np.concatenate([[y], x])).max_residual <= 1e-12
    assert y <= s100.objective_value + 1e-12
    y, x = halve_solution(s100.y, s100.x, 50)
    assert check_feasible(build_aug_lp(50), np.concatenate([[y], x])).max_residual <= 1e-12
    assert y <= s50.objective_value + 1e-12


@pytest.mark.parametrize("n", [5, 10, 20])
def test_double_preserves_feasibility(n):
    rng = np.random.default_rng(100 + n)
    big = build_aug_lp(2 * n)
    worst = 0.0
    for _ in range(200):
        y, x = random_feasible_point(n, rng)
        yt, xt = double_solution(y, x, n)
        worst = max(worst, check_feasible(big, np.concatenate([[yt], xt])).max_residual)
    assert worst <= 1e-12


@pytest.mark.parametrize("n", [5, 10, 20])
def test_halve_preserves_feasibility(n):
    rng = np.random.default_rng(200 + n)
    small = build_aug_lp(n)
    worst = 0.0
    for _ in range(200):
        y, x = random_feasible_point(2 * n, rng)
        yh, xh = halve_solution(y, x, n)
        worst = max(worst, check_feasible(small, np.concatenate([[yh], xh])).max_residual)
    assert worst <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_random_points_feasible_and_maps_hold(n, seed):
    rng = np.random.default_rng(seed)
    y, x = random_feasible_point(n, rng)
    assert check_feasible(build_aug_lp(n), np.concatenate([[y], x])).max_residual <= 1e-12
    yt, xt = double_solution(y, x, n)
    assert check_feasible(build_aug_lp(2 * n), np.concatenate([[yt], xt])).max_residual <= 1e-12
    y2, x2 = random_feasible_point(2 * n, rng)
    yh, xh = halve_solution(y2, x2, n)
    assert check_feasible(build_aug_lp(n), np.concatenate([[yh], xh])).max_residual <= 1e-12


def test_bound_from_eta_examples():
    lo, hi = bound_from_eta(10, 0.5713, SHIFT)
    assert (round_report(lo, "down"), round_report(hi, "up")) == ("0.5080", "0.6346")
    lo, hi = bound_from_eta(1000, 0.5803, SHIFT)
    assert round_report(lo, "down") >= "0.5796"
    assert round_report(hi, "up") <= "0.5810"
    assert bound_from_eta(7, 0.42, 0.0) == (0.42, 0.42)


def test_bound_from_zeta_examples():
    assert round_report(bound_from_zeta(1000, 0.5831, 1.0), "up") == "0.5841"
    assert round_report(bound_from_zeta(10, 0.5736, 1.0), "up") == "0.6736"
    assert round_report(bound_from_zeta(100, 0.5823, 1.0), "up") == "0.5923"


def test_tau_domain():
    for tau in (-0.1, 1.1, math.nan):
        with pytest.raises(ValueError):
            bound_from_eta(10, 0.5, tau)
        with pytest.raises(ValueError):
            bound_from_zeta(10, 0.5, tau)
    with pytest.raises(ValueError):
        bound_from_eta(0, 0.5, 0.5)


def test_round_report_examples():
    assert round_report(0.58034, "down") == "0.5803"
    assert round_report(0.58301, "up") == "0.5831"
    assert round_report(0.5803, "down") == "0.5803"
    assert round_report(0.5803, "up") == "0.5803"
    assert round_report(0.57127, "nearest") == "0.5713"
    assert round_report(0.0, "down") == "0.0000"
    with pytest.raises(ValueError):
        round_report(0.5, "sideways")
    with pytest.raises(ValueError):
        round_report(math.inf, "up")


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1))
def test_round_report_brackets(v):
    lo, hi = float(round_report(v, "down")), float(round_report(v, "up"))
    assert lo <= v <= hi
    assert hi - lo <= 1e-4 + 1e-12
    assert len(round_report(v, "down").split(".")[1]) == 4


@pytest.mark.parametrize("n", [10, 50])
def test_sandwich_consistency(n):
    lo_n, hi_n = bound_from_eta(n, solve_lazy(build_aug_lp(n)).objective_value, SHIFT)
    lo_2n, hi_2n = bound_from_eta(2 * n, solve_lazy(build_aug_lp(2 * n)).objective_value, SHIFT)
    assert lo_n <= lo_2n + SHIFT / n
    assert hi_2n <= hi_n + SHIFT / n


def test_report_invariants():
    aug = certify("aug", "F3", 20)
    assert aug.lower <= aug.value <= aug.upper
    assert aug.upper - aug.lower == pytest.approx(2 * aug.tau / 20, abs=1e-15)
    ub = certify("ub", "F0", 20)
    assert ub.lower is None and ub.rounded["lower"] is None
    assert ub.upper - ub.value == pytest.approx(1 / 20, abs=1e-15)
    f1 = certify("ub", "F1", 20)
    assert f1.tau == ONE_MINUS_INV_E


def test_bound_report_json_schema():
    doc = json.loads(certify("aug", "F3", 10).to_json())
    assert set(doc) == {"family", "space", "n", "value", "tau", "lower", "upper", "rounded", "solver"}
    assert isinstance(doc["n"], int) and isinstance(doc["value"], float)
    assert set(doc["rounded"]) == {"value", "lower", "upper"}
    assert all(isinstance(v, str) for v in doc["rounded"].values())
    assert doc["solver"]["status"] == "optimal"
    assert doc["space"] == "F3" and doc["family"] == "AUG"


def test_build_lp_validation():
    with pytest.raises(ValueError):
        build_lp("aug", "F0", 10)
    with pytest.raises(ValueError):
        build_lp("ub", "F3", 10)
    with pytest.raises(ValueError):
        build_lp("other", "F0", 10)


def test_report_rejects_non_optimal():
    lp = build_aug_lp(5)
    sol = solve_lazy(lp)
    sol.status = "infeasible"
    with pytest.raises(RuntimeError):
        report_from_solution(lp, sol)


def test_rounding_conventions_rows():
    caption = table_row(10, rounding="caption")
    printed = table_row(10)
    assert caption == {"n": 10, "eta": "0.5712", "eta_lower": "0.5080", "eta_upper": "0.6345",
                       "zeta": "0.5736", "zeta_upper": "0.6736"}
    assert printed == {"n": 10, "eta": "0.5713", "eta_lower": "0.5080", "eta_upper": "0.6346",
                       "zeta": "0.5736", "zeta_upper": "0.6736"}
    with pytest.raises(ValueError):
        table_row(10, rounding="other")


def test_table_csv_layout():
    text = table_csv([table_row(10, rounding="printed")])
    assert text.splitlines() == ["n,eta,eta_lower,eta_upper,zeta,zeta_upper", "10,0.5713,0.5080,0.6346,0.5736,0.6736"]
