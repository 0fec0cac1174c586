"""Certified bounds for Stochastic Balance via auxiliary LPs, with a Monte Carlo cross-check."""

from .gain_function import FunctionSpace, GridFunction, analytic_f4_value, check_space, sample_analytic_f4
from .adversary import l_of_f, l_of_f_full_grid, w1_discrete, w2_discrete
from .lp_model import LPInstance, build_aug_lp, build_aug_ub_lp, build_discrete_p_lp, export_lp, import_lp
from .lp_solver import LPSolution, check_feasible, most_violated, solve_full, solve_lazy
from .convergence import bound_from_eta, bound_from_zeta, double_solution, halve_solution, round_report

__version__ = "0.1.0"
