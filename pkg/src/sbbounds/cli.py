"""Command-line entry point: ``sbbounds <command> [flags]``.

Exit status 0 on success, 1 on invalid input or a failed verification, 2 when
the LP solver does not reach an optimum.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import adversary, convergence, lp_model, lp_solver, simulator, verification
from .gain_function import FunctionSpace, GridFunction, analytic_f4_value, sample_analytic_f4

DEFAULT_N = 100


class UsageError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _n_list(text: str) -> list[int]:
    try:
        values = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _space(text: str) -> FunctionSpace:
    try:
        return FunctionSpace.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbbounds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def lp_flags(p, families=("aug", "ub")):
        p.add_argument("--family", choices=families, default="aug")
        p.add_argument("--space", type=_space, default=None, help="f0, f1 or f3 (default f3 for aug, f0 for ub)")

    p = sub.add_parser("solve", help="solve one auxiliary LP")
    lp_flags(p, ("aug", "ub", "discretep"))
    p.add_argument("--n", type=_positive_int, default=None)
    p.add_argument("--p", type=float, default=None, help="arrival load for the discrete-p LP")
    p.add_argument("--method", choices=("lazy", "full"), default="lazy")
    p.add_argument("--tol", type=float, default=lp_solver.FEAS_TOL)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("bounds", help="certified bounds as a JSON report")
    lp_flags(p)
    p.add_argument("--n", type=_positive_int, default=DEFAULT_N)
    p.add_argument("--method", choices=("lazy", "full"), default="lazy")
    p.add_argument("--rounding", choices=convergence.ROUNDINGS, default=convergence.PRINTED)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("table", help="bounds table as CSV")
    p.add_argument("--n-list", type=_n_list, default=[10, 100])
    p.add_argument("--rounding", choices=convergence.ROUNDINGS, default=convergence.PRINTED)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("verify", help="run property suites")
    p.add_argument("--suite", choices=verification.SUITES + ("all",), default="all")
    p.add_argument("--n", type=_positive_int, default=None, help="grid size for the lemma suite")
    p.add_argument("--trials", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of the adversary payoff")
    p.add_argument("--ell", type=float, required=True)
    p.add_argument("--psi", type=float, required=True)
    p.add_argument("--psitilde", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--trials", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--f", default="f4", help="'f4' or a GridFunction JSON file")
    p.add_argument("--mode", choices=(simulator.ORACLE, simulator.GADGET), default=simulator.ORACLE)
    p.add_argument("--M", type=_positive_int, default=1000)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("analytic", help="payoff of the closed-form optimum over F4")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("export-lp", help="write an LP as plain text")
    lp_flags(p, ("aug", "ub", "discretep"))
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=_positive_int)
    group.add_argument("--p", type=float)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.write_text(text if text.endswith("\n") else text + "\n")


def _dump(data) -> str:
    return json.dumps(data, indent=2, sort_keys=False)


def _lp_from_args(args) -> lp_model.LPInstance:
    if args.family == "discretep":
        if args.p is None:
            raise UsageError("--family discretep needs --p")
        if args.space not in (None, FunctionSpace.F3):
            raise UsageError("the discrete-p LP lives on F3")
        return lp_model.build_discrete_p_lp(args.p)
    if getattr(args, "p", None) is not None:
        raise UsageError("--p only applies to --family discretep")
    n = args.n if args.n is not None else DEFAULT_N
    space = args.space or (FunctionSpace.F3 if args.family == "aug" else FunctionSpace.F0)
    return convergence.build_lp(args.family, space, n)


def _solve(lp, method, tol=lp_solver.FEAS_TOL) -> lp_solver.LPSolution:
    if method == "full" and lp.n_rows > lp_solver.FULL_ROW_LIMIT:
        raise UsageError(f"--method full handles at most {lp_solver.FULL_ROW_LIMIT} rows; this LP has {lp.n_rows}")
    sol = lp_solver.solve(lp, method, tol)
    if sol.status != lp_solver.OPTIMAL:
        raise SolverError(f"solver finished with status {sol.status}")
    return sol


def cmd_solve(args):
    lp = _lp_from_args(args)
    sol = _solve(lp, args.method, args.tol)
    _emit(_dump({"family": lp.family.value, "n": lp.n, "tau": lp.tau, **sol.to_dict()}), args.out)


def cmd_bounds(args):
    space = args.space or (FunctionSpace.F3 if args.family == "aug" else FunctionSpace.F0)
    lp = convergence.build_lp(args.family, space, args.n)
    report = convergence.report_from_solution(lp, _solve(lp, args.method), args.rounding)
    _emit(report.to_json(), args.out)


def cmd_table(args):
    rows = []
    for n in args.n_list:
        try:
            rows.append(convergence.table_row(n, args.rounding))
        except RuntimeError as exc:
            raise SolverError(str(exc)) from exc
    _emit(convergence.table_csv(rows), args.out)


def cmd_verify(args):
    if args.n is not None and args.suite == "lemmas":
        checks = verification.lemma_suite(n_list=(args.n,), seed=args.seed)
    else:
        checks = verification.run_suite(args.suite, args.trials, args.seed)
    _emit(_dump([c.to_dict() for c in checks]), None)
    return 0 if all(c.passed for c in checks) else 1


def _load_f(source: str) -> tuple[GridFunction, object]:
    if source == "f4":
        return sample_analytic_f4(1000), analytic_f4_value
    f = GridFunction.from_json(Path(source).read_text())
    return f, f


def cmd_simulate(args):
    strat = adversary.AdversaryStrategy(args.ell, args.psi, args.psitilde)
    f, exact = _load_f(args.f)
    res = simulator.estimate_kappa(strat, f, args.p, args.trials, args.seed, args.mode, args.M)
    formula = adversary.kappa_integral(args.ell, args.psi, args.psitilde, exact)
    out = res.to_dict() | {
        "mode": args.mode,
        "formula": formula,
        "z": abs(res.mean - formula) / res.stderr if res.stderr > 0 else None,
    }
    _emit(_dump(out), args.out)


def cmd_analytic(args):
    f = sample_analytic_f4(args.n)
    value, binding = adversary.l_of_f(f)
    out = {
        "n": args.n,
        "value": value,
        "binding": binding if isinstance(binding, str) else {"i": binding[0], "j": binding[1]},
        "closed_form": (1.0 + math.exp(-2.0)) / 2.0,
        "w1": adversary.w1_discrete(f),
        "grid": [{"t": t, "z": t / f.n, "f": v} for t, v in enumerate(f.values)],
    }
    _emit(_dump(out), args.out)


def cmd_export(args):
    lp = _lp_from_args(args)
    args.out.write_text(lp_model.export_lp(lp))


COMMANDS = {
    "solve": cmd_solve,
    "bounds": cmd_bounds,
    "table": cmd_table,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "analytic": cmd_analytic,
    "export-lp": cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; that code is reserved for solver failures
        return 0 if exc.code == 0 else 1
    try:
        status = COMMANDS[args.command](args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"sbbounds {args.command}: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SolverError as exc:
        print(f"sbbounds {args.command}: {exc}", file=sys.stderr)
        return 2
    return status or 0


if __name__ == "__main__":
    sys.exit(main())
