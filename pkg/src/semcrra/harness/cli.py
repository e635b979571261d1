"""Command-line entry point: ``semcrra <command> ...``.

Exit codes: 0 success, 1 usage or input error, 2 infeasible scenario,
3 validation failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ..crra import METHODS, SolverConfig, brute_force_joint, crra_solve
from ..errors import InfeasibleBudgetError, SemcrraError
from ..fitting import FitConfig, fit_accuracy_model, read_samples
from ..resource_opt import brute_force_allocation, solve_resource_allocation
from .config import load_scenario
from .scenario import accuracy_model, budgets_for, compression_grid, generate_users
from .sweep import (SweepSpec, emit_csv, emit_plot, run_sweep,
                    validate_success_probability)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VALIDATION = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _methods(text: str) -> tuple:
    out = tuple(m.strip().upper() for m in text.split(",") if m.strip())
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"choose from {', '.join(METHODS)}")
    return out


def _scenario(args):
    cfg = load_scenario(args.scenario)
    if getattr(args, "paper_d0", False):
        cfg = cfg.with_megabyte_d0()
    if getattr(args, "seed", None) is not None and args.command != "validate-lemma1":
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "fixed_o", None) is not None:
        cfg = replace(cfg, fixed_o=args.fixed_o)
    return cfg


def _target(flag, out_dir: Path, default: str) -> Path | None:
    """Resolve an optional-path flag: None when absent, default name when bare."""
    if flag is None:
        return None
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / (flag or default)


def _check_feasible(cfg, spec: SweepSpec) -> None:
    for value in spec.values:
        budgets_for(cfg, spec.param, value).check(cfg.users)


def _print_rows(result, per_user: bool) -> None:
    print(f"{'value':>12} {'method':>6} {'avg_exact':>10} {'avg_surr':>10} {'iters':>6}")
    for r in result.rows:
        if r.status != "ok":
            print(f"{r.value:12.5g} {r.method:>6}  failed: {r.status}")
            continue
        print(f"{r.value:12.5g} {r.method:>6} {r.avg_exact:10.6f} {r.surrogate:10.6f} "
              f"{r.iterations:6d}")
        if per_user:
            for i, (b, p, o) in enumerate(zip(r.bandwidth, r.power, r.o), start=1):
                print(f"{'':19}user {i:2d}: B={b / 1e6:9.5f} MHz  P={p * 1e3:9.4f} mW  o={o:.4f}")


def cmd_fit(args) -> int:
    samples = read_samples(args.samples)
    report = fit_accuracy_model(samples, config=FitConfig(multistart=args.multistart,
                                                          seed=args.seed or 0))
    beta = ", ".join(f"{v:.10g}" for v in report.model.beta)
    print(f"beta = {beta}")
    print(f"rmse = {report.rmse:.6g}  iterations = {report.iterations}  "
          f"stop = {report.stop_reason}")
    if not report.in_range:
        print("fitted curve leaves [0, 1]", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def _run(args, param: str, values) -> tuple:
    cfg = _scenario(args)
    spec = SweepSpec(param, tuple(values(cfg)), args.method or cfg.methods)
    _check_feasible(cfg, spec)
    result = run_sweep(cfg, spec, timing=not args.no_timing)
    return cfg, spec, result


def cmd_solve(args) -> int:
    # a one-point bandwidth "sweep" at the scenario's own budgets
    cfg, spec, result = _run(args, "bandwidth", lambda c: [c.budgets.b_max])
    _print_rows(result, per_user=True)
    out = Path(args.out_dir)
    csv_path = _target(args.csv, out, "solve.csv")
    if csv_path:
        emit_csv(result, csv_path)
        print(f"wrote {csv_path}")
    return _status(result)


def cmd_sweep(args) -> int:
    cfg, spec, result = _run(args, args.param, lambda c: c.sweep_values(args.param))
    _print_rows(result, per_user=False)
    out = Path(args.out_dir)
    csv_path = _target(args.csv, out, f"sweep_{spec.param}.csv")
    plot_path = _target(args.plot, out, f"sweep_{spec.param}.svg")
    if csv_path:
        emit_csv(result, csv_path)
        print(f"wrote {csv_path}")
    if plot_path:
        emit_plot(result, plot_path)
        print(f"wrote {plot_path}")
    return _status(result)


def _status(result) -> int:
    failed = [r for r in result.rows if r.status != "ok"]
    if any(r.status.startswith("InfeasibleBudgetError") for r in failed):
        return EXIT_INFEASIBLE
    return EXIT_USAGE if failed else EXIT_OK


def cmd_validate(args) -> int:
    cfg = _scenario(args)
    report = validate_success_probability(cfg, samples=args.samples, seed=args.seed or 0)
    print(f"{'row':<24} {'o':>5} {'closed':>10} {'mc':>10} {'gap':>9} {'4sigma':>9}")
    for r in report.rows:
        flag = "" if r.passed else "  FAIL"
        print(f"{r.label:<24} {r.o:5.2f} {r.closed_form:10.6f} {r.monte_carlo:10.6f} "
              f"{r.gap:9.2e} {4 * r.sigma:9.2e}{flag}")
    verdict = "pass" if report.passed else "FAIL"
    print(f"max gap {report.max_gap:.3e} over {len(report.rows)} rows, "
          f"{report.samples} samples each: {verdict}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_oracle(args) -> int:
    cfg = _scenario(args)
    k = args.users
    links = generate_users(cfg)[:k]
    b = cfg.budgets
    budgets = replace(b, b_max=b.b_max * k / cfg.users, p_max=b.p_max * k / cfg.users)
    budgets.check(k)
    model = accuracy_model(cfg)
    grid = compression_grid(cfg)
    sol = crra_solve(links, model, budgets, SolverConfig(grid=grid))
    joint = brute_force_joint(links, model, budgets, grid, args.resolution)
    alphas = [model(o) for o in sol.o]
    sca = solve_resource_allocation(sol.o, alphas, budgets, links)
    grid_alloc = brute_force_allocation(sol.o, alphas, budgets, links, args.resolution)
    rows = [("joint (B, P, o)", sol.surrogate_objective, joint.surrogate_objective),
            ("allocation at CRRA o", sca.objective, grid_alloc.objective)]
    ok = True
    print(f"first {k} users, budgets scaled by {k}/{cfg.users}, resolution {args.resolution}")
    for name, ours, ref in rows:
        rel = (ref - ours) / ref if ref > 0 else 0.0
        good = rel <= args.rtol
        ok &= good
        print(f"{name:<22} solver {ours:.8f}  oracle {ref:.8f}  shortfall {rel:+.2e}"
              f"{'' if good else '  FAIL'}")
    return EXIT_OK if ok else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="semcrra", description="Joint compression ratio and resource allocation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit the accuracy curve to (o, accuracy) samples")
    f.add_argument("samples", help="two-column text file")
    f.add_argument("--multistart", action="store_true", help="add perturbed restarts")
    f.add_argument("--seed", type=int, help="seed for the restarts")

    def scenario_args(sp, seed_help="override the placement seed"):
        sp.add_argument("scenario", help="scenario file (empty file = defaults)")
        sp.add_argument("--seed", type=int, help=seed_help)
        sp.add_argument("--paper-d0", action="store_true",
                        help="use d0 = 24.5 MB instead of the scenario value")

    def run_args(sp):
        sp.add_argument("--method", type=_methods, help=f"comma list from {','.join(METHODS)}")
        sp.add_argument("--fixed-o", type=float, help="compression ratio used by FCR")
        sp.add_argument("--out-dir", default=".", help="directory for written files")
        sp.add_argument("--csv", nargs="?", const="", help="write a CSV (optional file name)")
        sp.add_argument("--no-timing", action="store_true",
                        help="leave wall_ms empty so output is reproducible")

    s = sub.add_parser("solve", help="solve at the scenario budgets")
    scenario_args(s)
    run_args(s)

    w = sub.add_parser("sweep", help="sweep one budget total")
    scenario_args(w)
    run_args(w)
    w.add_argument("--param", required=True, choices=("bandwidth", "power"))
    w.add_argument("--plot", nargs="?", const="", help="write an SVG plot (optional file name)")

    v = sub.add_parser("validate-lemma1",
                       help="compare the closed-form success probability with Monte Carlo")
    scenario_args(v, seed_help="Monte Carlo seed")
    v.add_argument("--samples", type=int, default=1_000_000)

    o = sub.add_parser("oracle", help="compare solvers with brute force on a few users")
    scenario_args(o)
    o.add_argument("--users", type=int, choices=(1, 2, 3), default=2)
    o.add_argument("--resolution", type=int, default=200)
    o.add_argument("--rtol", type=float, default=0.01,
                   help="allowed relative shortfall against the oracle")
    return p


_COMMANDS = {"fit": cmd_fit, "solve": cmd_solve, "sweep": cmd_sweep,
             "validate-lemma1": cmd_validate, "oracle": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InfeasibleBudgetError as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SemcrraError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
