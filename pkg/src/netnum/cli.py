"""Command-line front end: solve, oracle, compare and bench subcommands.

Exit codes: 0 success, 1 input/parse error, 2 numerical failure (non-finite
objective during a solve).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bench as bench_mod
from .bench import (
    KIND_BY_LABEL,
    ExperimentSpec,
    assemble_instance,
    run_experiment,
    timing_sweep,
    utility_comparison,
    write_timing_csv,
    write_trace_csv,
)
from .oracle import analytic_single_link, grid_refine_optimum, vertex_lp_optimum
from .solvers import NonFiniteError, SolverConfig, solve

SOLVER_NAMES = tuple(KIND_BY_LABEL)


def _f17(x) -> str:
    return format(float(x), ".17g")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract is 1
        raise _UsageError(message)


def _add_instance_flags(p: _Parser, topology_required: bool = True):
    # compare/bench may get the topology from a --spec file instead
    p.add_argument("--topology", required=topology_required,
                   help="edge-list topology file")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--xi", type=float, default=0.5)
    p.add_argument("--mu", type=float, default=2.0)
    p.add_argument("--cap-max", default="100",
                   help="rescale capacities so the max equals this; 'none' to skip")
    p.add_argument("--flows", default="all_pairs",
                   help="'all_pairs' or a sampled flow count")
    p.add_argument("--seed", type=int, default=0)


def _build_parser() -> _Parser:
    parser = _Parser(prog="netnum", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver, emit its trace CSV")
    _add_instance_flags(p)
    p.add_argument("--solver", required=True, choices=SOLVER_NAMES)
    p.add_argument("--iters", required=True, type=int)
    p.add_argument("--step", type=float, default=None, help="step size (default: method rule)")
    p.add_argument("--c-bound", default="auto", help="expnum rate bound (default: capacity sum)")
    p.add_argument("--init", default=None,
                   help="'zeros', 'barycenter', or comma-separated rates")
    p.add_argument("--stride", type=int, default=1, help="trace recording stride")
    p.add_argument("--out", default=None, help="trace CSV path (default: stdout)")

    p = sub.add_parser("oracle", help="exact small-instance optimum")
    _add_instance_flags(p)
    p.add_argument("--method", default="auto",
                   choices=("auto", "analytic", "vertex", "grid"))
    p.add_argument("--tol", type=float, default=1e-6, help="grid refinement tolerance")

    for name, extra in (("compare", "convergence comparison"),
                        ("bench", "per-iteration timing sweep")):
        p = sub.add_parser(name, help=f"{extra}; writes a report directory")
        p.add_argument("--spec", default=None, help="key = value file mirroring these flags")
        _add_instance_flags(p, topology_required=False)
        p.add_argument("--solvers", default="pgd,expnum,agm,agm-fr",
                       help="comma-separated solver names")
        p.add_argument("--iters", type=int, default=10000)
        p.add_argument("--stride", type=int, default=1)
        p.add_argument("--reference", default="best_of_runs",
                       choices=("oracle", "best_of_runs"))
        p.add_argument("--out", default="netnum-report", help="report directory")
        if name == "bench":
            p.add_argument("--flow-counts", required=True,
                           help="comma-separated sampled flow counts")
            p.add_argument("--warmup", type=int, default=100)
            p.add_argument("--measure", type=int, default=1000)
    return parser


def _apply_spec_file(args: argparse.Namespace, argv: list[str]) -> None:
    """Fill flags from a `key = value` spec file; explicit flags win."""
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token.split("=", 1)[0][2:].replace("-", "_"))
    with open(args.spec, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{args.spec}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            attr = key.replace("-", "_")
            if not hasattr(args, attr) or attr in ("spec", "command"):
                raise ValueError(f"{args.spec}:{lineno}: unknown key {key!r}")
            if attr in explicit:
                continue
            current = getattr(args, attr)
            if isinstance(current, int) and not isinstance(current, bool):
                value = int(value)
            elif isinstance(current, float):
                value = float(value)
            setattr(args, attr, value)


def _load_instance(args):
    cap = None if str(args.cap_max).lower() == "none" else float(args.cap_max)
    inst, _ = assemble_instance(
        args.topology,
        args.alpha,
        args.xi,
        args.mu,
        cap_max=cap,
        flows=args.flows if args.flows == "all_pairs" else int(args.flows),
        seed=args.seed,
    )
    return inst


def _parse_init(raw, solver_kind):
    if raw is None:
        return None
    if raw in ("zeros", "barycenter", "expnum_barycenter"):
        if raw == "zeros" and solver_kind == "expnum":
            raise ValueError("--init zeros is invalid for expnum "
                             "(multiplicative updates cannot leave zero)")
        return raw
    try:
        return np.array([float(v) for v in raw.split(",")])
    except ValueError:
        raise ValueError(f"--init must be 'zeros', 'barycenter' or a comma list, got {raw!r}") from None


def _cmd_solve(args) -> int:
    kind = KIND_BY_LABEL[args.solver]
    inst = _load_instance(args)
    cfg = SolverConfig(
        kind=kind,
        iterations=args.iters,
        step_size=args.step,
        c_bound=None if str(args.c_bound).lower() == "auto" else float(args.c_bound),
        init=_parse_init(args.init, kind),
        trace_stride=args.stride,
    )
    sol = solve(inst, cfg)
    ref = min(sol.trace.objective) if len(sol.trace) else sol.meta["final_objective"]
    summary = (
        f"solver={args.solver} iters={args.iters}"
        f" objective={_f17(sol.meta['final_objective'])}"
        f" utility={_f17(sol.meta['final_utility'])}"
        f" exact_penalty={_f17(sol.meta['final_exact_penalty'])}"
        f" beta_v={_f17(inst.cert.beta_v)} gamma={_f17(sol.meta['gamma'])}"
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            write_trace_csv(sol.trace, ref, fh)
        print(summary)
    else:
        write_trace_csv(sol.trace, ref, sys.stdout)
        print(summary, file=sys.stderr)
    return 0


def _cmd_oracle(args) -> int:
    inst = _load_instance(args)
    method = args.method
    if method == "auto":
        if inst.utility.alpha == 0 and inst.mu > 1 and bench_mod._all_flows_on_single_link(inst):
            method = "analytic"
        elif inst.num_flows <= 3:
            method = "grid"
        elif inst.utility.alpha == 0:
            method = "vertex"
        else:
            raise ValueError("no oracle applies: need alpha=0 within the vertex "
                             "guard, the single-link closed form, or d <= 3")
    if method == "analytic":
        if not bench_mod._all_flows_on_single_link(inst) or inst.utility.alpha != 0:
            raise ValueError("analytic oracle needs alpha=0 and every flow on one link")
        res = analytic_single_link(float(inst.capacities[0]), inst.mu, inst.num_flows)
    elif method == "vertex":
        res = vertex_lp_optimum(inst)
    else:
        res = grid_refine_optimum(inst, tol=args.tol)
    x_str = ",".join(_f17(v) for v in res.x)
    print(f"method={res.method} value={_f17(res.value)} "
          f"tolerance={_f17(res.tolerance)} x={x_str}")
    return 0


def _make_spec(args) -> ExperimentSpec:
    if not args.topology:
        raise ValueError("--topology is required (on the command line or in --spec)")
    labels = [name.strip() for name in str(args.solvers).split(",") if name.strip()]
    configs = []
    for label in labels:
        if label not in KIND_BY_LABEL:
            raise ValueError(f"--solvers: unknown solver {label!r}; "
                             f"choose from {', '.join(SOLVER_NAMES)}")
        configs.append(SolverConfig(
            kind=KIND_BY_LABEL[label],
            iterations=int(args.iters),
            trace_stride=args.stride,
        ))
    cap = None if str(args.cap_max).lower() == "none" else float(args.cap_max)
    return ExperimentSpec(
        topology=args.topology,
        solvers=tuple(configs),
        alpha=args.alpha,
        xi=args.xi,
        mu=args.mu,
        cap_max=cap,
        flows=args.flows if args.flows == "all_pairs" else int(args.flows),
        seed=args.seed,
        reference=args.reference,
        out_dir=args.out,
    )


def _cmd_compare(args) -> int:
    spec = _make_spec(args)
    report = run_experiment(spec)
    for row in report.final_table:
        print(f"{row['solver']}: objective={_f17(row['objective'])} "
              f"error={_f17(row['error'])} utility={_f17(row['utility'])} "
              f"exact_penalty={_f17(row['exact_penalty'])}")
    if (
        spec.alpha == 0
        and spec.xi == 0
        and report.instance.num_flows <= 8
        and report.instance.num_links <= 8
    ):
        table = utility_comparison(spec)
        path = os.path.join(args.out, "utility.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("solver,utility,signed_error,rel_error,exact_penalty\n")
            for row in table["rows"]:
                fh.write(f"{row['solver']},{_f17(row['utility'])},"
                         f"{_f17(row['signed_error'])},{_f17(row['rel_error'])},"
                         f"{_f17(row['exact_penalty'])}\n")
        print(f"lp_optimum={_f17(table['u_star'])} ({path})")
    print(f"report written to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    spec = _make_spec(args)
    try:
        counts = [int(v) for v in str(args.flow_counts).split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"--flow-counts must be comma-separated integers, "
                         f"got {args.flow_counts!r}") from None
    rows = timing_sweep(spec, counts, warmup=args.warmup, measure=args.measure)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "timing.csv")
    with open(path, "w", encoding="utf-8") as fh:
        write_timing_csv(rows, fh)
    for row in rows:
        print(f"{row['solver']} d={row['flows']}: "
              f"{row['seconds_per_iter'] * 1e6:.1f} us/iter")
    print(f"timing table written to {path}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "oracle": _cmd_oracle,
    "compare": _cmd_compare,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "spec", None):
            _apply_spec_file(args, argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NonFiniteError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
