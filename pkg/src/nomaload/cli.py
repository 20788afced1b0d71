"""Command-line entry point: ``nomaload {gen,solve,sweep,compare}``.

Exit codes: 0 optimal / success, 1 usage or I/O error, 2 infeasible,
3 not converged.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .experiments import (
    ExperimentSpec,
    compare,
    emit_csv,
    format_comparison,
    parse_policy,
    read_csv,
    run_experiment,
    solve,
)
from .lp_solver import build_cell_lp
from .network_model import ScenarioFormatError, ScenarioValidationError, load_scenario, save_scenario
from .noma_core import enumerate_clusters, oma_clusters, split_power
from .scenario_gen import CalibrationError, GenConfig, GenerationError, calibrate, generate
from .sif_engine import (
    STATUS_DIVERGED,
    STATUS_INFEASIBLE_CAP,
    STATUS_MAX_ITERS,
    STATUS_OPTIMAL,
    IterationConfig,
    decoding_audit,
    write_trace,
)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED = 0, 1, 2, 3

STATUS_EXIT = {
    STATUS_OPTIMAL: EXIT_OK,
    STATUS_INFEASIBLE_CAP: EXIT_INFEASIBLE,
    STATUS_DIVERGED: EXIT_INFEASIBLE,
    STATUS_MAX_ITERS: EXIT_NOT_CONVERGED,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    """``3``, ``1,2,5`` or a half-open range ``0:20``."""
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return list(range(int(lo), int(hi)))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or a range a:b, got {text!r}") from None


def _iteration_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=1e-6, help="convergence tolerance (max-norm)")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--divergence-cap", type=float, default=1e3)
    p.add_argument("--async", dest="async_mode", choices=["off", "roundrobin", "random"], default="off")


def _iteration_config(args, seed: int = 0) -> IterationConfig:
    mode = "sync" if args.async_mode == "off" else "async"
    schedule = "roundrobin" if args.async_mode in ("off", "roundrobin") else "random"
    return IterationConfig(
        mode=mode,
        schedule=schedule,
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        divergence_cap=args.divergence_cap,
        seed=seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nomaload", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a scenario file")
    g.add_argument("--config", type=Path, help="GenConfig as JSON (flags override)")
    g.add_argument("--seed", type=int)
    g.add_argument("--ues", type=int, help="number of UEs")
    g.add_argument("--small-cells", type=int)
    g.add_argument("--load-limit", type=float)
    g.add_argument("--calibrate", action="store_true", help="scale demands so the OMA max load meets the load limit")
    g.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("solve", help="solve one scenario")
    s.add_argument("scenario", type=Path)
    s.add_argument("--policy", choices=["oma", "uniform", "ftpc", "ntt"], default="ftpc")
    s.add_argument("--alpha-grid", type=_floats)
    s.add_argument("--load-limit", type=float, help="override the scenario's load limit")
    s.add_argument("--seed", type=int, default=0, help="seed for the random async schedule")
    _iteration_args(s)
    s.add_argument("--out", type=Path, help="outcome JSON (default: stdout)")
    s.add_argument("--trace", type=Path, help="residual trace CSV (default: next to --out)")
    s.add_argument("--dump-lp", type=int, metavar="CELL", help="print the LP tableau of CELL at the solution")

    w = sub.add_parser("sweep", help="OMA vs NOMA sweep to CSV")
    w.add_argument("--seed", type=_ints, default=[0], help="seeds: 3, 1,2,5 or 0:20")
    w.add_argument("--policy", action="append", choices=["oma", "uniform", "ftpc", "ntt"],
                   help="repeatable; default oma, uniform, ftpc, ntt")
    w.add_argument("--alpha-grid", type=_floats, help="grid for the ftpc/ntt policies")
    w.add_argument("--load-limit", type=_floats, default=[1.0])
    w.add_argument("--ues", type=_ints, default=[20, 40])
    w.add_argument("--small-cells", type=int, default=6)
    w.add_argument("--scenario", type=Path, help="use a fixed scenario file instead of generated ones")
    w.add_argument("--no-calibrate", action="store_true")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--timing", action="store_true", help="include wall_time column")
    _iteration_args(w)
    w.add_argument("--out", type=Path, required=True)

    c = sub.add_parser("compare", help="improvement table from two result CSVs")
    c.add_argument("baseline", type=Path)
    c.add_argument("candidate", type=Path)
    c.add_argument("--baseline-policy", default="oma")
    c.add_argument("--out", type=Path, help="also write the table as CSV")
    return parser


def cmd_gen(args) -> int:
    cfg = GenConfig()
    if args.config:
        cfg = GenConfig(**json.loads(args.config.read_text()))
    over = {
        "seed": args.seed,
        "num_ues": args.ues,
        "num_small_cells": args.small_cells,
        "load_limit": args.load_limit,
    }
    cfg = dataclasses.replace(cfg, **{k: v for k, v in over.items() if v is not None})
    scenario = generate(cfg)
    if args.calibrate:
        cal = calibrate(scenario, cfg.load_limit)
        scenario = dataclasses.replace(
            cal.scenario, metadata={**cal.scenario.metadata, "demand_scale": cal.scale}
        )
    save_scenario(scenario, args.out)
    print(f"wrote {args.out}: {scenario.n_cells} cells, {scenario.n_ues} UEs")
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.load_limit is not None:
        scenario = scenario.with_load_limit(args.load_limit)
    policy = parse_policy(args.policy, args.alpha_grid)
    out = solve(scenario, policy, _iteration_config(args, args.seed))
    doc = out.to_dict()
    doc["policy"] = args.policy
    doc["decoding_violations"] = [list(u.members) for u in decoding_audit(out, scenario)]
    text = json.dumps(doc, indent=1)
    if args.out:
        args.out.write_text(text + "\n")
        trace = args.trace or args.out.with_suffix(".trace.csv")
        write_trace(out, trace)
        print(f"{out.status}: sum={doc['sum_load']:.6g} max={doc['max_load']:.6g} "
              f"iterations={out.iterations} -> {args.out}, {trace}")
    else:
        print(text)
        if args.trace:
            write_trace(out, args.trace)
    if args.dump_lp is not None:
        cs = oma_clusters(scenario) if policy is None else enumerate_clusters(scenario)
        cell = args.dump_lp
        if not 0 <= cell < scenario.n_cells:
            raise UsageError(f"--dump-lp: no cell {cell}")
        p = out.power_star[cell]
        splits = [p.splits.get(u) or _full_power(scenario, u) for u in cs[cell]]
        print(build_cell_lp(cell, cs, splits, out.rho_star, scenario).to_text(), file=sys.stderr)
    return STATUS_EXIT[out.status]


def _full_power(scenario, u):
    return split_power(u, "uniform", None, scenario.cells[u.cell].per_rb_power, scenario.gains)


def cmd_sweep(args) -> int:
    names = args.policy or ["oma", "uniform", "ftpc", "ntt"]
    policies = [parse_policy(n, args.alpha_grid) for n in names]
    spec = ExperimentSpec(
        seeds=args.seed,
        policies=[p for p in policies if p is not None],
        include_oma="oma" in names,
        load_limits=args.load_limit,
        num_ues=args.ues,
        gen=GenConfig(num_small_cells=args.small_cells),
        iteration=_iteration_config(args),
        scenario_path=str(args.scenario) if args.scenario else None,
        calibrate=not args.no_calibrate,
        jobs=args.jobs,
    )
    rows = run_experiment(spec)
    emit_csv(rows, args.out, timing=args.timing)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    table = compare(read_csv(args.baseline), read_csv(args.candidate), args.baseline_policy)
    print(format_comparison(table))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            fields = [f.name for f in dataclasses.fields(table[0])] if table else []
            w.writerow(fields)
            for r in table:
                w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in dataclasses.astuple(r)])
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "sweep": cmd_sweep, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ScenarioFormatError, ScenarioValidationError, UsageError, ValueError, TypeError) as exc:
        print(f"nomaload {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GenerationError, CalibrationError) as exc:
        print(f"nomaload {args.command}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
