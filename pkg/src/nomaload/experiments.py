"""OMA-vs-NOMA comparison sweeps and CSV reports."""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .network_model import Scenario, load_scenario
from .noma_core import PowerPolicy, enumerate_clusters, oma_clusters
from .scenario_gen import GenConfig, calibrate, generate
from .sif_engine import STATUS_OPTIMAL, IterationConfig, LoadCoupling, SolveOutcome, iterate

METRICS = ("sum_load", "max_load", "rate_efficiency")

SWEEP_LOAD_LIMITS = (0.4, 0.6, 0.8, 1.0)
FULL_NUM_UES = (70, 140, 210, 280, 350)
DESK_NUM_UES = (20, 40)


def metric(name: str, rho) -> float:
    """``sum_load`` is the 1-norm of the load vector, ``max_load`` its max-norm."""
    rho = np.asarray(rho, dtype=float)
    if name == "sum_load":
        return float(np.sum(np.abs(rho)))
    if name == "max_load":
        return float(np.max(np.abs(rho))) if rho.size else 0.0
    raise ValueError(f"unknown metric {name!r}; expected 'sum_load' or 'max_load'")


def rate_efficiency(scenario: Scenario, rho) -> float:
    """Served bits per second per consumed RB."""
    used = scenario.rb_count * float(np.sum(rho))
    return float(np.sum(scenario.demands)) / used if used > 0 else math.inf


def policy_label(policy: PowerPolicy | None) -> str:
    return "oma" if policy is None else policy.family


def parse_policy(name: str, grid: Sequence[float] | None = None) -> PowerPolicy | None:
    """``oma`` maps to None (singleton clusters only); otherwise a PowerPolicy."""
    name = name.lower()
    if name == "oma":
        return None
    if name == "uniform":
        return PowerPolicy.uniform()
    if name == "ftpc":
        return PowerPolicy.ftpc(grid) if grid else PowerPolicy.ftpc()
    if name == "ntt":
        return PowerPolicy.ntt(grid) if grid else PowerPolicy.ntt()
    raise ValueError(f"unknown policy {name!r}")


def solve(scenario: Scenario, policy: PowerPolicy | None, config: IterationConfig | None = None) -> SolveOutcome:
    """Solve one scenario; ``policy=None`` is the OMA baseline."""
    if policy is None:
        clusters = oma_clusters(scenario)
        policy = PowerPolicy.uniform()
    else:
        clusters = enumerate_clusters(scenario)
    return iterate(scenario, clusters, policy, config, model=LoadCoupling(scenario, clusters, policy))


@dataclass
class ExperimentSpec:
    seeds: Sequence[int] = (0,)
    policies: Sequence[PowerPolicy] = field(
        default_factory=lambda: [PowerPolicy.uniform(), PowerPolicy.ftpc(), PowerPolicy.ntt()]
    )
    include_oma: bool = True
    load_limits: Sequence[float] = (1.0,)
    num_ues: Sequence[int] = DESK_NUM_UES
    metrics: Sequence[str] = METRICS
    gen: GenConfig = field(default_factory=GenConfig)
    iteration: IterationConfig = field(default_factory=IterationConfig)
    scenario_path: str | None = None
    calibrate: bool = True
    jobs: int = 1

    def problems(self) -> list[str]:
        out = []
        if not self.seeds and self.scenario_path is None:
            out.append("need at least one seed")
        if not self.policies and not self.include_oma:
            out.append("need at least one policy")
        for m in self.metrics:
            if m not in METRICS:
                out.append(f"unknown metric {m!r}")
        for r in self.load_limits:
            if not 0 < r <= 1:
                out.append(f"load limit {r} outside (0, 1]")
        return out


@dataclass
class ResultRow:
    seed: int
    policy: str
    load_limit: float
    num_ues: int
    status: str
    sum_load: float
    max_load: float
    rate_efficiency: float
    iterations: int
    wall_time: float
    demand_scale: float = 1.0
    sum_load_reduction: float = math.nan  # percent vs the OMA row
    max_load_reduction: float = math.nan
    rate_efficiency_gain: float = math.nan
    selected_pairs: int = 0


def _point(args) -> list[ResultRow]:
    spec, seed, load_limit, num_ues = args
    if spec.scenario_path is not None:
        base = load_scenario(spec.scenario_path)
    else:
        base = generate(dataclasses.replace(spec.gen, seed=seed, num_ues=num_ues, load_limit=load_limit))
    if spec.calibrate:
        cal = calibrate(base, load_limit, config=spec.iteration)
        scenario, scale = cal.scenario, cal.scale
    else:
        scenario, scale = base.with_load_limit(load_limit), 1.0

    policies: list[PowerPolicy | None] = ([None] if spec.include_oma else []) + list(spec.policies)
    rows = []
    for pol in policies:
        t0 = time.perf_counter()
        out = solve(scenario, pol, spec.iteration)
        elapsed = time.perf_counter() - t0
        rho = out.rho_star
        rows.append(
            ResultRow(
                seed=seed,
                policy=policy_label(pol),
                load_limit=load_limit,
                num_ues=scenario.n_ues,
                status=out.status,
                sum_load=metric("sum_load", rho),
                max_load=metric("max_load", rho),
                rate_efficiency=rate_efficiency(scenario, rho),
                iterations=out.iterations,
                wall_time=elapsed,
                demand_scale=scale,
                selected_pairs=len(out.selected_pairs()),
            )
        )
    oma = next((r for r in rows if r.policy == "oma"), None)
    if oma is not None and oma.status == STATUS_OPTIMAL:
        for r in rows:
            if r.status != STATUS_OPTIMAL:
                continue
            r.sum_load_reduction = 100.0 * (1.0 - r.sum_load / oma.sum_load)
            r.max_load_reduction = 100.0 * (1.0 - r.max_load / oma.max_load)
            r.rate_efficiency_gain = 100.0 * (r.rate_efficiency / oma.rate_efficiency - 1.0)
    return rows


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Generate, calibrate and solve every (seed, load limit, UE count) point.

    One fixed point per policy serves all metrics, since the fixed point
    minimises every monotone objective at once. Rows come back ordered by
    seed, load limit, UE count, then policy (OMA first), regardless of
    ``jobs``.
    """
    problems = spec.problems()
    if problems:
        raise ValueError("; ".join(problems))
    seeds = list(spec.seeds) if spec.scenario_path is None else [0]
    ues = list(spec.num_ues) if spec.scenario_path is None else [0]
    points = [(spec, s, r, u) for s in seeds for r in spec.load_limits for u in ues]
    if spec.jobs > 1:
        with ProcessPoolExecutor(spec.jobs) as pool:
            chunks = list(pool.map(_point, points))
    else:
        chunks = [_point(p) for p in points]
    return [row for chunk in chunks for row in chunk]


# -- CSV ---------------------------------------------------------------------------

FIELDS = [f.name for f in dataclasses.fields(ResultRow)]
INT_FIELDS = {"seed", "num_ues", "iterations", "selected_pairs"}
STR_FIELDS = {"policy", "status"}


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def emit_csv(rows: Sequence[ResultRow], path: str | Path, *, timing: bool = False) -> None:
    """Write rows with 9 significant digits.

    ``wall_time`` is left out unless ``timing`` is set, so identical sweeps
    give byte-identical files.
    """
    if not rows:
        raise ValueError("no rows to write")
    fields = [f for f in FIELDS if timing or f != "wall_time"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in fields])


def read_csv(path: str | Path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        rows = []
        for rec in csv.DictReader(fh):
            kw = {}
            for f in FIELDS:
                if f not in rec:
                    if f == "wall_time":
                        kw[f] = math.nan
                        continue
                    raise ValueError(f"{path}: missing column {f!r}")
                raw = rec[f]
                kw[f] = raw if f in STR_FIELDS else int(raw) if f in INT_FIELDS else float(raw)
            rows.append(ResultRow(**kw))
    return rows


# -- comparison ---------------------------------------------------------------------


@dataclass
class ComparisonRow:
    policy: str
    load_limit: float
    num_ues: int
    samples: int
    sum_load_reduction: float
    max_load_reduction: float
    rate_efficiency_gain: float


def compare(
    baseline: Iterable[ResultRow],
    candidate: Iterable[ResultRow],
    baseline_policy: str = "oma",
) -> list[ComparisonRow]:
    """Mean improvement (percent) of each candidate policy over the baseline policy.

    Rows are matched on (seed, load limit, UE count); only pairs where both
    rows are optimal count.
    """
    base = {
        (r.seed, r.load_limit, r.num_ues): r
        for r in baseline
        if r.policy == baseline_policy and r.status == STATUS_OPTIMAL
    }
    acc: dict[tuple, list[tuple[float, float, float]]] = defaultdict(list)
    for r in candidate:
        b = base.get((r.seed, r.load_limit, r.num_ues))
        if b is None or r.policy == baseline_policy or r.status != STATUS_OPTIMAL:
            continue
        acc[(r.policy, r.load_limit, r.num_ues)].append(
            (
                100.0 * (1.0 - r.sum_load / b.sum_load),
                100.0 * (1.0 - r.max_load / b.max_load),
                100.0 * (r.rate_efficiency / b.rate_efficiency - 1.0),
            )
        )
    out = []
    for (pol, rl, ue), vals in sorted(acc.items()):
        v = np.array(vals)
        out.append(ComparisonRow(pol, rl, ue, len(vals), *map(float, v.mean(axis=0))))
    return out


def format_comparison(rows: Sequence[ComparisonRow]) -> str:
    head = f"{'policy':<8} {'rho_bar':>7} {'UEs':>5} {'n':>4} {'sum_red%':>9} {'max_red%':>9} {'rate_gain%':>10}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r.policy:<8} {r.load_limit:>7.2f} {r.num_ues:>5d} {r.samples:>4d} "
            f"{r.sum_load_reduction:>9.2f} {r.max_load_reduction:>9.2f} {r.rate_efficiency_gain:>10.2f}"
        )
    return "\n".join(lines)
