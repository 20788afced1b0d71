"""Load-coupling fixed point for multi-cell NOMA.

Cell ``i``'s minimum load given the other cells' loads is the optimum of a
per-cell LP (``f_i``); minimising that over the cell's candidate power
splits gives ``f'_i``. The vector map ``f'`` is a standard interference
function, so iterating it from any start converges to its unique fixed
point whenever one exists, and that fixed point is the elementwise-minimal
feasible load vector.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .lp_solver import OPTIMAL, CellStructure, LpNumericalError, LpSolution, _solve_cover, capacity_matrix
from .network_model import Scenario
from .noma_core import (
    Cluster,
    ClusterSet,
    PowerPolicy,
    PowerSplit,
    check_decoding_condition,
    split_fractions,
)

SELECTED_TOL = 1e-9

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE_CAP = "infeasible_cap"
STATUS_DIVERGED = "infeasible_diverged"
STATUS_MAX_ITERS = "max_iters_hit"


@dataclass
class IterationConfig:
    """Fixed-point iteration settings.

    ``mode`` is ``"sync"`` (every cell updates each step) or ``"async"``
    (only a scheduled subset updates; ``schedule`` is ``"roundrobin"`` for one
    cell per step in index order or ``"random"`` for seeded random non-empty
    subsets). In async mode one iteration is one subset update.
    """

    mode: str = "sync"
    schedule: str = "roundrobin"
    start: Sequence[float] | None = None
    epsilon: float = 1e-6
    max_iters: int = 500
    divergence_cap: float = 1e3
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("sync", "async"):
            raise ValueError(f"mode must be 'sync' or 'async', got {self.mode!r}")
        if self.schedule not in ("roundrobin", "random"):
            raise ValueError(f"schedule must be 'roundrobin' or 'random', got {self.schedule!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.divergence_cap > 0:
            raise ValueError("divergence_cap must be > 0")


@dataclass
class CellEvaluation:
    """Result of ``f'_i`` at one load vector: the winning power candidate and its LP."""

    cell: int
    load: float
    alpha_index: int
    alpha: float | None
    solution: LpSolution
    candidate_loads: tuple[float, ...] = ()


@dataclass
class CellPower:
    cell: int
    alpha: float | None
    splits: dict[Cluster, PowerSplit]


@dataclass
class SolveOutcome:
    status: str
    rho_star: np.ndarray
    x_star: list[np.ndarray]
    clusters_star: list[Cluster]
    power_star: list[CellPower]
    iterations: int
    residual_history: list[float]
    trajectory: list[np.ndarray] = field(default_factory=list, repr=False)
    evaluations: list[CellEvaluation] = field(default_factory=list, repr=False)
    load_limit: float = 1.0
    family: str = "uniform"
    columns: list[tuple[Cluster, ...]] = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.status in (STATUS_OPTIMAL, STATUS_INFEASIBLE_CAP)

    def selected_pairs(self) -> list[Cluster]:
        return [u for u in self.clusters_star if u.is_pair]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "family": self.family,
            "load_limit": self.load_limit,
            "iterations": self.iterations,
            "rho_star": [float(v) for v in self.rho_star],
            "sum_load": float(np.sum(self.rho_star)),
            "max_load": float(np.max(self.rho_star)) if len(self.rho_star) else 0.0,
            "power_star": [
                {
                    "cell": p.cell,
                    "alpha": p.alpha,
                    "splits": [
                        {"members": list(u.members), "powers_w": list(s.powers)} for u, s in p.splits.items()
                    ],
                }
                for p in self.power_star
            ],
            "clusters_star": [
                {
                    "cell": u.cell,
                    "members": list(u.members),
                    "share": self.share(u),
                }
                for u in self.clusters_star
            ],
            "residual_history": [float(r) for r in self.residual_history],
        }

    def share(self, u: Cluster) -> float:
        """Resource share ``x*_u`` of a candidate cluster."""
        return float(self.x_star[u.cell][self.columns[u.cell].index(u)])


class LoadCoupling:
    """Evaluates ``f_i``, ``f'_i`` and ``f'`` for one scenario, cluster set and power policy."""

    def __init__(self, scenario: Scenario, cluster_set: ClusterSet, policy: PowerPolicy | None = None):
        if len(cluster_set) != scenario.n_cells:
            raise ValueError("cluster set does not match the scenario's cells")
        self.scenario = scenario
        self.cluster_set = cluster_set
        self.policy = policy or PowerPolicy.uniform()
        self.n = scenario.n_cells
        self.powers = scenario.powers
        self.demands = scenario.demands
        self.structures = [CellStructure.build(scenario, cluster_set, i) for i in range(self.n)]
        self.alphas = self.policy.candidates()
        # watts for the SIC (stronger) member of every pair column, per candidate
        self.strong_power: list[list[np.ndarray]] = []
        g = scenario.gains
        for i, st in enumerate(self.structures):
            gs = g[i, st.ues[st.pair_strong]]
            gw = g[i, st.ues[st.pair_weak]]
            self.strong_power.append(
                [self.powers[i] * split_fractions(self.policy.family, a, gs, gw) for a in self.alphas]
            )

    def _inter(self, i: int, loads: np.ndarray) -> np.ndarray:
        w = self.powers * loads
        w[i] = 0.0
        return w @ self.scenario.gains[:, self.structures[i].ues]

    def solve_cell(self, i: int, loads, k: int = 0, inter: np.ndarray | None = None) -> LpSolution:
        """LP of cell ``i`` under power candidate ``k``. Raises on numerical failure."""
        loads = np.asarray(loads, dtype=float)
        st = self.structures[i]
        if inter is None:
            inter = self._inter(i, loads)
        C = capacity_matrix(self.scenario, st, loads, self.strong_power[i][k], inter=inter)
        sol = _solve_cover(C, self.demands[st.ues])
        if sol.status != OPTIMAL:
            raise LpNumericalError(f"cell {i} LP returned {sol.status}")
        return sol

    def f_i(self, i: int, loads, k: int = 0) -> float:
        return self.solve_cell(i, loads, k).objective

    def f_prime_i(self, i: int, loads) -> CellEvaluation:
        """Minimum load of cell ``i`` over its power candidates (first index wins ties)."""
        loads = np.asarray(loads, dtype=float)
        inter = self._inter(i, loads)
        best: CellEvaluation | None = None
        values = []
        # without pair columns every candidate yields the same LP; index 0 wins the tie
        alphas = self.alphas if self.structures[i].n_pairs else self.alphas[:1]
        for k, a in enumerate(alphas):
            sol = self.solve_cell(i, loads, k, inter=inter)
            values.append(sol.objective)
            if best is None or sol.objective < best.load:
                best = CellEvaluation(i, sol.objective, k, a, sol)
        assert best is not None
        best.candidate_loads = tuple(values)
        return best

    def f_prime(self, loads) -> tuple[np.ndarray, list[CellEvaluation]]:
        loads = np.asarray(loads, dtype=float)
        evals = [self.f_prime_i(i, loads) for i in range(self.n)]
        return np.array([e.load for e in evals]), evals

    def __call__(self, loads) -> np.ndarray:
        return self.f_prime(loads)[0]

    def f_fixed(self, loads, k: int = 0) -> np.ndarray:
        """``f`` with every cell held at power candidate ``k``."""
        loads = np.asarray(loads, dtype=float)
        return np.array([self.f_i(i, loads, k) for i in range(self.n)])

    def splits_for(self, i: int, k: int) -> dict[Cluster, PowerSplit]:
        st = self.structures[i]
        p = self.powers[i]
        out = {}
        for c, ps in zip(st.pair_cols, self.strong_power[i][k]):
            out[st.columns[c]] = PowerSplit((float(ps), float(p - ps)))
        return out


# -- functional API ----------------------------------------------------------------


def eval_f_i(cell: int, loads, cluster_set: ClusterSet, family: str, alpha: float | None, scenario: Scenario) -> float:
    """Minimum load of ``cell`` with every pair split by ``family``/``alpha``.

    ``loads`` is a full vector; the own-cell entry is ignored.
    """
    fam = family.lower()
    policy = PowerPolicy(fam) if fam == "uniform" else PowerPolicy(fam, (alpha,))
    return LoadCoupling(scenario, cluster_set, policy).f_i(cell, loads)


def eval_f_prime_i(cell: int, loads, cluster_set: ClusterSet, policy: PowerPolicy, scenario: Scenario):
    """``(load, alpha)`` minimising cell ``cell``'s load over the policy grid."""
    ev = LoadCoupling(scenario, cluster_set, policy).f_prime_i(cell, loads)
    return ev.load, ev.alpha


def _outcome(
    model: LoadCoupling,
    status: str,
    rho: np.ndarray,
    evals: list[CellEvaluation],
    iterations: int,
    history: list[float],
    trajectory: list[np.ndarray],
) -> SolveOutcome:
    x_star, chosen, power = [], [], []
    columns = []
    for ev in evals:
        st = model.structures[ev.cell]
        x = ev.solution.x
        x_star.append(x)
        columns.append(st.columns)
        chosen.extend(u for u, v in zip(st.columns, x) if v > SELECTED_TOL)
        power.append(CellPower(ev.cell, ev.alpha, model.splits_for(ev.cell, ev.alpha_index)))
    return SolveOutcome(
        status=status,
        rho_star=rho.copy(),
        x_star=x_star,
        clusters_star=chosen,
        power_star=power,
        iterations=iterations,
        residual_history=history,
        trajectory=trajectory,
        evaluations=evals,
        load_limit=model.scenario.load_limit,
        family=model.policy.family,
        columns=columns,
    )


def iterate(
    scenario: Scenario,
    cluster_set: ClusterSet,
    policy: PowerPolicy | None = None,
    config: IterationConfig | None = None,
    *,
    model: LoadCoupling | None = None,
) -> SolveOutcome:
    """Run fixed-point iterations of ``f'`` and classify the result.

    On convergence ``rho_star`` is the last iterate ``rho`` whose image
    ``f'(rho)`` lies within ``epsilon`` of it; the reported LP solutions are
    those evaluated at ``rho_star``, so the demand constraints hold exactly
    there and each cell's shares sum to ``f'_i(rho_star)``.
    ``iterations`` counts the updates needed to reach ``rho_star``.
    """
    config = config or IterationConfig()
    model = model or LoadCoupling(scenario, cluster_set, policy)
    n = model.n
    rho = np.zeros(n) if config.start is None else np.array(config.start, dtype=float)
    if rho.shape != (n,) or np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise ValueError("start must be a finite non-negative vector with one entry per cell")
    cap_limit = scenario.load_limit
    history: list[float] = []
    trajectory = [rho.copy()]

    def finish(rho_star, evals, k):
        status = STATUS_OPTIMAL if np.all(rho_star <= cap_limit) else STATUS_INFEASIBLE_CAP
        return _outcome(model, status, rho_star, evals, k, history, trajectory)

    if config.mode == "sync":
        evals: list[CellEvaluation] = []
        for k in range(1, config.max_iters + 1):
            new, evals = model.f_prime(rho)
            res = float(np.max(np.abs(new - rho))) if n else 0.0
            history.append(res)
            if res <= config.epsilon:
                return finish(rho, evals, k - 1)
            rho = new
            trajectory.append(rho.copy())
            if not np.all(np.isfinite(rho)) or np.any(rho > config.divergence_cap):
                return _outcome(model, STATUS_DIVERGED, rho, evals, k, history, trajectory)
        return _outcome(model, STATUS_MAX_ITERS, rho, evals, config.max_iters, history, trajectory)

    rng = np.random.default_rng(config.seed)
    settled: set[int] = set()
    evals = [None] * n  # type: ignore[list-item]
    for k in range(1, config.max_iters + 1):
        if config.schedule == "roundrobin":
            subset = [(k - 1) % n]
        else:
            mask = np.zeros(n, dtype=bool)
            while not mask.any():
                mask = rng.random(n) < 0.5
            subset = [int(i) for i in np.flatnonzero(mask)]
        new = rho.copy()
        for i in subset:
            evals[i] = model.f_prime_i(i, rho)
            new[i] = evals[i].load
        res = float(np.max(np.abs(new - rho)))
        history.append(res)
        rho = new
        trajectory.append(rho.copy())
        if not np.all(np.isfinite(rho)) or np.any(rho > config.divergence_cap):
            filled = [e if e is not None else model.f_prime_i(i, rho) for i, e in enumerate(evals)]
            return _outcome(model, STATUS_DIVERGED, rho, filled, k, history, trajectory)
        if res > config.epsilon:
            settled.clear()
            continue
        settled.update(subset)
        if len(settled) == n:
            check, full = model.f_prime(rho)
            if np.max(np.abs(check - rho)) <= config.epsilon:
                return finish(rho, full, k)
            settled.clear()
    filled = [e if e is not None else model.f_prime_i(i, rho) for i, e in enumerate(evals)]
    return _outcome(model, STATUS_MAX_ITERS, rho, filled, config.max_iters, history, trajectory)


def decoding_audit(outcome: SolveOutcome, scenario: Scenario) -> list[Cluster]:
    """Selected pairs whose SIC decoding condition fails at ``rho_star`` (should be empty)."""
    bad = []
    for p in outcome.power_star:
        for u, split in p.splits.items():
            if u in outcome.clusters_star and not check_decoding_condition(u, split, outcome.rho_star, scenario):
                bad.append(u)
    return bad


@dataclass
class Feasibility:
    feasible: bool
    improved: np.ndarray
    evaluations: list[CellEvaluation] = field(default_factory=list, repr=False)


def check_feasible(
    loads,
    scenario: Scenario,
    cluster_set: ClusterSet,
    policy: PowerPolicy | None = None,
    *,
    tol: float = 0.0,
    model: LoadCoupling | None = None,
) -> Feasibility:
    """Feasibility certificate for a load vector.

    ``loads`` is feasible iff it respects the load limit and
    ``f'(loads) <= loads`` elementwise (up to ``tol``). ``improved`` is
    ``f'(loads)``, which is then feasible and no larger than ``loads``.
    """
    model = model or LoadCoupling(scenario, cluster_set, policy)
    rho = np.asarray(loads, dtype=float)
    img, evals = model.f_prime(rho)
    ok = bool(
        np.all(rho <= scenario.load_limit + tol)
        and np.all(img <= rho + tol)
        and np.all(img <= scenario.load_limit + tol)
    )
    return Feasibility(ok, img, evals)


def improve(
    loads,
    scenario: Scenario,
    cluster_set: ClusterSet,
    policy: PowerPolicy | None = None,
    *,
    tol: float = 0.0,
    model: LoadCoupling | None = None,
) -> np.ndarray:
    """One improvement step ``f'(loads)`` from a feasible load vector."""
    cert = check_feasible(loads, scenario, cluster_set, policy, tol=tol, model=model)
    if not cert.feasible:
        raise ValueError("improve() requires a feasible load vector")
    return cert.improved


def write_trace(outcome: SolveOutcome, path: str | Path) -> None:
    """Per-iteration residual trace: ``iter, residual, load_0 .. load_{n-1}``."""
    traj = outcome.trajectory
    n = len(outcome.rho_star)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "residual"] + [f"load_{i}" for i in range(n)])
        for k, res in enumerate(outcome.residual_history, start=1):
            loads = traj[k] if k < len(traj) else traj[-1]
            w.writerow([k, f"{res:.9g}"] + [f"{v:.9g}" for v in loads])
