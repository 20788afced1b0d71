"""Single-cell load minimisation as a linear program.

    minimise   sum_u x_u
    subject to sum_{u ∋ j} c_ju x_u >= d_j   for every UE j of the cell
               x >= 0

``solve_lp`` is a dense two-phase tableau simplex with Bland's rule.
``oracle_solve`` enumerates every basis of the standard form and is meant
for cross-checking small instances only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network_model import Scenario
from .noma_core import Cluster, ClusterSet, PowerSplit, inter_cell_interference

PIVOT_TOL = 1e-12
COST_TOL = 1e-11
FEAS_RTOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"


class LpNumericalError(ArithmeticError):
    pass


@dataclass
class CellLp:
    """Rows are the UEs of ``cell``; columns are its candidate clusters."""

    cell: int
    rows: tuple[int, ...]
    columns: tuple[Cluster, ...]
    coeff: np.ndarray
    rhs: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeff.shape

    def to_text(self) -> str:
        """Human-readable tableau dump for debugging."""
        labels = ["{" + ",".join(str(j) for j in u.members) + "}" for u in self.columns]
        width = max([12] + [len(s) + 1 for s in labels])
        lines = [f"cell {self.cell}: min sum(x) s.t. coeff @ x >= rhs, x >= 0"]
        lines.append("UE".rjust(6) + "".join(s.rjust(width) for s in labels) + "rhs".rjust(width + 2))
        for r, j in enumerate(self.rows):
            vals = "".join(f"{v:{width}.4g}" for v in self.coeff[r])
            lines.append(f"{j:6d}{vals}  >={self.rhs[r]:{width}.6g}")
        return "\n".join(lines)


@dataclass
class LpSolution:
    objective: float
    x: np.ndarray
    status: str = OPTIMAL
    pivots: int = 0
    basis: tuple[int, ...] = field(default=(), repr=False)


# -- LP assembly ---------------------------------------------------------------


@dataclass(frozen=True)
class CellStructure:
    """Index arrays describing the candidate clusters of one cell.

    Built once per (scenario, cluster set); the per-iteration work only
    recomputes capacities from the loads and the power split.
    """

    cell: int
    ues: np.ndarray
    columns: tuple[Cluster, ...]
    single_cols: np.ndarray
    single_rows: np.ndarray
    pair_cols: np.ndarray
    pair_strong: np.ndarray
    pair_weak: np.ndarray

    @classmethod
    def build(cls, scenario: Scenario, clusters: ClusterSet, cell: int) -> "CellStructure":
        ues = np.array(scenario.ues_of(cell), dtype=int)
        local = {int(j): r for r, j in enumerate(ues)}
        cols = tuple(clusters[cell])
        sc, sr, pc, ps, pw = [], [], [], [], []
        for c, u in enumerate(cols):
            if u.cell != cell:
                raise ValueError(f"cluster {u} does not belong to cell {cell}")
            if u.is_pair:
                pc.append(c)
                ps.append(local[u.members[0]])
                pw.append(local[u.members[1]])
            else:
                sc.append(c)
                sr.append(local[u.members[0]])
        arr = lambda v: np.array(v, dtype=int)  # noqa: E731
        return cls(cell, ues, cols, arr(sc), arr(sr), arr(pc), arr(ps), arr(pw))

    @property
    def n_pairs(self) -> int:
        return len(self.pair_cols)


def capacity_matrix(
    scenario: Scenario,
    st: CellStructure,
    loads,
    strong_power: np.ndarray,
    inter: np.ndarray | None = None,
) -> np.ndarray:
    """Capacities ``c_ju`` (bits/s) for every (UE row, cluster column) of a cell.

    ``strong_power`` holds the watts given to the first (SIC) member of each
    pair column, in pair order; the weaker member gets the remainder of the
    cell power.
    """
    i = st.cell
    p_i = scenario.cells[i].per_rb_power
    g = scenario.gains[i, st.ues]
    if inter is None:
        inter = inter_cell_interference(scenario, i, loads, st.ues)
    base = inter + scenario.noise_power
    mb = scenario.rb_count * scenario.rb_bandwidth

    C = np.zeros((len(st.ues), len(st.columns)))
    r = st.single_rows
    C[r, st.single_cols] = mb * np.log2(1.0 + p_i * g[r] / base[r])
    if st.n_pairs:
        s, w = st.pair_strong, st.pair_weak
        p_s = np.asarray(strong_power, dtype=float)
        p_w = p_i - p_s
        C[s, st.pair_cols] = mb * np.log2(1.0 + p_s * g[s] / base[s])
        C[w, st.pair_cols] = mb * np.log2(1.0 + p_w * g[w] / (p_s * g[w] + base[w]))
    return C


def build_cell_lp(
    cell: int,
    cluster_set: ClusterSet,
    splits: Sequence[PowerSplit],
    loads,
    scenario: Scenario,
) -> CellLp:
    """Assemble the load-minimisation LP of ``cell`` at the given loads.

    ``splits`` is aligned with ``cluster_set[cell]``. The own-cell entry of
    ``loads`` is ignored. The load cap is not a constraint here.
    """
    st = CellStructure.build(scenario, cluster_set, cell)
    if len(splits) != len(st.columns):
        raise ValueError("need one power split per candidate cluster")
    p_i = scenario.cells[cell].per_rb_power
    for u, sp in zip(st.columns, splits):
        if len(sp.powers) != len(u.members):
            raise ValueError(f"power split {sp.powers} does not match cluster {u.members}")
        if abs(sp.total - p_i) > 1e-12 * p_i:
            raise ValueError(f"power split of {u.members} sums to {sp.total}, expected {p_i}")
    strong = np.array([splits[c].powers[0] for c in st.pair_cols], dtype=float)
    C = capacity_matrix(scenario, st, loads, strong)
    return CellLp(cell, tuple(int(j) for j in st.ues), st.columns, C, scenario.demands[st.ues])


# -- simplex --------------------------------------------------------------------


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, T[row])
    rhs = T[:, -1]
    rhs[(rhs < 0.0) & (rhs > -PIVOT_TOL)] = 0.0


def _run_phase(T: np.ndarray, basis: list[int], cost: np.ndarray, allowed: int, max_pivots: int) -> int:
    """Bland's-rule simplex on tableau ``T`` (last column is the rhs) for ``min cost @ v``.

    Only the first ``allowed`` columns may enter. Returns the number of pivots.
    """
    pivots = 0
    while True:
        rc = cost[:allowed] - cost[basis] @ T[:, :allowed]
        entering = np.flatnonzero(rc < -COST_TOL)
        if entering.size == 0:
            return pivots
        col = int(entering[0])
        a = T[:, col]
        cand = np.flatnonzero(a > PIVOT_TOL)
        if cand.size == 0:
            # objective is bounded below by 0, so an unbounded ray means bad numerics
            raise LpNumericalError(f"no admissible pivot in column {col}")
        ratios = T[cand, -1] / a[cand]
        best = ratios.min()
        ties = cand[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        if pivots > max_pivots:
            raise LpNumericalError("pivot limit exceeded")


def _crash_basis(A: np.ndarray, eligible: np.ndarray) -> list[int | None]:
    """For each eligible row, a column whose only non-zero is a positive entry in that row.

    Largest entry wins, lowest column index on ties.
    """
    nz = A != 0.0
    single = np.flatnonzero(nz.sum(axis=0) == 1)
    pick: list[int | None] = [None] * A.shape[0]
    best = np.zeros(A.shape[0])
    for c in single:
        r = int(np.flatnonzero(nz[:, c])[0])
        if eligible[r] and A[r, c] > best[r]:
            best[r] = A[r, c]
            pick[r] = int(c)
    return pick


def solve_lp(lp: CellLp) -> LpSolution:
    """Optimal basic solution of ``min sum(x) s.t. coeff @ x >= rhs, x >= 0``.

    Deterministic: identical input gives identical output including ``x``.
    """
    try:
        return _solve_cover(np.asarray(lp.coeff, dtype=float), np.asarray(lp.rhs, dtype=float))
    except LpNumericalError:
        n = lp.coeff.shape[1]
        return LpSolution(float("nan"), np.full(n, np.nan), NUMERICAL_FAILURE)


def _solve_cover(A: np.ndarray, b: np.ndarray) -> LpSolution:
    m, n = A.shape
    if m == 0:
        return LpSolution(0.0, np.zeros(n))
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise LpNumericalError("non-finite LP data")

    # Row r (b_r > 0), scaled by 1/b_r:  A_r x / b_r - s_r (+ a_r) = 1
    # Row r (b_r <= 0), sign flipped:    -A_r x + s_r = -b_r, with s_r basic
    pos = b > 0
    scale = np.where(pos, 1.0 / np.where(pos, b, 1.0), -1.0)
    As = A * scale[:, None]
    rhs = np.where(pos, 1.0, -b)
    crash = _crash_basis(As, pos)
    need_art = [r for r in range(m) if pos[r] and crash[r] is None]
    n_art = len(need_art)
    N = n + m + n_art

    T = np.zeros((m, N + 1))
    T[:, :n] = As
    T[np.arange(m), n + np.arange(m)] = np.where(pos, -1.0, 1.0)
    T[:, -1] = rhs
    basis: list[int] = [0] * m
    for k, r in enumerate(need_art):
        T[r, n + m + k] = 1.0
        basis[r] = n + m + k
    for r in range(m):
        if not pos[r]:
            basis[r] = n + r
        elif crash[r] is not None:
            c = crash[r]
            T[r] /= T[r, c]
            basis[r] = c

    max_pivots = 50 * (N + m) + 100
    pivots = 0
    if n_art:
        cost1 = np.zeros(N)
        cost1[n + m:] = 1.0
        pivots += _run_phase(T, basis, cost1, N, max_pivots)
        if cost1[basis] @ T[:, -1] > 1e-9:
            return LpSolution(float("nan"), np.full(n, np.nan), INFEASIBLE, pivots)
        keep = []
        for r in range(m):
            if basis[r] >= n + m:
                nonart = np.flatnonzero(np.abs(T[r, : n + m]) > PIVOT_TOL)
                if nonart.size == 0:
                    continue  # redundant row
                _pivot(T, r, int(nonart[0]))
                basis[r] = int(nonart[0])
            keep.append(r)
        T = np.hstack([T[keep, : n + m], T[keep, -1:]])
        basis = [basis[r] for r in keep]

    cost2 = np.zeros(n + m)
    cost2[:n] = 1.0
    pivots += _run_phase(T, basis, cost2, n + m, max_pivots)

    x = np.zeros(n)
    for r, v in enumerate(basis):
        if v < n:
            x[v] = max(T[r, -1], 0.0)
    lhs = A @ x
    if np.any(lhs < b - FEAS_RTOL * np.maximum(np.abs(b), 1e-300)):
        raise LpNumericalError("solution violates constraints beyond tolerance")
    return LpSolution(float(x.sum()), x, OPTIMAL, pivots, tuple(basis))


# -- oracle ---------------------------------------------------------------------

ORACLE_MAX = 8


def oracle_solve(lp: CellLp) -> LpSolution:
    """Exact optimum by enumerating every basis of ``[coeff, -I] v = rhs``.

    Restricted to at most 8 rows and 8 columns.
    """
    A = np.asarray(lp.coeff, dtype=float)
    b = np.asarray(lp.rhs, dtype=float)
    m, n = A.shape
    if m > ORACLE_MAX or n > ORACLE_MAX:
        raise ValueError(f"oracle limited to {ORACLE_MAX}x{ORACLE_MAX}, got {m}x{n}")
    if m == 0:
        return LpSolution(0.0, np.zeros(n))
    full = np.hstack([A, -np.eye(m)])
    combos = np.array(list(itertools.combinations(range(n + m), m)), dtype=int)
    B = np.transpose(full[:, combos], (1, 0, 2))
    sv = np.linalg.svd(B, compute_uv=False)
    ok = sv[:, -1] > 1e-12 * sv[:, 0]
    combos, B = combos[ok], B[ok]
    vb = np.linalg.solve(B, np.broadcast_to(b, (len(B), m))[..., None])[..., 0]
    scale = np.maximum(1.0, np.abs(vb).max(axis=1))
    feasible = np.all(vb >= -1e-12 * scale[:, None], axis=1)
    best_obj, best_x = np.inf, None
    for cols, v in zip(combos[feasible], vb[feasible]):
        x = np.zeros(n)
        sel = cols < n
        x[cols[sel]] = np.maximum(v[sel], 0.0)
        if np.any(A @ x < b - 1e-9 * np.abs(b)):
            continue
        obj = x.sum()
        if obj < best_obj - 1e-12 * max(1.0, abs(best_obj) if np.isfinite(best_obj) else 1.0):
            best_obj, best_x = obj, x
    if best_x is None:
        return LpSolution(float("nan"), np.full(n, np.nan), INFEASIBLE)
    return LpSolution(float(best_obj), best_x, OPTIMAL)
