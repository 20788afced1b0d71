"""Physical-layer math for downlink NOMA with up to two UEs per cluster.

A pair cluster is stored stronger-UE first: the first member performs SIC
(decoding position 1) and sees no intra-cell term, the second member
(decoding position 2) is interfered by the first member's share of the
cell power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .network_model import Scenario

FAMILIES = ("uniform", "ftpc", "ntt")

DEFAULT_FTPC_GRID = (0.2, 0.4, 0.6, 0.8)
DEFAULT_NTT_GRID = (0.1, 0.2, 0.3, 0.4)


@dataclass(frozen=True)
class Cluster:
    cell: int
    members: tuple[int, ...]

    @property
    def is_pair(self) -> bool:
        return len(self.members) == 2

    def decode_position(self, ue: int) -> int:
        return self.members.index(ue) + 1


@dataclass(frozen=True)
class ClusterSet:
    """Candidate clusters per cell, singletons first (in UE order), then pairs."""

    by_cell: tuple[tuple[Cluster, ...], ...]

    def __getitem__(self, cell: int) -> tuple[Cluster, ...]:
        return self.by_cell[cell]

    def __len__(self) -> int:
        return len(self.by_cell)

    def __iter__(self):
        return iter(self.by_cell)

    def all(self) -> list[Cluster]:
        return [u for cell in self.by_cell for u in cell]

    def pairs(self, cell: int) -> list[Cluster]:
        return [u for u in self.by_cell[cell] if u.is_pair]

    def singletons_only(self) -> "ClusterSet":
        return ClusterSet(tuple(tuple(u for u in cell if not u.is_pair) for cell in self.by_cell))

    @property
    def has_pairs(self) -> bool:
        return any(u.is_pair for u in self.all())


@dataclass(frozen=True)
class PowerPolicy:
    """Power-splitting family plus its candidate parameter grid.

    The uniform family has an empty grid and exactly one candidate.
    """

    family: str = "uniform"
    grid: tuple[float, ...] = ()

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "grid", tuple(float(a) for a in self.grid))
        if fam not in FAMILIES:
            raise ValueError(f"unknown power family {self.family!r}; expected one of {FAMILIES}")
        if fam == "uniform":
            if self.grid:
                raise ValueError("uniform policy takes no parameter grid")
            return
        if not self.grid:
            raise ValueError(f"{fam} policy needs a non-empty parameter grid")
        for a in self.grid:
            _check_alpha(fam, a)

    @classmethod
    def uniform(cls) -> "PowerPolicy":
        return cls("uniform")

    @classmethod
    def ftpc(cls, grid: Iterable[float] = DEFAULT_FTPC_GRID) -> "PowerPolicy":
        return cls("ftpc", tuple(grid))

    @classmethod
    def ntt(cls, grid: Iterable[float] = DEFAULT_NTT_GRID) -> "PowerPolicy":
        return cls("ntt", tuple(grid))

    def candidates(self) -> list[float | None]:
        return [None] if self.family == "uniform" else list(self.grid)

    @property
    def size(self) -> int:
        return len(self.candidates())


@dataclass(frozen=True)
class PowerSplit:
    """Per-member powers (watts) of one cluster, in member order."""

    powers: tuple[float, ...]

    @property
    def total(self) -> float:
        return math.fsum(self.powers)


def _check_alpha(family: str, alpha: float | None) -> None:
    if family == "uniform":
        return
    if alpha is None or not math.isfinite(alpha):
        raise ValueError(f"{family} needs a finite parameter, got {alpha!r}")
    if family == "ftpc" and not 0.0 <= alpha <= 1.0:
        raise ValueError(f"FTPC parameter must be in [0, 1], got {alpha}")
    if family == "ntt" and not 0.0 < alpha < 0.5:
        raise ValueError(f"NTT parameter must be in (0, 0.5), got {alpha}")


def enumerate_clusters(scenario: Scenario, *, pairs: bool = True) -> ClusterSet:
    """Candidate clusters per cell.

    Every served UE is a singleton candidate. With ``pairs=True`` each pair of
    UEs of the same cell with distinct serving gains is added when the stronger
    UE ``j`` and weaker UE ``h`` satisfy ``g_ij/g_ih >= g_kj/g_kh`` for every
    other cell ``k``, which fixes the SIC order independently of the loads.
    """
    g = scenario.gains
    out = []
    for i in range(scenario.n_cells):
        ues = scenario.ues_of(i)
        cell = [Cluster(i, (j,)) for j in ues]
        if pairs:
            others = [k for k in range(scenario.n_cells) if k != i]
            for a in range(len(ues)):
                for b in range(a + 1, len(ues)):
                    j, h = ues[a], ues[b]
                    if g[i, j] == g[i, h]:
                        continue
                    if g[i, j] < g[i, h]:
                        j, h = h, j
                    own = g[i, j] / g[i, h]
                    if all(own >= g[k, j] / g[k, h] for k in others):
                        cell.append(Cluster(i, (j, h)))
        out.append(tuple(cell))
    return ClusterSet(tuple(out))


def oma_clusters(scenario: Scenario) -> ClusterSet:
    return enumerate_clusters(scenario, pairs=False)


def split_fractions(family: str, alpha: float | None, g_strong, g_weak):
    """Fraction of the cell power given to the stronger member (vectorised).

    The weaker member receives ``1 - fraction``.
    """
    _check_alpha(family, alpha)
    g_strong = np.asarray(g_strong, dtype=float)
    if family == "uniform":
        return np.full(g_strong.shape, 0.5)
    if family == "ntt":
        return np.full(g_strong.shape, alpha)
    # g_s^-a / (g_s^-a + g_w^-a) rewritten to avoid overflow for tiny gains
    ratio = g_strong / np.asarray(g_weak, dtype=float)
    return 1.0 / (1.0 + ratio**alpha)


def split_power(cluster: Cluster, family: str, alpha: float | None, p_i: float, gains) -> PowerSplit:
    """Split the cell's per-RB power ``p_i`` among the members of ``cluster``.

    ``gains`` is the scenario gain matrix (cells x UEs).
    """
    family = family.lower()
    if family not in FAMILIES:
        raise ValueError(f"unknown power family {family!r}")
    _check_alpha(family, alpha)
    if not cluster.is_pair:
        return PowerSplit((float(p_i),))
    j, h = cluster.members
    g = np.asarray(gains)
    frac = float(split_fractions(family, alpha, g[cluster.cell, j], g[cluster.cell, h]))
    strong = p_i * frac
    return PowerSplit((strong, p_i - strong))


def interference(p_k: float, g_kj: float, rho_k: float) -> float:
    """Load-averaged interference power from cell k at UE j."""
    return p_k * g_kj * rho_k


def inter_cell_interference(scenario: Scenario, cell: int, loads, ues=None) -> np.ndarray:
    """Sum over cells ``k != cell`` of ``p_k g_kj rho_k`` for each UE in ``ues``.

    ``loads`` is a full length-n vector; the entry of ``cell`` itself is ignored.
    """
    w = scenario.powers * np.asarray(loads, dtype=float)
    w[cell] = 0.0
    g = scenario.gains if ues is None else scenario.gains[:, ues]
    return w @ g


def sinr(cluster: Cluster, member: int, split: PowerSplit, loads, scenario: Scenario) -> float:
    """SINR of ``member`` within ``cluster`` given the other cells' loads."""
    if member not in cluster.members:
        raise ValueError(f"UE {member} is not in cluster {cluster.members}")
    i = cluster.cell
    g_ij = scenario.gains[i, member]
    pos = cluster.members.index(member)
    intra = sum(split.powers[q] * g_ij for q in range(pos))
    inter = float(inter_cell_interference(scenario, i, loads, [member])[0])
    return split.powers[pos] * g_ij / (intra + inter + scenario.noise_power)


def capacity(gamma, rb_count: int, rb_bandwidth: float):
    """Capacity over all RBs in bits per second, ``M B log2(1 + gamma)``."""
    return rb_count * rb_bandwidth * np.log2(1.0 + np.asarray(gamma, dtype=float))


def decoding_margin(cluster: Cluster, loads, scenario: Scenario) -> float:
    """Right minus left side of the SIC decoding condition for a pair (>= 0 means decodable)."""
    if not cluster.is_pair:
        raise ValueError("decoding condition applies to pair clusters only")
    i = cluster.cell
    j, h = cluster.members
    g = scenario.gains
    w = scenario.powers * np.asarray(loads, dtype=float)
    w[i] = 0.0
    lhs = float(np.sum(w * (g[i, h] * g[:, j] - g[i, j] * g[:, h])))
    rhs = (g[i, j] - g[i, h]) * scenario.noise_power
    return rhs - lhs


def check_decoding_condition(cluster: Cluster, split: PowerSplit | None, loads, scenario: Scenario) -> bool:
    """True when the stronger member can decode the weaker one's signal at these loads.

    The condition does not depend on the power split; the argument is kept so
    that callers can pass the split they audit alongside.
    """
    return decoding_margin(cluster, loads, scenario) >= 0.0

