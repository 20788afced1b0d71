"""Random heterogeneous-network snapshots and OMA-based demand calibration.

One macro cell sits at the origin with small cells equally spaced on a ring
inside its coverage. Gains combine COST-231 Hata path loss, log-normal
shadowing and a frozen unit-mean Rayleigh fading power per (cell, UE).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network_model import CellConfig, Scenario, UeConfig, validate
from .noma_core import PowerPolicy, oma_clusters
from .sif_engine import STATUS_DIVERGED, IterationConfig, LoadCoupling, iterate


class GenerationError(RuntimeError):
    pass


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    num_small_cells: int = 6
    num_ues: int = 70
    macro_radius: float = 500.0
    small_radius: float = 100.0
    ring_radius: float | None = None  # defaults to half the macro radius
    carrier_freq: float = 2e9
    shadowing_sigma_macro: float = 8.0
    shadowing_sigma_small: float = 4.0
    macro_power: float = 0.8
    small_power: float = 0.1
    noise_psd: float = -173.0  # dBm/Hz
    load_limit: float = 1.0
    rb_count: int = 100
    rb_bandwidth: float = 180e3
    mean_demand: float = 1e6
    macro_height: float = 30.0
    small_height: float = 10.0
    ue_height: float = 1.5
    min_distance: float = 10.0
    max_retries: int = 500

    def ring(self) -> float:
        return self.macro_radius / 2 if self.ring_radius is None else self.ring_radius

    def problems(self) -> list[str]:
        out = []
        for name in ("macro_radius", "small_radius", "carrier_freq", "macro_power", "small_power",
                     "rb_bandwidth", "mean_demand", "macro_height", "small_height", "ue_height",
                     "min_distance"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0")
        if self.num_small_cells < 0:
            out.append("num_small_cells must be >= 0")
        if self.num_ues < 1 + self.num_small_cells:
            out.append("num_ues must be at least the number of cells")
        if not 0 <= self.ring() + self.small_radius <= self.macro_radius:
            out.append("small cells must lie inside the macro coverage")
        if self.shadowing_sigma_macro < 0 or self.shadowing_sigma_small < 0:
            out.append("shadowing deviations must be >= 0")
        if not 0 < self.load_limit <= 1:
            out.append("load_limit must lie in (0, 1]")
        if self.rb_count < 1:
            out.append("rb_count must be >= 1")
        return out


def cost231_hata_db(distance_m, freq_hz: float, h_bs: float, h_ue: float = 1.5,
                    min_distance: float = 10.0, metropolitan: bool = True):
    """COST-231 Hata path loss in dB (urban, large-city mobile-antenna correction)."""
    d_km = np.maximum(np.asarray(distance_m, dtype=float), min_distance) / 1000.0
    f = freq_hz / 1e6
    a_hm = 3.2 * math.log10(11.75 * h_ue) ** 2 - 4.97
    c = 3.0 if metropolitan else 0.0
    return (46.3 + 33.9 * math.log10(f) - 13.82 * math.log10(h_bs) - a_hm
            + (44.9 - 6.55 * math.log10(h_bs)) * np.log10(d_km) + c)


def noise_power_w(noise_psd_dbm_hz: float, bandwidth_hz: float) -> float:
    return 10 ** ((noise_psd_dbm_hz + 10 * math.log10(bandwidth_hz)) / 10) / 1000.0


def _cell_layout(cfg: GenConfig):
    pos = [(0.0, 0.0)]
    r = cfg.ring()
    for k in range(cfg.num_small_cells):
        th = 2 * math.pi * k / cfg.num_small_cells
        pos.append((r * math.cos(th), r * math.sin(th)))
    return np.array(pos)


def generate(config: GenConfig) -> Scenario:
    """Draw one scenario. Deterministic in ``config`` (including the seed).

    Positions, shadowing and fading are redrawn (from the same seeded stream)
    until every cell serves at least one UE, up to ``max_retries`` attempts.
    """
    problems = config.problems()
    if problems:
        raise ValueError("; ".join(problems))
    rng = np.random.default_rng(config.seed)
    n = 1 + config.num_small_cells
    m = config.num_ues
    cell_xy = _cell_layout(config)
    heights = np.array([config.macro_height] + [config.small_height] * config.num_small_cells)
    sigmas = np.array([config.shadowing_sigma_macro] + [config.shadowing_sigma_small] * config.num_small_cells)

    for attempt in range(1, config.max_retries + 1):
        rad = config.macro_radius * np.sqrt(rng.random(m))
        th = 2 * np.pi * rng.random(m)
        ue_xy = np.column_stack([rad * np.cos(th), rad * np.sin(th)])
        dist = np.linalg.norm(cell_xy[:, None, :] - ue_xy[None, :, :], axis=2)
        pl_db = np.vstack([
            cost231_hata_db(dist[i], config.carrier_freq, heights[i], config.ue_height, config.min_distance)
            for i in range(n)
        ])
        shadow_db = sigmas[:, None] * rng.standard_normal((n, m))
        fading = rng.exponential(1.0, (n, m))
        base_demand = config.mean_demand * rng.uniform(0.5, 1.5, m)
        slow = 10 ** (-(pl_db - shadow_db) / 10)
        serving = np.argmax(slow, axis=0)
        if len(np.unique(serving)) == n:
            break
    else:
        raise GenerationError(
            f"no association with every cell serving a UE after {config.max_retries} attempts"
        )

    gains = slow * fading
    cells = [
        CellConfig(0, (0.0, 0.0), config.macro_power, "macro"),
        *[
            CellConfig(i, (float(cell_xy[i, 0]), float(cell_xy[i, 1])), config.small_power, "small")
            for i in range(1, n)
        ],
    ]
    ues = [
        UeConfig(j, (float(ue_xy[j, 0]), float(ue_xy[j, 1])), int(serving[j]), float(base_demand[j]))
        for j in range(m)
    ]
    scenario = Scenario(
        cells=tuple(cells),
        ues=tuple(ues),
        gains=gains,
        rb_count=config.rb_count,
        rb_bandwidth=config.rb_bandwidth,
        noise_power=noise_power_w(config.noise_psd, config.rb_bandwidth),
        load_limit=config.load_limit,
        metadata={
            "generator": "macro+ring",
            "seed": config.seed,
            "small_cell_placement": "equally spaced ring (modelling choice)",
            "ring_radius_m": config.ring(),
            "attempts": attempt,
        },
    )
    assert not validate(scenario)
    return scenario


@dataclass
class Calibration:
    scale: float
    max_load: float
    bracket: tuple[float, float]
    scenario: Scenario
    evaluations: int = 0
    loads: np.ndarray = field(default_factory=lambda: np.zeros(0))


def calibrate(
    scenario: Scenario,
    target: float | None = None,
    *,
    tol: float = 1e-3,
    config: IterationConfig | None = None,
    max_steps: int = 200,
) -> Calibration:
    """Scale all demands by one factor so the OMA fixed point's max load hits ``target``.

    The result lands in ``[target - tol, target]`` so the OMA baseline stays
    within the load limit. The returned scenario carries ``load_limit = target``.
    """
    target = scenario.load_limit if target is None else float(target)
    if not 0 < target <= 1:
        raise ValueError("target must lie in (0, 1]")
    base = scenario.with_load_limit(target)
    clusters = oma_clusters(base)
    cfg = config or IterationConfig()
    # trajectories from 0 increase monotonically, so crossing target is conclusive
    cfg = IterationConfig(epsilon=cfg.epsilon, max_iters=cfg.max_iters, divergence_cap=target)
    demands = base.demands
    evaluations = 0

    def max_load(s: float):
        nonlocal evaluations
        evaluations += 1
        sc = base.with_demands(demands * s)
        out = iterate(sc, clusters, PowerPolicy.uniform(), cfg, model=LoadCoupling(sc, clusters))
        if out.status == STATUS_DIVERGED or not out.converged:
            return math.inf, sc, out.rho_star
        return float(out.rho_star.max()), sc, out.rho_star

    lo_goal = target - tol
    s = 1.0
    val, sc, rho = max_load(s)
    lo, hi = (0.0, s) if val > target else (s, math.inf)
    steps = 0
    while val > target and steps < 64:
        s /= 2.0
        steps += 1
        val, sc, rho = max_load(s)
        if val <= target:
            lo = s
        else:
            hi = s
    if val > target:
        raise CalibrationError(f"max OMA load exceeds {target} even at demand scale {s:g}; bracket (0, {hi:g})")
    while val < lo_goal and math.isinf(hi):
        s *= 2.0
        val, sc, rho = max_load(s)
        if val <= target:
            lo = s
        else:
            hi = s
    for _ in range(max_steps):
        if lo_goal <= val <= target:
            return Calibration(s, val, (lo, hi), sc, evaluations, rho)
        s = math.sqrt(lo * hi) if lo > 0 else hi / 2
        val, sc, rho = max_load(s)
        if val <= target:
            lo = s
        else:
            hi = s
    raise CalibrationError(f"bisection did not reach [{lo_goal}, {target}]; bracket ({lo:g}, {hi:g})")


def calibrate_demands(scenario: Scenario, target: float | None = None, **kwargs) -> Scenario:
    """Scenario with demands scaled so the OMA max cell load equals ``target`` (within tol)."""
    return calibrate(scenario, target, **kwargs).scenario
