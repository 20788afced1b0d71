"""Optimal user clustering, power splitting and cell loads for multi-cell downlink NOMA."""

__version__ = "0.1.0"

from .network_model import CellConfig, Scenario, UeConfig, load_scenario, save_scenario, validate
from .noma_core import Cluster, ClusterSet, PowerPolicy, enumerate_clusters, oma_clusters
from .lp_solver import CellLp, LpSolution, build_cell_lp, oracle_solve, solve_lp
from .sif_engine import IterationConfig, LoadCoupling, SolveOutcome, check_feasible, improve, iterate
from .scenario_gen import GenConfig, calibrate, calibrate_demands, generate

__all__ = [
    "CellConfig", "CellLp", "Cluster", "ClusterSet", "GenConfig", "IterationConfig", "LoadCoupling",
    "LpSolution", "PowerPolicy", "Scenario", "SolveOutcome", "UeConfig", "build_cell_lp", "calibrate",
    "calibrate_demands", "check_feasible", "enumerate_clusters", "generate", "improve", "iterate",
    "load_scenario", "oma_clusters", "oracle_solve", "save_scenario", "solve_lp", "validate",
]
