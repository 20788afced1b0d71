"""Scenario data model, validation and the JSON scenario file format.

Cells and UEs live in two independent 0-based index spaces. Gains are
linear power gains stored as an ``n_cells x n_ues`` matrix, demands are
in bits per second.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

CELL_KINDS = ("macro", "small")


class ScenarioFormatError(ValueError):
    """The scenario file could not be parsed into a Scenario."""


class ScenarioValidationError(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid scenario: " + "; ".join(self.violations))


@dataclass(frozen=True)
class CellConfig:
    id: int
    position: tuple[float, float]
    per_rb_power: float
    kind: str = "macro"


@dataclass(frozen=True)
class UeConfig:
    id: int
    position: tuple[float, float]
    serving_cell: int
    demand: float


@dataclass(frozen=True, eq=False)
class Scenario:
    """Immutable network snapshot.

    ``gains[i, j]`` is the linear gain from cell ``i`` to UE ``j``.
    ``noise_power`` is watts per RB; ``load_limit`` is the per-cell cap
    on the fraction of RBs in use.
    """

    cells: tuple[CellConfig, ...]
    ues: tuple[UeConfig, ...]
    gains: np.ndarray
    rb_count: int
    rb_bandwidth: float
    noise_power: float
    load_limit: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "ues", tuple(self.ues))
        g = np.array(self.gains, dtype=float, copy=True)
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.cells == other.cells
            and self.ues == other.ues
            and self.gains.shape == other.gains.shape
            and bool(np.array_equal(self.gains, other.gains))
            and self.rb_count == other.rb_count
            and self.rb_bandwidth == other.rb_bandwidth
            and self.noise_power == other.noise_power
            and self.load_limit == other.load_limit
            and self.metadata == other.metadata
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def powers(self) -> np.ndarray:
        return np.array([c.per_rb_power for c in self.cells], dtype=float)

    @property
    def demands(self) -> np.ndarray:
        return np.array([u.demand for u in self.ues], dtype=float)

    @property
    def serving(self) -> np.ndarray:
        return np.array([u.serving_cell for u in self.ues], dtype=int)

    def ues_of(self, cell: int) -> list[int]:
        return [u.id for u in self.ues if u.serving_cell == cell]

    def with_demands(self, demands: Sequence[float]) -> "Scenario":
        ues = tuple(dataclasses.replace(u, demand=float(d)) for u, d in zip(self.ues, demands))
        return dataclasses.replace(self, ues=ues)

    def with_load_limit(self, load_limit: float) -> "Scenario":
        return dataclasses.replace(self, load_limit=float(load_limit))


def validate(scenario: Scenario) -> list[str]:
    """Return one human-readable message per violated invariant (empty if valid)."""
    out: list[str] = []
    n, m = scenario.n_cells, scenario.n_ues

    if n == 0:
        out.append("scenario must contain at least one cell")
    for k, c in enumerate(scenario.cells):
        if c.id != k:
            out.append(f"cell ids must be contiguous 0..{n - 1}; position {k} has id {c.id}")
        if not (c.per_rb_power > 0 and math.isfinite(c.per_rb_power)):
            out.append(f"cell {c.id}: per_rb_power must be > 0")
        if c.kind not in CELL_KINDS:
            out.append(f"cell {c.id}: kind must be one of {CELL_KINDS}, got {c.kind!r}")

    for k, u in enumerate(scenario.ues):
        if u.id != k:
            out.append(f"UE ids must be contiguous 0..{m - 1}; position {k} has id {u.id}")
        if not (u.demand > 0 and math.isfinite(u.demand)):
            out.append(f"UE {u.id}: demand must be > 0")
        if not (0 <= u.serving_cell < n):
            out.append(f"UE {u.id}: serving_cell {u.serving_cell} is not a valid cell id")

    served = {u.serving_cell for u in scenario.ues}
    for c in scenario.cells:
        if c.id not in served:
            out.append(f"cell {c.id} serves no UE")

    g = scenario.gains
    if g.shape != (n, m):
        out.append(f"gains must have shape ({n}, {m}), got {g.shape}")
    else:
        bad = np.argwhere(~(np.isfinite(g) & (g > 0)))
        for i, j in bad:
            out.append(f"gain ({i},{j}) must be > 0")

    if not (isinstance(scenario.rb_count, (int, np.integer)) and scenario.rb_count >= 1):
        out.append("rb_count must be a positive integer")
    if not (scenario.rb_bandwidth > 0 and math.isfinite(scenario.rb_bandwidth)):
        out.append("rb_bandwidth must be > 0")
    if not (scenario.noise_power > 0 and math.isfinite(scenario.noise_power)):
        out.append("noise_power must be > 0")
    if not (0 < scenario.load_limit <= 1):
        out.append("load_limit must lie in (0, 1]")
    return out


# -- file format -------------------------------------------------------------

def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "cells": [
            {
                "id": c.id,
                "position": [float(c.position[0]), float(c.position[1])],
                "per_rb_power": float(c.per_rb_power),
                "kind": c.kind,
            }
            for c in scenario.cells
        ],
        "ues": [
            {
                "id": u.id,
                "position": [float(u.position[0]), float(u.position[1])],
                "serving_cell": u.serving_cell,
                "demand": float(u.demand),
            }
            for u in scenario.ues
        ],
        # json emits floats with repr(), the shortest string that round-trips bit-exactly
        "gains": scenario.gains.tolist(),
        "rb": {"count": int(scenario.rb_count), "bandwidth_hz": float(scenario.rb_bandwidth)},
        "noise_w_per_rb": float(scenario.noise_power),
        "load_limit": float(scenario.load_limit),
    }
    if scenario.metadata:
        doc["metadata"] = scenario.metadata
    return doc


def _require(obj: Any, key: str, where: str, alias: str | None = None) -> Any:
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{where}: expected an object")
    if key not in obj:
        name = f"{where}.{key}" if where else key
        extra = f" ({alias})" if alias else ""
        raise ScenarioFormatError(f"missing required field {name}{extra}")
    return obj[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFormatError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _position(value: Any, where: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        raise ScenarioFormatError(f"{where}: expected [x, y]")
    return (_number(value[0], where), _number(value[1], where))


def scenario_from_dict(doc: Any) -> Scenario:
    """Build a Scenario from a parsed document. Raises ScenarioFormatError on schema problems."""
    if not isinstance(doc, dict):
        raise ScenarioFormatError("top level must be a JSON object")
    cells_doc = _require(doc, "cells", "")
    ues_doc = _require(doc, "ues", "")
    gains_doc = _require(doc, "gains", "")
    rb = _require(doc, "rb", "")
    rb_count = _require(rb, "count", "rb", alias="rb_count")
    rb_bw = _require(rb, "bandwidth_hz", "rb", alias="rb_bandwidth")
    noise = _require(doc, "noise_w_per_rb", "", alias="noise_power")
    load_limit = _require(doc, "load_limit", "")

    if not isinstance(cells_doc, list) or not isinstance(ues_doc, list):
        raise ScenarioFormatError("cells and ues must be arrays")
    cells = []
    for k, c in enumerate(cells_doc):
        where = f"cells[{k}]"
        cid = _require(c, "id", where)
        if not isinstance(cid, int):
            raise ScenarioFormatError(f"{where}.id: expected an integer")
        cells.append(
            CellConfig(
                id=cid,
                position=_position(_require(c, "position", where), f"{where}.position"),
                per_rb_power=_number(_require(c, "per_rb_power", where), f"{where}.per_rb_power"),
                kind=str(c.get("kind", "macro")),
            )
        )
    ues = []
    for k, u in enumerate(ues_doc):
        where = f"ues[{k}]"
        uid = _require(u, "id", where)
        sc = _require(u, "serving_cell", where)
        if not isinstance(uid, int) or not isinstance(sc, int):
            raise ScenarioFormatError(f"{where}: id and serving_cell must be integers")
        ues.append(
            UeConfig(
                id=uid,
                position=_position(_require(u, "position", where), f"{where}.position"),
                serving_cell=sc,
                demand=_number(_require(u, "demand", where), f"{where}.demand"),
            )
        )
    if not isinstance(rb_count, int) or isinstance(rb_count, bool):
        raise ScenarioFormatError("rb.count: expected an integer")
    try:
        gains = np.array(gains_doc, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"gains: {exc}") from None
    if gains.ndim != 2:
        raise ScenarioFormatError("gains: expected a row-major 2-D array")
    return Scenario(
        cells=tuple(cells),
        ues=tuple(ues),
        gains=gains,
        rb_count=rb_count,
        rb_bandwidth=_number(rb_bw, "rb.bandwidth_hz"),
        noise_power=_number(noise, "noise_w_per_rb"),
        load_limit=_number(load_limit, "load_limit"),
        metadata=dict(doc.get("metadata") or {}),
    )


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=1) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file.

    Raises ScenarioFormatError (with line/column for JSON syntax errors or the
    offending field path) and ScenarioValidationError for invariant violations.
    """
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        scenario = scenario_from_dict(doc)
    except ScenarioFormatError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from None
    violations = validate(scenario)
    if violations:
        raise ScenarioValidationError(violations)
    return scenario
