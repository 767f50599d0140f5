"""Solver configuration shared across ingest, routing, and editing.

A single frozen config object travels through the whole pipeline so a
stored session can be replayed bit-for-bit later: nothing reads clocks,
environment variables, or global state behind its back.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .errors import ConfigError

# Feet-to-meter conversion is exact: 200 ft is the association radius
# used throughout (waypoint candidacy and opportunistic coverage).
DEFAULT_BUFFER_M = 60.96

# Free-flow speeds by road class, meters per second.
DEFAULT_SPEEDS_MPS: dict[str, float] = {
    "motorway": 25.0,
    "primary": 15.0,
    "secondary": 13.0,
    "residential": 11.0,
    "service": 5.0,
}

# Sentinel for "U-turns are forbidden outright" and "never keep a spur".
PROHIBITED = math.inf
INFINITE = math.inf


@dataclass(frozen=True)
class SolverConfig:
    """Tunable knobs with production defaults.

    ``u_turn_penalty_s`` may be ``PROHIBITED`` (infinity) to forbid
    reversals entirely. ``min_assets_per_spur`` defaults to ``INFINITE``
    so pruning removes every out-and-back spur unless told otherwise.
    """

    speeds_mps: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_SPEEDS_MPS)
    )
    traffic_multiplier: float = 1.0
    u_turn_penalty_s: float = 120.0
    buffer_m: float = DEFAULT_BUFFER_M
    budget_s: float = 8 * 3600.0
    grid_cell_m: float = 500.0
    target_cells_fraction: float = 0.8
    include_degree2_intersections: bool = False
    min_assets_per_spur: float = INFINITE
    improvement_epsilon_s: float = 1e-9
    max_improvement_moves: int = 20000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.traffic_multiplier < 0.1:
            raise ConfigError(
                f"traffic_multiplier must be >= 0.1, got {self.traffic_multiplier}"
            )
        for cls, speed in self.speeds_mps.items():
            if speed <= 0:
                raise ConfigError(f"speed for road class {cls!r} must be > 0")
        if self.u_turn_penalty_s < 0:
            raise ConfigError("u_turn_penalty_s must be >= 0 or PROHIBITED")
        if self.buffer_m <= 0:
            raise ConfigError("buffer_m must be > 0")
        if not 0 < self.target_cells_fraction <= 1:
            raise ConfigError("target_cells_fraction must be in (0, 1]")
        if self.min_assets_per_spur < 0:
            raise ConfigError("min_assets_per_spur must be >= 0 or INFINITE")

    def speed_for(self, road_class: str) -> float:
        try:
            return self.speeds_mps[road_class]
        except KeyError:
            raise ConfigError(f"no speed configured for road class {road_class!r}")

    def with_overrides(self, **kwargs: Any) -> "SolverConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict[str, Any]:
        out = {
            "speeds_mps": dict(self.speeds_mps),
            "traffic_multiplier": self.traffic_multiplier,
            "u_turn_penalty_s": _inf_to_json(self.u_turn_penalty_s),
            "buffer_m": self.buffer_m,
            "budget_s": self.budget_s,
            "grid_cell_m": self.grid_cell_m,
            "target_cells_fraction": self.target_cells_fraction,
            "include_degree2_intersections": self.include_degree2_intersections,
            "min_assets_per_spur": _inf_to_json(self.min_assets_per_spur),
            "improvement_epsilon_s": self.improvement_epsilon_s,
            "max_improvement_moves": self.max_improvement_moves,
            "seed": self.seed,
        }
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SolverConfig":
        known = {
            "speeds_mps",
            "traffic_multiplier",
            "u_turn_penalty_s",
            "buffer_m",
            "budget_s",
            "grid_cell_m",
            "target_cells_fraction",
            "include_degree2_intersections",
            "min_assets_per_spur",
            "improvement_epsilon_s",
            "max_improvement_moves",
            "seed",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("u_turn_penalty_s", "min_assets_per_spur"):
            if key in kwargs:
                kwargs[key] = _json_to_inf(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path: str) -> "SolverConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        return cls.from_dict(data)


def _inf_to_json(value: float) -> float | str | None:
    return "INFINITE" if math.isinf(value) else value


def _json_to_inf(value: Any) -> float:
    if value is None or (isinstance(value, str) and value.upper() in ("INFINITE", "PROHIBITED", "INF")):
        return math.inf
    return float(value)
