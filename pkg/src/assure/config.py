"""Versioned JSON scenario configs.

A config file holds a ``schema`` tag, the ``scenario`` it runs, an optional
default ``seed`` and one section per scenario::

    {"schema": "assure/1", "scenario": "drone", "seed": 33,
     "drone": {"width": 20, ..., "cloud_mask": ["..##..", ...]},
     "clock": {"mu": -0.01, "sigma2": 0.02, ...}}

Cloud masks are stored as one string per grid row, ``#`` for cloud and ``.``
for clear sky. A ``null`` clock budget means unbounded.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .clock import AssuranceSpec, WienerParams
from .drone import ConfigError, WorldConfig
from .grid import DiffusionParams

SCHEMA = "assure/1"
SCENARIOS = ("drone", "clock")


@dataclass
class ClockScenario:
    mu: float = -0.01
    sigma2: float = 0.02
    limit: float = 1.0
    p_max: float = 0.05
    sync_cost: float = 1.0
    budget: float = math.inf
    duration: float = 3600.0
    window: int = 50
    tick: float = 1.0
    warmup_reads: int = 3
    warmup_interval: float = 10.0

    def __post_init__(self):
        try:
            # both constructors validate their fields
            _ = self.params, self.spec
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.duration <= 0 or self.tick <= 0 or self.warmup_interval <= 0:
            raise ConfigError("duration, tick and warmup_interval must be > 0")
        if self.window < 2 or self.warmup_reads < 2:
            raise ConfigError("window and warmup_reads must be >= 2")

    @property
    def params(self) -> WienerParams:
        return WienerParams(self.mu, self.sigma2)

    @property
    def spec(self) -> AssuranceSpec:
        return AssuranceSpec(self.limit, self.p_max, self.sync_cost, self.budget)


@dataclass
class ScenarioConfig:
    scenario: str
    seed: Optional[int] = None
    drone: Optional[WorldConfig] = None
    clock: Optional[ClockScenario] = None

    def section(self):
        return self.drone if self.scenario == "drone" else self.clock


def _line_of(text: str, key: str) -> Optional[int]:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(text: str, path: str, msg: str) -> ConfigError:
    key = path.rsplit(".", 1)[-1]
    line = _line_of(text, key) if text else None
    where = f"line {line}, " if line else ""
    return ConfigError(f"{where}field {path}: {msg}")


def _mask_from_rows(rows) -> np.ndarray:
    if not isinstance(rows, list) or not all(isinstance(r, str) for r in rows):
        raise ValueError("expected a list of row strings")
    if any(set(r) - {".", "#"} for r in rows):
        raise ValueError("rows may only contain '.' and '#'")
    if len({len(r) for r in rows}) > 1:
        raise ValueError("rows have unequal lengths")
    return np.array([[c == "#" for c in r] for r in rows], dtype=bool).reshape(len(rows), -1)


def _mask_to_rows(mask: np.ndarray) -> list[str]:
    return ["".join("#" if v else "." for v in row) for row in mask]


_DRONE_FIELDS = {f.name for f in fields(WorldConfig)}
_CLOCK_FIELDS = {f.name for f in fields(ClockScenario)}


def _drone_from(obj: dict, text: str) -> WorldConfig:
    if not isinstance(obj, dict):
        raise _fail(text, "drone", "expected an object")
    kw: dict[str, Any] = {}
    for key, value in obj.items():
        path = f"drone.{key}"
        if key not in _DRONE_FIELDS:
            raise _fail(text, path, "unknown field")
        try:
            if key == "cloud_mask":
                value = _mask_from_rows(value)
            elif key == "diffusion":
                value = DiffusionParams(float(value))
            elif key in ("start", "target", "initial_truth") and value is not None:
                if not (isinstance(value, list) and len(value) == 2):
                    raise ValueError("expected a two-element list")
        except (TypeError, ValueError) as exc:
            raise _fail(text, path, str(exc)) from None
        kw[key] = value
    try:
        return WorldConfig(**kw)
    except (ConfigError, TypeError, ValueError) as exc:
        msg = str(exc)
        bad = next((k for k in kw if msg.startswith(k) or f" {k} " in msg), None)
        raise _fail(text, f"drone.{bad}" if bad else "drone", msg) from None


def _clock_from(obj: dict, text: str) -> ClockScenario:
    if not isinstance(obj, dict):
        raise _fail(text, "clock", "expected an object")
    for key, value in obj.items():
        if key not in _CLOCK_FIELDS:
            raise _fail(text, f"clock.{key}", "unknown field")
        if key != "budget" and not isinstance(value, (int, float)):
            raise _fail(text, f"clock.{key}", "expected a number")
    kw = dict(obj)
    if kw.get("budget", 0) is None:
        kw["budget"] = math.inf
    try:
        return ClockScenario(**kw)
    except (ConfigError, TypeError, ValueError) as exc:
        raise _fail(text, "clock", str(exc)) from None


def loads(text: str) -> ScenarioConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("line 1: top level must be an object")
    if doc.get("schema") != SCHEMA:
        raise _fail(text, "schema", f"expected {SCHEMA!r}, got {doc.get('schema')!r}")
    scenario = doc.get("scenario")
    if scenario not in SCENARIOS:
        raise _fail(text, "scenario", f"expected one of {SCENARIOS}, got {scenario!r}")
    seed = doc.get("seed")
    if seed is not None and not (isinstance(seed, int) and 0 <= seed < 2 ** 64):
        raise _fail(text, "seed", "expected an unsigned 64-bit integer")
    unknown = set(doc) - {"schema", "scenario", "seed", "drone", "clock"}
    if unknown:
        raise _fail(text, sorted(unknown)[0], "unknown field")
    if scenario not in doc:
        raise _fail(text, "scenario", f"missing {scenario!r} section")
    cfg = ScenarioConfig(scenario, seed)
    if "drone" in doc:
        cfg.drone = _drone_from(doc["drone"], text)
    if "clock" in doc:
        cfg.clock = _clock_from(doc["clock"], text)
    return cfg


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)


def _drone_to(cfg: WorldConfig) -> dict:
    return {
        "width": cfg.width,
        "height": cfg.height,
        "start": list(cfg.start),
        "target": list(cfg.target),
        "nofly_margin": cfg.nofly_margin,
        "horizon": cfg.horizon,
        "threshold": cfg.threshold,
        "p_gps": cfg.p_gps,
        "diffusion": cfg.diffusion.leak,
        "perturbation_scale": cfg.perturbation_scale,
        "speed": cfg.speed,
        "resource_budget": cfg.resource_budget,
        "resource_threshold": cfg.resource_threshold,
        "gps_cost": cfg.gps_cost,
        "initial_truth": None if cfg.initial_truth is None else list(cfg.initial_truth),
        "cloud_mask": _mask_to_rows(cfg.cloud_mask),
    }


def _clock_to(cfg: ClockScenario) -> dict:
    out = {f.name: getattr(cfg, f.name) for f in fields(ClockScenario)}
    if math.isinf(out["budget"]):
        out["budget"] = None
    return out


def dumps(cfg: ScenarioConfig) -> str:
    doc: dict[str, Any] = {"schema": SCHEMA, "scenario": cfg.scenario}
    if cfg.seed is not None:
        doc["seed"] = cfg.seed
    if cfg.drone is not None:
        doc["drone"] = _drone_to(cfg.drone)
    if cfg.clock is not None:
        doc["clock"] = _clock_to(cfg.clock)
    return json.dumps(doc, indent=2) + "\n"


def shipped(name: str) -> Path:
    """Path of a scenario file bundled with the package."""
    return Path(__file__).parent / "scenarios" / name
