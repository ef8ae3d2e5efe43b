"""Run configuration files (JSON, ``schema_version`` 1).

Example::

    {
      "schema_version": 1,
      "sigma2": 1.0,
      "costs": [0.1, 0.2, 0.5],
      "buyers": [
        {"id": 0, "valuation": {"family": "exp_quadratic", "a": 1.0}},
        {"id": 1, "valuation": {"family": "exp_quadratic", "a": 1.0}}
      ],
      "objective": "welfare",
      "seed": 0
    }

Every other key is optional; see ``DEFAULTS``.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

from .baseline import ConfigError
from .simulation import DeviationGrid
from .valuations import DEFAULT_NODES, Buyer, DomainError, MarketConfig, valuation_from_dict

SCHEMA_VERSION = 1
OBJECTIVES = ("welfare", "profit")

DEFAULTS = {
    "objective": "welfare",
    "seed": 0,
    "reps": 100_000,
    "rounds": 1000,
    "bb_rounds": 10_000,
    "mu": 0.0,
    "mu_grid": {"half_width": 5.0, "points": 21},
    "deviation_grid": {},
    "quadrature_nodes": DEFAULT_NODES,
    "output": "reports",
    "broker_absorbs_residual": False,
}


class ConfigWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RunConfig:
    market: MarketConfig
    objective: str
    seed: int
    reps: int
    rounds: int
    bb_rounds: int
    mu: float
    grid: DeviationGrid
    output: str
    broker_absorbs_residual: bool
    config_hash: str

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "objective" in kw and kw["objective"] not in OBJECTIVES:
            raise ConfigError(f"objective: must be one of {OBJECTIVES}")
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(kw)
        return RunConfig(**values)


def _require(raw: dict, key: str):
    if key not in raw:
        raise ConfigError(f"{key}: required field missing")
    return raw[key]


def _number(raw: dict, key: str, kind=float, positive=False, minimum=None):
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    value = kind(value)
    if positive and not value > 0:
        raise ConfigError(f"{key}: must be > 0, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {value!r}")
    return value


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {version!r}")
    digest = config_hash(raw)
    merged = {**DEFAULTS, **raw}

    _require(raw, "sigma2")
    sigma2 = _number(merged, "sigma2", positive=True)

    costs = _require(raw, "costs")
    if not isinstance(costs, list) or len(costs) < 2:
        raise ConfigError("costs: expected a list of at least two per-point costs")
    for k, c in enumerate(costs):
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not c > 0:
            raise ConfigError(f"costs[{k}]: must be a number > 0, got {c!r}")
    if costs != sorted(costs):
        warnings.warn("costs: not sorted; contributors reordered by increasing cost", ConfigWarning, stacklevel=2)
        costs = sorted(costs)

    buyers_raw = _require(raw, "buyers")
    if not isinstance(buyers_raw, list) or not buyers_raw:
        raise ConfigError("buyers: expected a non-empty list")
    buyers = []
    for k, b in enumerate(buyers_raw):
        if not isinstance(b, dict) or "valuation" not in b:
            raise ConfigError(f"buyers[{k}].valuation: required field missing")
        try:
            val = valuation_from_dict(b["valuation"])
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError(f"buyers[{k}].valuation: {exc}") from None
        buyers.append(Buyer(int(b.get("id", k)), val))

    objective = merged["objective"]
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective: must be one of {OBJECTIVES}, got {objective!r}")

    nodes = _number(merged, "quadrature_nodes", kind=int, minimum=2)
    try:
        market = MarketConfig(tuple(buyers), tuple(costs), sigma2, quadrature_nodes=nodes)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None

    mu_grid = merged["mu_grid"]
    dev = dict(merged["deviation_grid"])
    unknown = set(dev) - {f.name for f in fields(DeviationGrid)}
    if unknown:
        raise ConfigError(f"deviation_grid.{sorted(unknown)[0]}: unknown field")
    for key in ("half_width", "points"):
        if key in mu_grid:
            dev["mu_half_width" if key == "half_width" else "mu_points"] = mu_grid[key]
    dev = {k: tuple(v) if isinstance(v, list) else v for k, v in dev.items()}
    grid = DeviationGrid(**dev)
    if grid.mu_points < 1:
        raise ConfigError("mu_grid.points: must be >= 1")

    return RunConfig(
        market=market,
        objective=objective,
        seed=_number(merged, "seed", kind=int, minimum=0),
        reps=_number(merged, "reps", kind=int, minimum=2),
        rounds=_number(merged, "rounds", kind=int, minimum=1),
        bb_rounds=_number(merged, "bb_rounds", kind=int, minimum=1),
        mu=_number(merged, "mu"),
        grid=grid,
        output=str(merged["output"]),
        broker_absorbs_residual=bool(merged["broker_absorbs_residual"]),
        config_hash=digest,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(raw)
