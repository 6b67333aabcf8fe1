"""Random ensembles of open maps and their JSON configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .driver import Driver, IIDDriver, MarkovDriver, RotationDriver, fiber_word
from .interval_fn import DEFAULT_RESOLUTION, Affine, PiecewiseFn
from .random_map import OpenMap, make_branch
from .transfer import (
    ConstantPotential,
    GeometricPotential,
    PiecewiseAffineLogPotential,
    Potential,
    SymbolWeight,
    TransferOperator,
    WordAnalyzer,
)

SCHEMA_VERSION = 1

_interval = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["schema_version", "ensemble", "potential", "driver"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "base": _interval,
        "ensemble": {
            "type": "object",
            "required": ["maps"],
            "properties": {
                "maps": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["branches"],
                        "properties": {
                            "name": {"type": "string"},
                            "hole": {"type": "array", "items": _interval},
                            "branches": {
                                "type": "array",
                                "minItems": 1,
                                "items": {
                                    "type": "object",
                                    "required": ["family", "params", "domain"],
                                    "properties": {
                                        "family": {"enum": ["affine", "power", "quadratic", "mp"]},
                                        "params": {"type": "object"},
                                        "domain": _interval,
                                    },
                                },
                            },
                        },
                    },
                }
            },
        },
        "potential": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["constant", "geometric", "piecewise_affine_log"]},
                "value": {"type": "number"},
                "t": {"type": "number", "minimum": 0},
                "per_symbol": {"type": "array"},
            },
        },
        "driver": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["iid", "markov", "rotation"]},
                "probabilities": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "matrix": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                "stationary": {"type": "array", "items": {"type": "number"}},
                "seed": {"type": "integer", "minimum": 0},
                "alpha": {"type": "number"},
                "omega0": {"type": "number"},
                "partition": {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3}},
            },
        },
        "resolution": {
            "type": "object",
            "properties": {
                "function_nodes": {"type": "integer", "minimum": 8},
                "nu_cells": {"type": "integer", "minimum": 2},
                "ulam_n": {"type": "integer", "minimum": 2},
                "track_budget": {"type": "integer", "minimum": 0},
            },
        },
        "run": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "n_max": {"type": "integer", "minimum": 1},
                "base_points": {"type": "integer", "minimum": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "base_index": {"type": "integer"},
                "fibers": {"type": "integer", "minimum": 1},
            },
        },
        "escape": {
            "type": "object",
            "required": ["epsilons", "holes"],
            "properties": {
                "epsilons": {"type": "array", "items": {"type": "number"}},
                "holes": {"type": "array"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Schema or consistency violation in a run configuration."""


@dataclass
class RandomEnsemble:
    """Finitely many open maps indexed by symbols, a potential and a driver."""

    maps: tuple
    potential: Potential
    driver: Driver
    resolution: int = DEFAULT_RESOLUTION
    track_budget: int = 64
    name: str = ""
    _ops: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.maps = tuple(self.maps)
        bases = {m.base for m in self.maps}
        if len(bases) != 1:
            raise ConfigError("all maps must share one base interval")
        if self.driver.n_symbols > len(self.maps):
            raise ConfigError("driver references a symbol without a map")

    @property
    def base(self) -> tuple:
        return self.maps[0].base

    @property
    def n_symbols(self) -> int:
        return len(self.maps)

    @cached_property
    def weights(self) -> tuple:
        return tuple(SymbolWeight(m, self.potential, s) for s, m in enumerate(self.maps))

    def operator(self, s: int) -> TransferOperator:
        op = self._ops.get(s)
        if op is None:
            op = TransferOperator(self.maps[s], self.weights[s], self.resolution, self.track_budget)
            self._ops[s] = op
        return op

    @property
    def operators(self) -> list:
        return [self.operator(s) for s in range(self.n_symbols)]

    @cached_property
    def analyzer(self) -> WordAnalyzer:
        return WordAnalyzer(self.maps, self.weights, ncells=self.resolution, resolution=self.resolution)

    def word(self, start: int, n: int) -> tuple:
        return fiber_word(self.driver, start, n)

    def one(self) -> PiecewiseFn:
        return PiecewiseFn.constant(1.0, self.base)

    def with_potential(self, potential: Potential) -> "RandomEnsemble":
        return RandomEnsemble(self.maps, potential, self.driver, self.resolution, self.track_budget, self.name)

    def with_holes(self, holes) -> "RandomEnsemble":
        """Same ensemble with ``holes[s]`` replacing the hole of symbol ``s``."""
        maps = tuple(replace(m, hole=tuple(map(tuple, h))) for m, h in zip(self.maps, holes))
        return RandomEnsemble(maps, self.potential, self.driver, self.resolution, self.track_budget, self.name)

    def with_resolution(self, resolution: int) -> "RandomEnsemble":
        return RandomEnsemble(self.maps, self.potential, self.driver, resolution, self.track_budget, self.name)


# ---------------------------------------------------------------------------
# config parsing


def _parse_potential(spec: dict, base) -> Potential:
    kind = spec["type"]
    if kind == "constant":
        return ConstantPotential(float(spec.get("value", 0.0)))
    if kind == "geometric":
        if "t" not in spec:
            raise ConfigError("geometric potential needs 't'")
        return GeometricPotential(float(spec["t"]))
    fns = []
    for item in spec.get("per_symbol", []):
        bp = item["breakpoints"]
        pieces = [Affine(float(p["slope"]), float(p["intercept"])) for p in item["pieces"]]
        f = PiecewiseFn(bp, pieces)
        if f.base != tuple(base):
            raise ConfigError("log-weight base interval differs from the map base")
        fns.append(f)
    if not fns:
        raise ConfigError("piecewise_affine_log potential needs 'per_symbol'")
    return PiecewiseAffineLogPotential(tuple(fns))


def _parse_driver(spec: dict, seed: int | None) -> Driver:
    kind = spec["type"]
    s = int(spec.get("seed", 0) if seed is None else seed)
    if kind == "iid":
        return IIDDriver(tuple(spec["probabilities"]), s)
    if kind == "markov":
        return MarkovDriver(tuple(map(tuple, spec["matrix"])), tuple(spec["stationary"]), s)
    return RotationDriver(float(spec["alpha"]), tuple(map(tuple, spec["partition"])), float(spec.get("omega0", 0.0)))


def parse_config(cfg: dict, seed: int | None = None, resolution: int | None = None) -> RandomEnsemble:
    """Validate a config document and build its ensemble.

    Raises :class:`ConfigError` on schema problems and
    :class:`~rpfkit.random_map.AssumptionError` when a map has no full branch
    inside its survivor set.
    """
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation at {list(exc.absolute_path)}: {exc.message}") from None
    base = tuple(cfg.get("base", (0.0, 1.0)))
    maps = []
    try:
        for i, mspec in enumerate(cfg["ensemble"]["maps"]):
            branches = [make_branch(b["family"], b["params"], b["domain"]) for b in mspec["branches"]]
            maps.append(OpenMap(tuple(branches), tuple(map(tuple, mspec.get("hole", []))), base,
                                mspec.get("name", f"map{i}")))
        potential = _parse_potential(cfg["potential"], base)
        driver = _parse_driver(cfg["driver"], seed)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    except ValueError as exc:
        if exc.__class__ is ValueError:
            raise ConfigError(str(exc)) from None
        raise
    if isinstance(potential, PiecewiseAffineLogPotential) and len(potential.log_weights) != len(maps):
        raise ConfigError("one log-weight per map is required")
    res = cfg.get("resolution", {})
    return RandomEnsemble(
        tuple(maps),
        potential,
        driver,
        int(resolution or res.get("function_nodes", DEFAULT_RESOLUTION)),
        int(res.get("track_budget", 64)),
        cfg.get("name", ""),
    )


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None


BUILTINS = ("figure1", "mp-ensemble", "intermittent-holes", "doubling-baseline")


def builtin_config(name: str) -> dict:
    if name not in BUILTINS:
        raise ConfigError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
    text = resources.files("rpfkit.builtins").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def builtin(name: str, **kw) -> RandomEnsemble:
    return parse_config(builtin_config(name), **kw)


def escape_holes(cfg: dict) -> tuple[list[float], list[list]]:
    """The epsilon grid and per-epsilon, per-symbol hole lists of a config."""
    esc = cfg.get("escape")
    if esc is None:
        raise ConfigError("config has no 'escape' block")
    eps = [float(e) for e in esc["epsilons"]]
    holes = esc["holes"]
    if len(holes) != len(eps):
        raise ConfigError("escape.holes needs one entry per epsilon")
    nmaps = len(cfg["ensemble"]["maps"])
    for h in holes:
        if len(h) != nmaps:
            raise ConfigError("each escape hole entry needs one hole list per map")
    order = np.argsort(eps)
    return [eps[i] for i in order], [holes[i] for i in order]
