"""Experiment configuration files (JSON) and scenario construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .algorithms import ALGORITHMS, RunConfig
from .model import SignalModel
from .montecarlo import ExperimentPlan
from .topology import (
    DelayProfile,
    NetworkTopology,
    build_delay_profile,
    build_uniform_combination,
    check_combination,
)

__all__ = ["SCHEMA_VERSION", "CONFIG_SCHEMA", "ConfigError", "Scenario", "load_config",
           "validate_config", "build_scenario"]

SCHEMA_VERSION = 1

_matrix = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_pair = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_range = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "network", "delays", "model", "arms", "trials", "horizon"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "network": {
            "type": "object",
            "required": ["type", "num_nodes"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["random_geometric", "explicit"]},
                "num_nodes": {"type": "integer", "minimum": 1},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "edges": {"type": "array", "items": {
                    "type": "array", "items": {"type": "integer", "minimum": 0},
                    "minItems": 2, "maxItems": 2}},
                "positions": {"type": "array", "items": _pair},
            },
        },
        "combination": {
            "type": "object",
            "required": ["rule"],
            "additionalProperties": False,
            "properties": {
                "rule": {"enum": ["uniform", "explicit"]},
                "matrix": _matrix,
            },
        },
        "delays": {
            "type": "object",
            "required": ["mode"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["distance_proportional", "explicit", "constant"]},
                "scale": {"type": "number", "exclusiveMinimum": 0},
                "matrix": _matrix,
                "delay": {"type": "integer", "minimum": 0},
            },
        },
        "model": {
            "type": "object",
            "required": ["w_star"],
            "additionalProperties": False,
            "properties": {
                "dim": {"type": "integer", "minimum": 1},
                "w_star": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "regressor_vars": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "noise_vars": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "regressor_range": _range,
                "noise_range": _range,
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "arms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["algorithm", "step_size"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                    "algorithm": {"enum": list(ALGORITHMS)},
                    "step_size": {"oneOf": [
                        {"type": "number", "minimum": 0},
                        {"type": "array", "items": {"type": "number", "minimum": 0}},
                    ]},
                },
            },
        },
        "trials": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output": {"type": "string"},
        "metadata": {"type": "object"},
    },
}


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        validate_config(cfg)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"at {where}: {exc.message}") from None
    n = cfg["network"]["num_nodes"]
    net = cfg["network"]
    if net["type"] == "random_geometric" and "radius" not in net:
        raise ConfigError("at network: random_geometric needs 'radius'")
    if net["type"] == "explicit":
        for l, k in net.get("edges", []):
            if l >= n or k >= n:
                raise ConfigError(f"at network/edges: edge [{l}, {k}] references a missing node")
    if "positions" in net and len(net["positions"]) != n:
        raise ConfigError(f"at network/positions: expected {n} positions")
    mode = cfg["delays"]["mode"]
    need = {"distance_proportional": "scale", "explicit": "matrix", "constant": "delay"}[mode]
    if need not in cfg["delays"]:
        raise ConfigError(f"at delays: mode {mode!r} needs {need!r}")
    extra = {"scale", "matrix", "delay"} - {need}
    if extra & set(cfg["delays"]):
        raise ConfigError(f"at delays: mode {mode!r} takes only {need!r}")
    model = cfg["model"]
    m = len(model["w_star"])
    if model.get("dim", m) != m:
        raise ConfigError(f"at model/dim: dim {model['dim']} but w_star has {m} entries")
    for key in ("regressor_vars", "noise_vars"):
        if key in model and len(model[key]) != n:
            raise ConfigError(f"at model/{key}: expected {n} values")
    names = [arm_name(a, i) for i, a in enumerate(cfg["arms"])]
    if len(set(names)) != len(names):
        raise ConfigError("at arms: arm names must be unique")
    for i, a in enumerate(cfg["arms"]):
        if isinstance(a["step_size"], list) and len(a["step_size"]) != n:
            raise ConfigError(f"at arms/{i}/step_size: expected {n} values")


def arm_name(arm: dict, index: int) -> str:
    return arm.get("name", f"{index}_{arm['algorithm']}")


@dataclass
class Scenario:
    config: dict
    topology: NetworkTopology
    A: np.ndarray
    delays: DelayProfile
    model: SignalModel
    plan: ExperimentPlan

    @property
    def resolved_config(self) -> dict:
        """Config with every random draw replaced by its realised values.

        Loading it again rebuilds exactly this scenario.
        """
        cfg = copy.deepcopy(self.config)
        cfg.pop("metadata", None)
        topo = self.topology
        net = {"type": "explicit", "num_nodes": topo.num_nodes,
               "edges": [list(e) for e in topo.edges()]}
        if topo.positions is not None:
            net["positions"] = topo.positions.tolist()
        cfg["network"] = net
        R = self.model.covariances
        cfg["model"] = {
            "dim": self.model.dim,
            "w_star": self.model.w_star.tolist(),
            "regressor_vars": R[:, 0, 0].tolist(),
            "noise_vars": self.model.noise_vars.tolist(),
        }
        cfg["master_seed"] = self.plan.master_seed
        return cfg


def build_scenario(cfg: dict, seed: int | None = None) -> Scenario:
    """Realise topology, delays, model and experiment plan from a config.

    `seed` overrides ``master_seed``. Random network and variance draws use
    their own ``seed`` entries when given, else the master seed.
    """
    validate_config(cfg)
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["master_seed"] = int(seed)
    master = int(cfg.get("master_seed", 0))
    net = cfg["network"]
    n = net["num_nodes"]
    try:
        if net["type"] == "random_geometric":
            rng = np.random.default_rng([net.get("seed", master), 0])
            topo = NetworkTopology.random_geometric(n, net["radius"], rng)
        else:
            topo = NetworkTopology.from_edges(n, net.get("edges", []), net.get("positions"))

        comb = cfg.get("combination", {"rule": "uniform"})
        if comb["rule"] == "uniform":
            A = build_uniform_combination(topo)
        else:
            A = check_combination(comb.get("matrix"), topo)

        dcfg = cfg["delays"]
        delays = build_delay_profile(topo, dcfg["mode"], scale=dcfg.get("scale"),
                                     matrix=dcfg.get("matrix"), delay=dcfg.get("delay", 0))

        mcfg = cfg["model"]
        w_star = np.asarray(mcfg["w_star"], dtype=float)
        rng = np.random.default_rng([mcfg.get("seed", master), 1])
        sx = (np.asarray(mcfg["regressor_vars"]) if "regressor_vars" in mcfg
              else rng.uniform(*mcfg.get("regressor_range", (0.8, 1.2)), size=n))
        sv = (np.asarray(mcfg["noise_vars"]) if "noise_vars" in mcfg
              else rng.uniform(*mcfg.get("noise_range", (0.18, 0.22)), size=n))
        model = SignalModel.isotropic(w_star, sx, sv)

        horizon = cfg["horizon"]
        arms = [(arm_name(a, i), RunConfig(a["algorithm"], a["step_size"], horizon))
                for i, a in enumerate(cfg["arms"])]
        plan = ExperimentPlan(tuple(arms), A, delays, model, cfg["trials"], master, horizon)
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(str(exc)) from exc
    return Scenario(cfg, topo, A, delays, model, plan)
