"""JSON run configuration: schema, parsing and object construction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import jsonschema

from .contracts import (
    ConstantPenalty,
    ConstantReward,
    ContractSpec,
    ExponentialReward,
    LinearC1,
    LinearC3,
    LinearReward,
    QuadraticC2,
    check_penalty,
    reward_at_least,
)
from .errors import DomainError
from .levy_models import CramerLundberg, LinearBrownian
from .simulation import McConfig

CONTRACT_KINDS = ("drawdown", "drawdown-cancellable", "drawup", "drawup-cancellable")
SWEEP_VARIABLES = ("d", "u", "p", "alpha", "theta")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}


def _typed(name: str, required: dict, optional: Optional[dict] = None) -> dict:
    props = {"type": {"const": name}, **required, **(optional or {})}
    return {
        "type": "object",
        "properties": props,
        "required": ["type", *required],
        "additionalProperties": False,
    }


_MODEL = {
    "oneOf": [
        _typed("brownian", {"mu": _NUM, "sigma": _POS}),
        _typed("cramer-lundberg", {"mu_hat": _POS, "beta": _POS, "rho": _POS}),
    ]
}

SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(CONTRACT_KINDS)},
        "solve_premium": {"type": "boolean"},
        "model": _MODEL,
        "analytic_model": _MODEL,
        "contract": {
            "type": "object",
            "properties": {
                "a": _POS, "r": _NONNEG, "p": _NONNEG, "d": _NONNEG,
                "b": _POS, "u": _NONNEG,
            },
            "required": ["a", "r"],
            "additionalProperties": False,
        },
        "reward": {
            "oneOf": [
                _typed("constant", {"alpha": _NONNEG}),
                _typed("linear", {"alpha1": _NUM, "alpha2": _NUM}),
                _typed("exponential", {"omega": _NUM, "kappa": _NUM}),
            ]
        },
        "penalty": {
            "oneOf": [
                _typed("constant", {"c": _NONNEG}),
                _typed("linear-c1", {}),
                _typed("quadratic-c2", {}),
                _typed("linear-c3", {"c_end": _NUM}),
            ]
        },
        "theta": _NUM,
        "mc": {
            "type": "object",
            "properties": {
                "n_paths": {"type": "integer", "minimum": 100},
                "seed": {"type": "integer", "minimum": 0},
                "time_step": _POS,
                "horizon_cap": _POS,
                "threads": {"type": "integer", "minimum": 1},
                "antithetic": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {
                "variable": {"enum": list(SWEEP_VARIABLES)},
                "from": _NUM,
                "to": _NUM,
                "points": {"type": "integer", "minimum": 2},
            },
            "required": ["variable", "from", "to", "points"],
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
            "additionalProperties": False,
        },
    },
    "required": ["model", "contract", "reward"],
    "additionalProperties": False,
}


class ConfigError(DomainError):
    """The run configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    points: int


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with constructed model and contract objects."""

    kind: str
    model: object
    contract: ContractSpec
    reward: object
    penalty: object = None
    theta: Optional[float] = None
    mc: Optional[McConfig] = None
    sweep: Optional[SweepSpec] = None
    solve_premium: bool = False
    output_path: Optional[str] = None
    output_format: str = "json"
    analytic_model: object = None  # sensitivity control for validation only


def build_model(block: dict):
    if block["type"] == "brownian":
        return LinearBrownian(float(block["mu"]), float(block["sigma"]))
    return CramerLundberg(float(block["mu_hat"]), float(block["beta"]), float(block["rho"]))


def build_reward(block: dict):
    t = block["type"]
    if t == "constant":
        return ConstantReward(float(block["alpha"]))
    if t == "linear":
        return LinearReward(float(block["alpha1"]), float(block["alpha2"]))
    return ExponentialReward(float(block["omega"]), float(block["kappa"]))


def build_penalty(block: Optional[dict]):
    if block is None:
        return None
    t = block["type"]
    if t == "constant":
        return ConstantPenalty(float(block["c"]))
    if t == "linear-c1":
        return LinearC1()
    if t == "quadratic-c2":
        return QuadraticC2()
    return LinearC3(float(block["c_end"]))


def parse_config(doc: dict, seed_override: Optional[int] = None) -> RunConfig:
    """Validate ``doc`` against the schema and the cross-field rules, then build objects."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from None

    kind = doc.get("kind", "drawdown" if "b" not in doc["contract"] else "drawup")
    c = doc["contract"]
    if kind.startswith("drawup") and "b" not in c:
        raise ConfigError(f"kind {kind} needs contract.b")
    if kind.startswith("drawdown") and "b" in c:
        raise ConfigError(f"kind {kind} does not take contract.b; use a drawup kind")
    if kind.endswith("cancellable") and "penalty" not in doc:
        raise ConfigError(f"kind {kind} needs a penalty block")
    if "b" in c and c["b"] > c["a"]:
        raise ConfigError(f"contract.b={c['b']} must not exceed contract.a={c['a']}")

    model = build_model(doc["model"])
    contract = ContractSpec(
        a=float(c["a"]), r=float(c["r"]),
        p=None if "p" not in c else float(c["p"]),
        d=float(c.get("d", 0.0)),
        b=None if "b" not in c else float(c["b"]),
        u=float(c.get("u", 0.0)),
    )
    reward = build_reward(doc["reward"])
    reward_at_least(reward, contract.a)
    penalty = build_penalty(doc.get("penalty"))
    if penalty is not None and contract.p is not None and contract.r > 0:
        check_penalty(penalty, contract.p, contract.r, contract.a)

    mc = None
    if "mc" in doc:
        mc = McConfig(**doc["mc"])
    if seed_override is not None:
        mc = McConfig(**{**(doc.get("mc") or {}), "seed": int(seed_override)})

    sweep = None
    if "sweep" in doc:
        s = doc["sweep"]
        sweep = SweepSpec(s["variable"], float(s["from"]), float(s["to"]), int(s["points"]))

    out = doc.get("output", {})
    return RunConfig(
        kind=kind, model=model, contract=contract, reward=reward, penalty=penalty,
        theta=doc.get("theta"), mc=mc, sweep=sweep,
        solve_premium=bool(doc.get("solve_premium", False)),
        output_path=out.get("path"), output_format=out.get("format", "json"),
        analytic_model=build_model(doc["analytic_model"]) if "analytic_model" in doc else None,
    )
