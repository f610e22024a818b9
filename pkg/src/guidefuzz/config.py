"""Campaign configuration files (TOML) and published artifact schemas."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import tomli

from .producers.client import DEFAULT_KEY_ENV, DEFAULT_TEMPERATURES, ProviderConfig
from .producers.fetch import Invariant
from .scheduler import PRODUCERS, EnergyParams


class ConfigError(ValueError):
    pass


_NUM = {"type": "number"}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["sources"],
    "properties": {
        "sources": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "seed": {"type": "integer"},
        "max_executions": {"type": "integer", "minimum": 0},
        "time_budget": {"type": "number", "minimum": 0},
        "stop_on_first_bug": {"type": "boolean"},
        "producers": {"type": "array", "items": {"enum": list(PRODUCERS)}},
        "metrics_fixture": {"type": "string"},
        "target": {"type": "string"},
        "energy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "A": _NUM, "B": _NUM, "cap": _NUM,
                "base_energy": {"type": "integer"},
                "rarity_clamp": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "normalizer_window": {"type": "integer"},
            },
        },
        "genesis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "balances": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
                "storage": {
                    "type": "object",
                    "additionalProperties": {"type": "object"},
                },
            },
        },
        "invariants": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "text"],
                "properties": {
                    "id": {"type": "string"}, "text": {"type": "string"},
                    "site": {"type": "string"},
                },
            },
        },
        "llm": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "endpoint": {"type": "string"}, "model": {"type": "string"},
                "api_key_env": {"type": "string"},
                "temperatures": {"type": "array", "items": _NUM, "minItems": 1},
                "retries": {"type": "integer", "minimum": 0},
                "timeout": _NUM,
            },
        },
    },
}


@dataclass
class CampaignConfig:
    sources: list
    genesis: dict = field(default_factory=dict)
    max_executions: int = None
    time_budget: float = None
    seed: int = 0
    energy: EnergyParams = field(default_factory=EnergyParams)
    metrics_fixture: str = None
    provider: ProviderConfig = None
    invariants: list = field(default_factory=list)
    stop_on_first_bug: bool = False
    target: str = None  # oracle whose first detection counts as time-to-bug
    path: str = None

    def __post_init__(self):
        if self.max_executions is None and self.time_budget is None:
            raise ConfigError("set max_executions and/or time_budget")

    @classmethod
    def from_toml(cls, path) -> "CampaignConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                doc = tomli.load(fh)
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        try:
            return cls.from_dict(doc, base=path.parent, path=str(path))
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    @classmethod
    def from_dict(cls, doc: dict, base=Path("."), path: str = None) -> "CampaignConfig":
        try:
            jsonschema.validate(doc, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{where}: {exc.message}") from None
        base = Path(base)
        energy_doc = dict(doc.get("energy", {}))
        if "rarity_clamp" in energy_doc:
            energy_doc["rarity_clamp"] = tuple(energy_doc["rarity_clamp"])
        if "producers" in doc:
            energy_doc["producers"] = tuple(doc["producers"])
        try:
            energy = EnergyParams(**energy_doc)
        except ValueError as exc:
            raise ConfigError(f"energy: {exc}") from None
        provider = None
        llm = doc.get("llm")
        if llm and "endpoint" in llm:
            provider = ProviderConfig(
                endpoint=llm["endpoint"], model=llm.get("model", ""),
                api_key_env=llm.get("api_key_env", DEFAULT_KEY_ENV),
                temperatures=tuple(llm.get("temperatures", DEFAULT_TEMPERATURES)),
                retries=llm.get("retries", 3), timeout=llm.get("timeout", 60.0),
            )
        fixture = doc.get("metrics_fixture")
        return cls(
            sources=[str(base / s) for s in doc["sources"]],
            genesis=doc.get("genesis", {}),
            max_executions=doc.get("max_executions"),
            time_budget=doc.get("time_budget"),
            seed=doc.get("seed", 0),
            energy=energy,
            metrics_fixture=str(base / fixture) if fixture else None,
            provider=provider,
            invariants=[Invariant(i["id"], i["text"], i.get("site", ""))
                        for i in doc.get("invariants", [])],
            stop_on_first_bug=doc.get("stop_on_first_bug", False),
            target=doc.get("target"),
            path=path,
        )

    def with_overrides(self, **changes) -> "CampaignConfig":
        return replace(self, **changes)

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "sources": list(self.sources),
            "seed": self.seed,
            "max_executions": self.max_executions,
            "time_budget": self.time_budget,
            "stop_on_first_bug": self.stop_on_first_bug,
            "target": self.target,
            "energy": self.energy.to_json(),
            "metrics_fixture": self.metrics_fixture,
            "llm": None if self.provider is None else {
                "endpoint": self.provider.endpoint, "model": self.provider.model,
                "temperatures": list(self.provider.temperatures),
            },
            "invariants": [{"id": i.id, "text": i.text, "site": i.site} for i in self.invariants],
            "genesis": self.genesis,
        }


_DETECTION = {
    "type": "object",
    "required": ["oracle", "kind", "ident", "location", "executions", "elapsed_ms", "test_case"],
    "properties": {
        "oracle": {"type": "string"},
        "kind": {"enum": ["AssertViolation", "BugHit", "InvariantViolation", "Timeout"]},
        "ident": {"type": "string"},
        "location": {
            "type": "object",
            "required": ["function", "line", "col"],
        },
        "executions": {"type": "integer", "minimum": 1},
        "elapsed_ms": {"type": "number", "minimum": 0},
        "test_case": {"type": "array", "minItems": 1, "maxItems": 32},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["config", "executions", "elapsed_ms", "corpus_size", "stop_reason",
                 "coverage", "detections"],
    "properties": {
        "config": {"type": "object"},
        "executions": {"type": "integer", "minimum": 0},
        "elapsed_ms": {"type": "number", "minimum": 0},
        "corpus_size": {"type": "integer", "minimum": 0},
        "stop_reason": {"enum": ["budget", "time", "bug"]},
        "coverage": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["elapsed_ms", "executions", "instructions", "blocks", "edges"],
            },
        },
        "detections": {"type": "array", "items": _DETECTION},
    },
}

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["tool", "version", "seed", "config", "metrics", "wall_clock"],
    "properties": {
        "tool": {"const": "guidefuzz"},
        "version": {"type": "string"},
        "seed": {"type": "integer"},
        "config": {"type": "object"},
        "metrics": {"type": "object", "required": ["source", "provenance"]},
        "wall_clock": {"type": "object", "required": ["start", "end", "seconds"]},
    },
}

STATIC_SCHEMA = {
    "type": "object",
    "required": ["functions", "call_graph"],
    "properties": {
        "functions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["function", "signature", "cyclomatic", "reads", "writes", "callees"],
                "properties": {"cyclomatic": {"type": "integer", "minimum": 1}},
            },
        },
        "call_graph": {"type": "object"},
    },
}

COVERAGE_COLUMNS = ("elapsed_ms", "executions", "blocks", "edges")

# published under docs/schemas/<name>.schema.json
SCHEMAS = {
    "config": CONFIG_SCHEMA,
    "report": REPORT_SCHEMA,
    "manifest": MANIFEST_SCHEMA,
    "static": STATIC_SCHEMA,
}
