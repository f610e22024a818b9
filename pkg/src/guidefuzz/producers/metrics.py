"""MetricsBundle: the producers' output and its JSON fixture format."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import jsonschema

_SCORE = {"type": "number", "minimum": 0, "maximum": 100}

METRICS_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "MetricsBundle",
    "type": "object",
    "required": ["complexity", "vuln", "invariants", "sequences", "provenance"],
    "additionalProperties": False,
    "properties": {
        "complexity": {"type": "object", "additionalProperties": _SCORE},
        "vuln": {"type": "object", "additionalProperties": _SCORE},
        "invariants": {
            "type": "object",
            "additionalProperties": {"type": "object", "additionalProperties": _SCORE},
        },
        "sequences": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["calls", "score"],
                "additionalProperties": False,
                "properties": {
                    "calls": {"type": "array", "items": {"type": "string"}, "minItems": 2},
                    "score": _SCORE,
                },
            },
        },
        "provenance": {"type": "object"},
    },
}


class MetricsError(ValueError):
    """A metrics fixture violates the schema or does not match the source."""


@dataclass
class MetricsBundle:
    complexity: dict = field(default_factory=dict)  # function key -> score
    vuln: dict = field(default_factory=dict)
    invariant_dep: dict = field(default_factory=dict)  # invariant id -> {key -> score}
    sequences: list = field(default_factory=list)  # [(tuple of keys, score)]
    provenance: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, keys, invariant_ids=(), provenance=None) -> "MetricsBundle":
        keys = list(keys)
        return cls(
            {k: 0 for k in keys}, {k: 0 for k in keys},
            {i: {k: 0 for k in keys} for i in invariant_ids}, [],
            dict(provenance or {"source": "zeros"}),
        )

    def to_json(self) -> dict:
        return {
            "complexity": dict(self.complexity),
            "vuln": dict(self.vuln),
            "invariants": {i: dict(s) for i, s in self.invariant_dep.items()},
            "sequences": [{"calls": list(seq), "score": score} for seq, score in self.sequences],
            "provenance": dict(self.provenance),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MetricsBundle":
        try:
            jsonschema.validate(doc, METRICS_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise MetricsError(f"{where}: {exc.message}") from None
        return cls(
            dict(doc["complexity"]), dict(doc["vuln"]),
            {i: dict(s) for i, s in doc["invariants"].items()},
            [(tuple(s["calls"]), s["score"]) for s in doc["sequences"]],
            dict(doc["provenance"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "MetricsBundle":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MetricsError(f"{path}: invalid JSON: {exc}") from None
        try:
            return cls.from_json(doc)
        except MetricsError as exc:
            raise MetricsError(f"{path}: {exc}") from None

    def validate(self, unit, invariant_ids=None):
        """Check every scored signature exists in ``unit``; raise MetricsError."""
        known = {f.key for f in unit.functions()}
        problems = []
        for name, table in (("complexity", self.complexity), ("vuln", self.vuln)):
            problems += [f"{name}: unknown function {k}" for k in table if k not in known]
        for inv, table in self.invariant_dep.items():
            if invariant_ids is not None and inv not in invariant_ids:
                problems.append(f"invariants: unknown invariant {inv}")
            problems += [f"invariants/{inv}: unknown function {k}" for k in table if k not in known]
        for seq, _ in self.sequences:
            if len(seq) < 2:
                problems.append(f"sequences: {list(seq)} is shorter than 2")
            problems += [f"sequences: unknown function {k}" for k in seq if k not in known]
        if problems:
            raise MetricsError("; ".join(problems))

    def is_zero(self, producer: str) -> bool:
        """True when a producer carries no signal (empty or all-zero scores)."""
        if producer == "complexity":
            return not any(self.complexity.values())
        if producer == "vuln":
            return not any(self.vuln.values())
        if producer == "invariant":
            return not any(any(t.values()) for t in self.invariant_dep.values())
        if producer == "seq":
            return not any(score for _, score in self.sequences)
        raise ValueError(producer)

    def coverage(self, unit) -> dict:
        """How many public functions each producer scored (nonzero)."""
        keys = [f.key for f in unit.public_functions()]
        return {
            "complexity": sum(1 for k in keys if self.complexity.get(k)),
            "vuln": sum(1 for k in keys if self.vuln.get(k)),
            "invariants": {i: sum(1 for k in keys if t.get(k)) for i, t in self.invariant_dep.items()},
            "sequences": len(self.sequences),
            "public_functions": len(keys),
        }


def blockify(bundle: MetricsBundle, cfgs: dict) -> dict:
    """Broadcast function-level scores to every block of each function.

    Returns {"complexity": {key: [score per block]}, "vuln": ...,
    "invariants": {id: {key: [...]}}}; unscored functions get 0.
    """
    def spread(table):
        return {k: [table.get(k, 0)] * len(cfg.blocks) for k, cfg in cfgs.items()}

    return {
        "complexity": spread(bundle.complexity),
        "vuln": spread(bundle.vuln),
        "invariants": {i: spread(t) for i, t in bundle.invariant_dep.items()},
    }
