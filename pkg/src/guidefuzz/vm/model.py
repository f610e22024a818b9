"""Values exchanged with the VM: calls, test cases, state and results."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

# Eight symbolic externally-owned accounts; contracts live at CONTRACT_BASE + i.
ADDRESS_POOL = (1, 2, 3, 4, 5, 6, 7, 8)
CONTRACT_BASE = 0x1000
MAX_CALLS = 32
MAX_ARG = 2**64 - 1


@dataclass(frozen=True)
class Call:
    contract: str
    function: str  # signature, e.g. "arm(uint)"
    args: tuple = ()
    sender: int = ADDRESS_POOL[0]
    value: int = 0

    @property
    def key(self) -> str:
        return f"{self.contract}.{self.function}"

    def to_json(self) -> dict:
        return {
            "contract": self.contract,
            "function": self.function,
            "args": list(self.args),
            "sender": self.sender,
            "value": self.value,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Call":
        return cls(d["contract"], d["function"], tuple(d.get("args", ())),
                   d.get("sender", ADDRESS_POOL[0]), d.get("value", 0))


@dataclass(frozen=True)
class TestCase:
    calls: tuple

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 1 <= len(self.calls) <= MAX_CALLS:
            raise ValueError(f"test case length {len(self.calls)} outside [1, {MAX_CALLS}]")

    def __len__(self):
        return len(self.calls)

    @property
    def keys(self) -> tuple:
        """Seq(t): the function keys of the calls, in order."""
        return tuple(c.key for c in self.calls)

    def to_json(self) -> list:
        return [c.to_json() for c in self.calls]

    @classmethod
    def from_json(cls, calls) -> "TestCase":
        return cls(tuple(Call.from_json(c) for c in calls))


@dataclass
class VmState:
    storage: dict  # contract -> {var -> value}; maps are dicts address -> uint
    balances: dict  # address -> native balance
    steps: int = 0

    def copy(self) -> "VmState":
        return VmState(
            {c: {k: (dict(v) if isinstance(v, dict) else v) for k, v in vars_.items()}
             for c, vars_ in self.storage.items()},
            dict(self.balances),
            self.steps,
        )

    def same_contents(self, other: "VmState") -> bool:
        """Equality ignoring the step counter and zero map/balance entries."""
        def norm(state):
            storage = {
                c: {k: ({a: x for a, x in v.items() if x} if isinstance(v, dict) else v)
                    for k, v in vars_.items()}
                for c, vars_ in state.storage.items()
            }
            return storage, {a: x for a, x in state.balances.items() if x}
        return norm(self) == norm(other)


@dataclass(frozen=True)
class Location:
    function: str
    line: int
    col: int

    def to_json(self) -> dict:
        return {"function": self.function, "line": self.line, "col": self.col}


@dataclass(frozen=True)
class OracleEvent:
    kind: str  # AssertViolation | BugHit | InvariantViolation | Timeout
    ident: str  # assert site, bug id, invariant id, or called function
    location: Location
    call_index: int

    @property
    def oracle(self) -> str:
        return f"{self.kind}:{self.ident}"


@dataclass
class ExecResult:
    edges: dict  # (block, block) -> hit count; block ids are VM-global
    blocks: frozenset  # BB(t)
    functions: tuple  # Function(t), one entry per top-level call
    events: list
    reverted: tuple
    steps: int
    state: Optional[VmState] = field(default=None, compare=False, repr=False)

    def fingerprint(self):
        return (
            tuple(sorted(self.edges.items())), self.blocks, self.functions,
            tuple(self.events), self.reverted, self.steps,
        )
