"""Static attributes handed to the metric producers."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import ast as A
from .cfg import build_cfg, cyclomatic


@dataclass
class FunctionSummary:
    key: str
    signature: str
    contract: str
    visibility: str
    cyclomatic: int
    reads: list
    writes: list
    callees: list

    def to_json(self) -> dict:
        return {
            "function": self.key,
            "signature": self.signature,
            "contract": self.contract,
            "visibility": self.visibility,
            "cyclomatic": self.cyclomatic,
            "reads": self.reads,
            "writes": self.writes,
            "callees": self.callees,
        }


@dataclass
class StaticSummary:
    functions: dict  # key -> FunctionSummary, declaration order
    call_graph: dict  # key -> list of callee keys

    def to_json(self) -> dict:
        return {
            "functions": [s.to_json() for s in self.functions.values()],
            "call_graph": self.call_graph,
        }


def _state_names(e, out: list):
    for node in A.walk_expr(e):
        if isinstance(node, A.Name) and node.kind == "state" and node.ident not in out:
            out.append(node.ident)


def reads_writes(f: A.FunctionDecl):
    """Direct state-variable reads and writes, in order of first appearance."""
    reads, writes = [], []
    for s in A.iter_statements(f.body):
        if isinstance(s, A.Assign):
            t = s.target
            base = t.base if isinstance(t, A.Index) else t
            if isinstance(t, A.Index):
                _state_names(t.key, reads)
            if base.kind == "state":
                if base.ident not in writes:
                    writes.append(base.ident)
                # compound assignment reads the old value
                if s.op != "=" and base.ident not in reads:
                    reads.append(base.ident)
            _state_names(s.value, reads)
        else:
            for e in A.iter_exprs(s):
                _state_names(e, reads)
    return reads, writes


def callees(f: A.FunctionDecl, unit: A.SourceUnit) -> list:
    """Keys of internal and cross-contract callees, first occurrence order."""
    out = []
    for s in A.iter_statements(f.body):
        if isinstance(s, A.CallStmt):
            target = unit.contract(s.contract or f.contract).function(s.function)
            if target.key not in out:
                out.append(target.key)
    return out


def summarize(unit: A.SourceUnit) -> StaticSummary:
    functions = {}
    call_graph = {}
    for f in unit.functions():
        reads, writes = reads_writes(f)
        called = callees(f, unit)
        functions[f.key] = FunctionSummary(
            f.key, f.signature, f.contract, f.visibility,
            cyclomatic(build_cfg(f)), reads, writes, called,
        )
        call_graph[f.key] = called
    return StaticSummary(functions, call_graph)


def dependency_closure(key: str, unit: A.SourceUnit, summary: StaticSummary = None) -> list:
    """``key`` followed by every function it transitively depends on.

    A function depends on its callees and on every function of its contract
    that writes a state variable it reads.  Traversal is breadth-first and
    each node's dependencies are visited in declaration order.
    """
    summary = summary or summarize(unit)
    return [unit.function_by_key(k) for k in closure_keys(key, summary)]


def _direct_deps(key: str, summary: StaticSummary) -> list:
    me = summary.functions[key]
    deps = set(me.callees)
    reads = set(me.reads)
    for other in summary.functions.values():
        if other.contract == me.contract and reads.intersection(other.writes):
            deps.add(other.key)
    deps.discard(key)
    # declaration order is the summary's insertion order
    return [k for k in summary.functions if k in deps]


def closure_keys(key: str, summary: StaticSummary) -> list:
    return [k for k, _ in closure_with_depth(key, summary)]


def closure_with_depth(key: str, summary: StaticSummary) -> list:
    """(key, BFS depth) pairs of the dependency closure, root first."""
    seen = {key}
    order = [(key, 0)]
    queue = deque([(key, 0)])
    while queue:
        k, depth = queue.popleft()
        for dep in _direct_deps(k, summary):
            if dep not in seen:
                seen.add(dep)
                order.append((dep, depth + 1))
                queue.append((dep, depth + 1))
    return order
