"""Per-function control-flow graphs.

Construction rules:

* every ``if`` ends the current block and opens a then block, an else block
  (empty when the source has no ``else``) and a join block;
* ``require``/``assert`` end the current block and open a fallthrough block
  plus a terminal abort block.

Statements are numbered in pre-order (``ast.iter_statements``); each one lands
in exactly one block, the branching statement itself staying in the block it
terminates.  MiniSol has no loops, so every CFG is a DAG.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import ast as A


@dataclass
class BasicBlock:
    id: int
    function: str  # contract-qualified signature
    kind: str  # entry | then | else | join | fall | abort
    stmts: list = field(default_factory=list)
    preds: list = field(default_factory=list)


@dataclass
class Cfg:
    function: str
    blocks: list
    edges: list
    entry: int = 0
    # statement index -> block ids it branches to:
    #   If: (then, else, join); Require/Assert: (fall, abort)
    branches: dict = field(default_factory=dict)

    def successors(self, b: int) -> list:
        return [dst for src, dst in self.edges if src == b]

    def terminals(self) -> list:
        has_succ = {src for src, _ in self.edges}
        return [blk.id for blk in self.blocks if blk.id not in has_succ]


class _Builder:
    def __init__(self, key: str):
        self.key = key
        self.blocks: list = []
        self.edges: list = []
        self.branches: dict = {}
        self.counter = 0

    def new(self, kind: str) -> int:
        b = BasicBlock(len(self.blocks), self.key, kind)
        self.blocks.append(b)
        return b.id

    def edge(self, src: int, dst: int):
        self.edges.append((src, dst))
        self.blocks[dst].preds.append(src)

    def body(self, stmts, cur: int) -> int:
        for s in stmts:
            idx = self.counter
            self.counter += 1
            self.blocks[cur].stmts.append(idx)
            if isinstance(s, A.If):
                then_b = self.new("then")
                else_b = self.new("else")
                self.edge(cur, then_b)
                self.edge(cur, else_b)
                then_exit = self.body(s.then, then_b)
                else_exit = self.body(s.orelse or [], else_b)
                join = self.new("join")
                self.edge(then_exit, join)
                self.edge(else_exit, join)
                self.branches[idx] = (then_b, else_b, join)
                cur = join
            elif isinstance(s, (A.Require, A.Assert)):
                fall = self.new("fall")
                abort = self.new("abort")
                self.edge(cur, fall)
                self.edge(cur, abort)
                self.branches[idx] = (fall, abort)
                cur = fall
        return cur


def build_cfg(f: A.FunctionDecl) -> Cfg:
    b = _Builder(f.key)
    entry = b.new("entry")
    b.body(f.body, entry)
    return Cfg(f.key, b.blocks, b.edges, entry, b.branches)


def build_cfgs(unit: A.SourceUnit) -> dict:
    """CFG for every function, keyed by contract-qualified signature."""
    return {f.key: build_cfg(f) for f in unit.functions()}


def cyclomatic(cfg: Cfg) -> int:
    """McCabe complexity E - N + 2 over the CFG with its exits merged.

    Abort blocks are separate terminal blocks here, so the graph is first
    closed by routing every terminal block into one virtual exit (adding
    T edges and one node), which gives E - N + 1 + T on the raw graph.
    """
    e = len(cfg.edges)
    n = len(cfg.blocks)
    t = len(cfg.terminals())
    return e - n + 1 + t


def neighbors(cfg: Cfg, b: int) -> set:
    """Blocks other than ``b`` sharing at least one predecessor with it."""
    if not 0 <= b < len(cfg.blocks):
        raise KeyError(f"unknown block {b} in {cfg.function}")
    out = set()
    for p in set(cfg.blocks[b].preds):
        for dst in cfg.successors(p):
            if dst != b:
                out.add(dst)
    return out
