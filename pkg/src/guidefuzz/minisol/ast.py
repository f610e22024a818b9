"""AST node types for MiniSol.

Source positions are kept out of equality so that a reparsed pretty-print
compares equal to the original tree.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

UINT = "uint"
BOOL = "bool"
ADDRESS = "address"
MAP = "map(address=>uint)"

VALUE_TYPES = (UINT, BOOL, ADDRESS)


@dataclass(frozen=True)
class Pos:
    line: int
    col: int


# -- expressions -------------------------------------------------------------


@dataclass
class IntLit:
    value: int
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class BoolLit:
    value: bool
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class AddrLit:
    value: int
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class Name:
    ident: str
    # filled by the resolver: "state", "param" or "local"
    kind: str = field(default="", compare=False)
    type: str = field(default="", compare=False)
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class Index:
    base: Name
    key: "Expr"
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class MsgField:
    attr: str  # "sender" | "value"
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class Unary:
    op: str
    operand: "Expr"
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


Expr = Union[IntLit, BoolLit, AddrLit, Name, Index, MsgField, Unary, Binary]


# -- statements --------------------------------------------------------------


@dataclass
class Assign:
    target: Union[Name, Index]
    op: str  # "=", "+=", "-="
    value: Expr
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class VarDecl:
    type: str
    name: str
    value: Expr
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class If:
    cond: Expr
    then: list
    orelse: Optional[list] = None
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class Require:
    cond: Expr
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class Assert:
    cond: Expr
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class Bug:
    id: int
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class CallStmt:
    contract: Optional[str]  # None for an internal call
    function: str
    args: list
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


Stmt = Union[Assign, VarDecl, If, Require, Assert, Bug, CallStmt]


# -- declarations ------------------------------------------------------------


@dataclass
class Param:
    type: str
    name: str


@dataclass
class StateVar:
    type: str
    name: str
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)


@dataclass
class FunctionDecl:
    name: str
    params: list
    visibility: str  # "public" | "internal"
    body: list
    contract: str = ""
    span: tuple = field(default=(0, 0), compare=False, repr=False)
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)

    @property
    def signature(self) -> str:
        return f"{self.name}({','.join(p.type for p in self.params)})"

    @property
    def key(self) -> str:
        """Contract-qualified signature, unique across a source unit."""
        return f"{self.contract}.{self.signature}"

    @property
    def is_public(self) -> bool:
        return self.visibility == "public"


@dataclass
class ContractDecl:
    name: str
    state_vars: list
    functions: list
    pos: Pos = field(default=Pos(0, 0), compare=False, repr=False)

    def state_var(self, name: str) -> Optional[StateVar]:
        for v in self.state_vars:
            if v.name == name:
                return v
        return None

    def function(self, name: str) -> Optional[FunctionDecl]:
        for f in self.functions:
            if f.name == name:
                return f
        return None


@dataclass
class SourceUnit:
    contracts: list
    source: str = field(default="", compare=False, repr=False)

    def contract(self, name: str) -> Optional[ContractDecl]:
        for c in self.contracts:
            if c.name == name:
                return c
        return None

    def functions(self) -> list:
        """All functions in declaration order (contract order, then body order)."""
        return [f for c in self.contracts for f in c.functions]

    def public_functions(self) -> list:
        return [f for f in self.functions() if f.is_public]

    def function_by_key(self, key: str) -> FunctionDecl:
        for f in self.functions():
            if f.key == key:
                return f
        raise KeyError(key)

    def source_of(self, f: FunctionDecl) -> str:
        start, end = f.span
        return self.source[start:end]


def iter_statements(body):
    """Pre-order walk over statements; the numbering used by CFGs and the VM."""
    for s in body:
        yield s
        if isinstance(s, If):
            yield from iter_statements(s.then)
            if s.orelse is not None:
                yield from iter_statements(s.orelse)


def iter_exprs(stmt):
    """Expressions appearing directly in one statement (not nested statements)."""
    if isinstance(stmt, Assign):
        yield stmt.target
        yield stmt.value
    elif isinstance(stmt, VarDecl):
        yield stmt.value
    elif isinstance(stmt, (If, Require, Assert)):
        yield stmt.cond
    elif isinstance(stmt, CallStmt):
        yield from stmt.args


def walk_expr(e):
    yield e
    if isinstance(e, Index):
        yield from walk_expr(e.base)
        yield from walk_expr(e.key)
    elif isinstance(e, Unary):
        yield from walk_expr(e.operand)
    elif isinstance(e, Binary):
        yield from walk_expr(e.left)
        yield from walk_expr(e.right)
