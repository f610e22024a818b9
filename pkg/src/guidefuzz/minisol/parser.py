"""Recursive-descent parser and resolver for MiniSol.

The grammar is documented in docs/minisol.md.  ``parse`` returns a fully
resolved :class:`SourceUnit`: every name is bound, every expression is typed,
and every call targets an existing function with matching arity.
"""
from __future__ import annotations

import re
from typing import Optional

from . import ast as A
from .ast import ADDRESS, BOOL, MAP, UINT, Pos

MAX_UINT = 2**256 - 1


class MiniSolError(Exception):
    """Base class for front-end errors."""

    @property
    def line(self) -> int:
        return self.pos.line

    @property
    def col(self) -> int:
        return self.pos.col


class MiniSolSyntaxError(MiniSolError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.pos = Pos(line, col)


class NameResolutionError(MiniSolError):
    def __init__(self, name: str, pos: Pos, detail: str = "unknown identifier"):
        super().__init__(f"{pos.line}:{pos.col}: {detail} '{name}'")
        self.name = name
        self.pos = pos


class MiniSolTypeError(MiniSolError):
    def __init__(self, message: str, pos: Pos):
        super().__init__(f"{pos.line}:{pos.col}: {message}")
        self.pos = pos


KEYWORDS = {
    "contract", "function", "public", "internal", "if", "else", "require",
    "assert", "bug", "uint", "bool", "address", "map", "true", "false", "msg",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<int>0[xX][0-9a-fA-F]+|[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>=>|==|!=|<=|>=|&&|\|\||\+=|-=|[-+*/%<>=!(){}\[\];,.])
    """,
    re.VERBOSE | re.DOTALL,
)


class Token:
    __slots__ = ("kind", "text", "offset", "line", "col")

    def __init__(self, kind, text, offset, line, col):
        self.kind = kind
        self.text = text
        self.offset = offset
        self.line = line
        self.col = col

    @property
    def pos(self) -> Pos:
        return Pos(self.line, self.col)

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(source: str) -> list:
    tokens = []
    i, line, line_start = 0, 1, 0
    n = len(source)
    while i < n:
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise MiniSolSyntaxError(
                f"unexpected character {source[i]!r}", line, i - line_start + 1
            )
        kind = m.lastgroup
        text = m.group()
        if kind == "ident" and text in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, i, line, i - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = i + text.rindex("\n") + 1
        i = m.end()
    tokens.append(Token("eof", "", n, line, n - line_start + 1))
    return tokens


_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]


class Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0

    # -- token helpers --

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("kw", "op")

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected '{text}'")
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error("expected identifier")
        return self.advance()

    def error(self, message: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise MiniSolSyntaxError(f"{message}, found {found}", t.line, t.col)

    # -- declarations --

    def parse_unit(self) -> A.SourceUnit:
        contracts = []
        while self.tok.kind != "eof":
            contracts.append(self.parse_contract())
        return A.SourceUnit(contracts, source=self.source)

    def parse_contract(self) -> A.ContractDecl:
        start = self.expect("contract")
        name = self.expect_ident().text
        self.expect("{")
        state_vars, functions = [], []
        while not self.at("}"):
            if self.at("function"):
                functions.append(self.parse_function(name))
            elif self.tok.text in ("uint", "bool", "address", "map"):
                pos = self.tok.pos
                typ = self.parse_type(allow_map=True)
                var = self.expect_ident().text
                self.expect(";")
                state_vars.append(A.StateVar(typ, var, pos=pos))
            else:
                self.error("expected state variable or function")
        self.expect("}")
        return A.ContractDecl(name, state_vars, functions, pos=start.pos)

    def parse_type(self, allow_map: bool = False) -> str:
        t = self.tok
        if t.text in ("uint", "bool", "address") and t.kind == "kw":
            self.advance()
            return t.text
        if allow_map and self.at("map"):
            self.advance()
            self.expect("(")
            self.expect("address")
            self.expect("=>")
            self.expect("uint")
            self.expect(")")
            return MAP
        self.error("expected type")

    def parse_function(self, contract: str) -> A.FunctionDecl:
        start = self.expect("function")
        name = self.expect_ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                typ = self.parse_type()
                params.append(A.Param(typ, self.expect_ident().text))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        if self.at("public") or self.at("internal"):
            visibility = self.advance().text
        else:
            self.error("expected 'public' or 'internal'")
        body, end = self.parse_block()
        return A.FunctionDecl(
            name, params, visibility, body, contract=contract,
            span=(start.offset, end.offset + 1), pos=start.pos,
        )

    def parse_block(self):
        self.expect("{")
        body = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("expected '}'")
            body.append(self.parse_statement())
        return body, self.advance()

    # -- statements --

    def parse_statement(self):
        t = self.tok
        pos = t.pos
        if self.at("if"):
            return self.parse_if()
        if self.at("require") or self.at("assert"):
            self.advance()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return A.Require(cond, pos=pos) if t.text == "require" else A.Assert(cond, pos=pos)
        if self.at("bug"):
            self.advance()
            self.expect("(")
            if self.tok.kind != "int":
                self.error("expected integer bug id")
            bug_id = int(self.advance().text, 0)
            self.expect(")")
            self.expect(";")
            return A.Bug(bug_id, pos=pos)
        if t.kind == "kw" and t.text in ("uint", "bool", "address") and self.peek().kind == "ident":
            typ = self.parse_type()
            name = self.expect_ident().text
            self.expect("=")
            value = self.parse_expr()
            self.expect(";")
            return A.VarDecl(typ, name, value, pos=pos)
        if t.kind == "ident":
            nxt = self.peek()
            if nxt.text == "(":
                return self.parse_call(None)
            if nxt.text == "." and self.peek(2).kind == "ident" and self.peek(3).text == "(":
                contract = self.advance().text
                self.advance()
                return self.parse_call(contract, pos)
            target = self.parse_lvalue()
            if not (self.at("=") or self.at("+=") or self.at("-=")):
                self.error("expected assignment operator")
            op = self.advance().text
            value = self.parse_expr()
            self.expect(";")
            return A.Assign(target, op, value, pos=pos)
        self.error("expected statement")

    def parse_call(self, contract: Optional[str], pos: Optional[Pos] = None):
        name_tok = self.expect_ident()
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.parse_expr())
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        self.expect(";")
        return A.CallStmt(contract, name_tok.text, args, pos=pos or name_tok.pos)

    def parse_lvalue(self):
        t = self.expect_ident()
        name = A.Name(t.text, pos=t.pos)
        if self.at("["):
            self.advance()
            key = self.parse_expr()
            self.expect("]")
            return A.Index(name, key, pos=t.pos)
        return name

    def parse_if(self):
        pos = self.expect("if").pos
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then, _ = self.parse_block()
        orelse = None
        if self.at("else"):
            self.advance()
            if self.at("if"):
                orelse = [self.parse_if()]
            else:
                orelse, _ = self.parse_block()
        return A.If(cond, then, orelse, pos=pos)

    # -- expressions --

    def parse_expr(self, level: int = 0):
        if level == len(_BINARY_LEVELS):
            return self.parse_unary()
        left = self.parse_expr(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            op_tok = self.advance()
            right = self.parse_expr(level + 1)
            left = A.Binary(op_tok.text, left, right, pos=op_tok.pos)
        return left

    def parse_unary(self):
        if self.at("!"):
            t = self.advance()
            return A.Unary("!", self.parse_unary(), pos=t.pos)
        return self.parse_primary()

    def parse_primary(self):
        t = self.tok
        if t.kind == "int":
            self.advance()
            value = int(t.text, 0)
            if value > MAX_UINT:
                raise MiniSolSyntaxError("integer literal out of range", t.line, t.col)
            return A.IntLit(value, pos=t.pos)
        if self.at("true") or self.at("false"):
            self.advance()
            return A.BoolLit(t.text == "true", pos=t.pos)
        if self.at("address"):
            self.advance()
            self.expect("(")
            if self.tok.kind != "int":
                self.error("expected integer address literal")
            value = int(self.advance().text, 0)
            self.expect(")")
            return A.AddrLit(value, pos=t.pos)
        if self.at("msg"):
            self.advance()
            self.expect(".")
            attr = self.expect_ident()
            if attr.text not in ("sender", "value"):
                raise NameResolutionError(f"msg.{attr.text}", attr.pos, "unknown builtin")
            return A.MsgField(attr.text, pos=t.pos)
        if t.kind == "ident":
            return self.parse_lvalue()
        if self.at("("):
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        self.error("expected expression")


# -- resolution and type checking ----------------------------------------------


class _Resolver:
    def __init__(self, unit: A.SourceUnit):
        self.unit = unit
        self.contract: Optional[A.ContractDecl] = None
        self.scopes: list = []

    def run(self):
        seen = set()
        for c in self.unit.contracts:
            if c.name in seen:
                raise NameResolutionError(c.name, c.pos, "duplicate contract")
            seen.add(c.name)
            names = set()
            for v in c.state_vars:
                if v.name in names:
                    raise NameResolutionError(v.name, v.pos, "duplicate state variable")
                names.add(v.name)
            fnames = set()
            for f in c.functions:
                if f.name in fnames:
                    raise NameResolutionError(f.name, f.pos, "duplicate function")
                fnames.add(f.name)
        for c in self.unit.contracts:
            self.contract = c
            for f in c.functions:
                self.function(f)

    def function(self, f: A.FunctionDecl):
        scope = {}
        for p in f.params:
            if p.name in scope or self.contract.state_var(p.name):
                raise NameResolutionError(p.name, f.pos, "duplicate name")
            scope[p.name] = ("param", p.type)
        self.scopes = [scope]
        self.block(f.body)

    def lookup(self, name: A.Name):
        for scope in reversed(self.scopes):
            if name.ident in scope:
                return scope[name.ident]
        v = self.contract.state_var(name.ident)
        if v is not None:
            return ("state", v.type)
        raise NameResolutionError(name.ident, name.pos)

    def block(self, body):
        self.scopes.append({})
        for s in body:
            self.stmt(s)
        self.scopes.pop()

    def stmt(self, s):
        if isinstance(s, A.If):
            self.expect_type(s.cond, BOOL)
            self.block(s.then)
            if s.orelse is not None:
                self.block(s.orelse)
        elif isinstance(s, (A.Require, A.Assert)):
            self.expect_type(s.cond, BOOL)
        elif isinstance(s, A.Bug):
            pass
        elif isinstance(s, A.VarDecl):
            self.expect_type(s.value, s.type)
            if any(s.name in sc for sc in self.scopes) or self.contract.state_var(s.name):
                raise NameResolutionError(s.name, s.pos, "duplicate name")
            self.scopes[-1][s.name] = ("local", s.type)
        elif isinstance(s, A.Assign):
            target_type = self.expr(s.target)
            if target_type == MAP:
                raise MiniSolTypeError("cannot assign a whole map", s.pos)
            if s.op != "=" and target_type != UINT:
                raise MiniSolTypeError(f"'{s.op}' needs a uint target", s.pos)
            self.expect_type(s.value, target_type)
        elif isinstance(s, A.CallStmt):
            self.call(s)
        else:  # pragma: no cover
            raise TypeError(s)

    def call(self, s: A.CallStmt):
        if s.contract is None:
            target_contract = self.contract
        else:
            target_contract = self.unit.contract(s.contract)
            if target_contract is None:
                raise NameResolutionError(s.contract, s.pos, "unknown contract")
        f = target_contract.function(s.function)
        if f is None:
            raise NameResolutionError(s.function, s.pos, "unknown function")
        if s.contract is not None and not f.is_public:
            raise MiniSolTypeError(f"'{s.contract}.{s.function}' is internal", s.pos)
        if len(f.params) != len(s.args):
            raise MiniSolTypeError(
                f"'{s.function}' expects {len(f.params)} arguments, got {len(s.args)}", s.pos
            )
        for p, arg in zip(f.params, s.args):
            self.expect_type(arg, p.type)

    def expect_type(self, e, typ: str):
        actual = self.expr(e)
        if actual != typ:
            pos = getattr(e, "pos", Pos(0, 0))
            raise MiniSolTypeError(f"expected {typ}, got {actual}", pos)

    def expr(self, e) -> str:
        if isinstance(e, A.IntLit):
            return UINT
        if isinstance(e, A.BoolLit):
            return BOOL
        if isinstance(e, A.AddrLit):
            return ADDRESS
        if isinstance(e, A.MsgField):
            return ADDRESS if e.attr == "sender" else UINT
        if isinstance(e, A.Name):
            kind, typ = self.lookup(e)
            e.kind, e.type = kind, typ
            return typ
        if isinstance(e, A.Index):
            base = self.expr(e.base)
            if base != MAP:
                raise MiniSolTypeError(f"'{e.base.ident}' is not a map", e.pos)
            self.expect_type(e.key, ADDRESS)
            return UINT
        if isinstance(e, A.Unary):
            self.expect_type(e.operand, BOOL)
            return BOOL
        if isinstance(e, A.Binary):
            if e.op in ("&&", "||"):
                self.expect_type(e.left, BOOL)
                self.expect_type(e.right, BOOL)
                return BOOL
            if e.op in ("==", "!="):
                lt = self.expr(e.left)
                if lt == MAP:
                    raise MiniSolTypeError("cannot compare maps", e.pos)
                self.expect_type(e.right, lt)
                return BOOL
            self.expect_type(e.left, UINT)
            self.expect_type(e.right, UINT)
            return BOOL if e.op in ("<", "<=", ">", ">=") else UINT
        raise TypeError(e)  # pragma: no cover


def parse(source: str) -> A.SourceUnit:
    """Parse and resolve MiniSol source text.

    Raises MiniSolSyntaxError (with line/column), NameResolutionError naming
    the offending identifier, or MiniSolTypeError.
    """
    unit = Parser(source).parse_unit()
    _Resolver(unit).run()
    return unit


def parse_file(path) -> A.SourceUnit:
    return parse_files([path])


def _relocate(exc: MiniSolError, paths, texts):
    """Point an error at the file (and file-local line) it came from."""
    line, start = exc.pos.line, 1
    for p, text in zip(paths, texts):
        n = text.count("\n") + 1
        if line < start + n:
            local = Pos(line - start + 1, exc.pos.col)
            rest = str(exc).split(": ", 1)[1]
            exc.args = (f"{local.line}:{local.col}: {rest}",)
            exc.pos = local
            exc.path = str(p)
            return
        start += n


def parse_files(paths) -> A.SourceUnit:
    """Parse several files as one unit; spans index into the joined text.

    Errors carry ``path`` and a line relative to that file.
    """
    paths = list(paths)
    texts = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            texts.append(fh.read())
    try:
        return parse("\n".join(texts))
    except MiniSolError as exc:
        _relocate(exc, paths, texts)
        raise
