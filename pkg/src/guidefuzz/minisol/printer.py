"""Canonical pretty-printer; ``parse(render(unit))`` equals ``unit``."""
from __future__ import annotations

from . import ast as A

INDENT = "    "


def render_expr(e) -> str:
    if isinstance(e, A.IntLit):
        return str(e.value)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.AddrLit):
        return f"address({e.value})"
    if isinstance(e, A.MsgField):
        return f"msg.{e.attr}"
    if isinstance(e, A.Name):
        return e.ident
    if isinstance(e, A.Index):
        return f"{e.base.ident}[{render_expr(e.key)}]"
    if isinstance(e, A.Unary):
        return f"!{_operand(e.operand)}"
    if isinstance(e, A.Binary):
        return f"{_operand(e.left)} {e.op} {_operand(e.right)}"
    raise TypeError(e)


def _operand(e) -> str:
    # fully parenthesise compound operands; precedence never matters on reparse
    text = render_expr(e)
    return f"({text})" if isinstance(e, A.Binary) else text


def _render_block(body, depth: int, out: list):
    for s in body:
        _render_stmt(s, depth, out)


def _render_stmt(s, depth: int, out: list):
    pad = INDENT * depth
    if isinstance(s, A.If):
        out.append(f"{pad}if ({render_expr(s.cond)}) {{")
        _render_block(s.then, depth + 1, out)
        if s.orelse is None:
            out.append(f"{pad}}}")
        else:
            out.append(f"{pad}}} else {{")
            _render_block(s.orelse, depth + 1, out)
            out.append(f"{pad}}}")
    elif isinstance(s, A.Require):
        out.append(f"{pad}require({render_expr(s.cond)});")
    elif isinstance(s, A.Assert):
        out.append(f"{pad}assert({render_expr(s.cond)});")
    elif isinstance(s, A.Bug):
        out.append(f"{pad}bug({s.id});")
    elif isinstance(s, A.VarDecl):
        out.append(f"{pad}{s.type} {s.name} = {render_expr(s.value)};")
    elif isinstance(s, A.Assign):
        out.append(f"{pad}{render_expr(s.target)} {s.op} {render_expr(s.value)};")
    elif isinstance(s, A.CallStmt):
        prefix = f"{s.contract}." if s.contract else ""
        args = ", ".join(render_expr(a) for a in s.args)
        out.append(f"{pad}{prefix}{s.function}({args});")
    else:
        raise TypeError(s)


def render_function(f: A.FunctionDecl, depth: int = 0) -> str:
    pad = INDENT * depth
    params = ", ".join(f"{p.type} {p.name}" for p in f.params)
    out = [f"{pad}function {f.name}({params}) {f.visibility} {{"]
    _render_block(f.body, depth + 1, out)
    out.append(f"{pad}}}")
    return "\n".join(out)


def render(unit: A.SourceUnit) -> str:
    chunks = []
    for c in unit.contracts:
        lines = [f"contract {c.name} {{"]
        for v in c.state_vars:
            typ = "map(address => uint)" if v.type == A.MAP else v.type
            lines.append(f"{INDENT}{typ} {v.name};")
        for f in c.functions:
            lines.append(render_function(f, 1))
        lines.append("}")
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"
