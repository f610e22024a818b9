from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from guidefuzz.minisol import (
    MiniSolSyntaxError,
    MiniSolTypeError,
    NameResolutionError,
    build_cfgs,
    closure_keys,
    cyclomatic,
    neighbors,
    parse,
    parse_file,
    parse_files,
    render,
    summarize,
)
from guidefuzz.minisol import ast as A

HERE = Path(__file__).parent
CFG_DIR = HERE / "fixtures" / "cfg"
ALL_SOURCES = sorted(CFG_DIR.glob("*.msol")) + [HERE / "fixtures" / "planted.msol"] + sorted(
    (HERE.parent / "bench").glob("*.msol"))

# (blocks, edges, terminals, cyclomatic), counted by hand from the sources
EXPECTED_CFG = {
    "Branchy.f(uint)": (9, 10, 2, 4),
    "Branchy.g(uint)": (1, 0, 1, 1),
    "Guards.put(uint)": (7, 6, 4, 4),
    "Guards.take(uint)": (3, 2, 2, 2),
    "Ledger.record(uint)": (4, 4, 1, 2),
    "Ledger.bump()": (1, 0, 1, 1),
    "Ledger.relay(uint)": (1, 0, 1, 1),
    "Sink.absorb(uint)": (4, 4, 1, 2),
    "Six.step(uint)": (6, 6, 2, 3),
    "Six.clear()": (1, 0, 1, 1),
    "Deep.route(uint,bool)": (12, 14, 2, 5),
    "Deep.toggle(bool)": (4, 4, 1, 2),
}


def fixture_cfgs():
    out = {}
    for path in sorted(CFG_DIR.glob("*.msol")):
        out.update(build_cfgs(parse_file(path)))
    return out


# -- parser --

def test_golden_ast_six():
    unit = parse_file(CFG_DIR / "six.msol")
    level = A.Name("level")
    expected = A.SourceUnit([
        A.ContractDecl("Six", [A.StateVar("uint", "level")], [
            A.FunctionDecl("step", [A.Param("uint", "a")], "public", [
                A.If(A.Binary(">", A.Name("a"), A.IntLit(5)),
                     [A.Assign(level, "+=", A.IntLit(1))], None),
                A.Require(A.Binary("<", level, A.IntLit(3))),
            ], "Six"),
            A.FunctionDecl("clear", [], "public", [A.Assign(level, "=", A.IntLit(0))], "Six"),
        ]),
    ])
    assert unit == expected
    step = unit.contracts[0].functions[0]
    assert step.key == "Six.step(uint)"
    assert step.pos == A.Pos(5, 5)
    cond = step.body[0].cond
    assert (cond.left.kind, cond.left.type) == ("param", "uint")


def test_expression_precedence():
    unit = parse("""contract P { uint x; bool b;
        function f() public { b = x + 2 * 3 > 1 && !b || x % 4 == 0; } }""")
    e = unit.contracts[0].functions[0].body[0].value
    assert e.op == "||"
    assert e.left.op == "&&"
    gt = e.left.left
    assert gt.op == ">" and gt.left.op == "+" and gt.left.right.op == "*"
    assert isinstance(e.left.right, A.Unary)
    assert e.right.op == "==" and e.right.left.op == "%"


def test_literals_and_msg():
    unit = parse("""contract L { map(address=>uint) m; address o;
        function f(uint v) public {
            o = address(0x10);
            m[msg.sender] += msg.value;
            /* block comment */ uint big = 0xff; // trailing
            require(v <= 115792089237316195423570985008687907853269984665640564039457584007913129639935);
        } }""")
    body = unit.contracts[0].functions[0].body
    assert body[0].value == A.AddrLit(16)
    assert body[1].target == A.Index(A.Name("m"), A.MsgField("sender"))
    assert body[2] == A.VarDecl("uint", "big", A.IntLit(255))
    assert body[3].cond.right.value == 2**256 - 1


def test_else_if_chain():
    unit = parse("""contract E { uint x; function f(uint a) public {
        if (a == 1) { x = 1; } else if (a == 2) { x = 2; } else { x = 3; } } }""")
    top = unit.contracts[0].functions[0].body[0]
    assert isinstance(top.orelse[0], A.If)
    assert top.orelse[0].orelse == [A.Assign(A.Name("x"), "=", A.IntLit(3))]


def test_source_spans_are_verbatim():
    text = (CFG_DIR / "calls.msol").read_text()
    unit = parse(text)
    for f in unit.functions():
        src = unit.source_of(f)
        assert src.startswith(f"function {f.name}(")
        assert src.endswith("}")
        assert src in text
    assert unit.source_of(unit.function_by_key("Ledger.bump()")) == (
        "function bump() internal {\n        count += 1;\n    }")


def test_parse_files_merges_units(tmp_path):
    a = tmp_path / "a.msol"
    b = tmp_path / "b.msol"
    a.write_text("contract A { uint x; function f() public { B.g(); } }")
    b.write_text("contract B { uint y; function g() public { y = 1; } }")
    unit = parse_files([a, b])
    assert [c.name for c in unit.contracts] == ["A", "B"]
    assert unit.source_of(unit.function_by_key("B.g()")) == "function g() public { y = 1; }"


@pytest.mark.parametrize("src,exc,where", [
    ("contract C { uint x; function f() public { x = ; } }", MiniSolSyntaxError, (1, 48)),
    ("contract C {\n  uint x;\n  function f() public {\n    x = 1\n  }\n}", MiniSolSyntaxError, (5, 3)),
    ("contract C { function f() public { y = 1; } }", NameResolutionError, (1, 36)),
    ("contract C { function f() public { g(); } }", NameResolutionError, (1, 36)),
    ("contract C { uint x; function f(uint x) public { } }", NameResolutionError, None),
    ("contract C { uint x; function f() public { } function f() public { } }", NameResolutionError, None),
    ("contract C { bool b; function f() public { b = 1; } }", MiniSolTypeError, None),
    ("contract C { uint x; function f() public { if (x) { } } }", MiniSolTypeError, None),
    ("contract C { uint x; function f() public { x += true; } }", MiniSolTypeError, None),
    ("contract C { map(address=>uint) m; function f() public { m[1] = 2; } }", MiniSolTypeError, None),
    ("contract C { function g(uint a) public { } function f() public { g(true); } }", MiniSolTypeError, None),
    ("contract C { function f(map(address=>uint) m) public { } }", MiniSolSyntaxError, None),
    ("contract C { uint x; function f() public { x = 0x1" + "0" * 64 + "; } }", MiniSolSyntaxError, None),
    ("contract C { function f() public { D.g(); } }", NameResolutionError, None),
    ("contract C { function f() public { } } contract C { }", NameResolutionError, None),
])
def test_parse_errors(src, exc, where):
    with pytest.raises(exc) as info:
        parse(src)
    if where is not None:
        assert (info.value.line, info.value.col) == where


def test_cross_contract_call_needs_public_target():
    with pytest.raises(MiniSolTypeError, match="internal"):
        parse("contract C { function f() public { D.g(); } } contract D { function g() internal { } }")


# -- pretty printer round trip --

@pytest.mark.parametrize("path", ALL_SOURCES, ids=lambda p: p.stem)
def test_render_round_trip(path):
    unit = parse_file(path)
    again = parse(render(unit))
    assert again == unit
    assert render(again) == render(unit)


UINT_VARS = ("x", "y")
BOOL_VARS = ("p",)


def uint_expr():
    leaf = st.one_of(st.integers(0, 2**64).map(A.IntLit), st.sampled_from(UINT_VARS).map(A.Name))
    return st.recursive(
        leaf,
        lambda inner: st.builds(A.Binary, st.sampled_from(["+", "-", "*", "/", "%"]), inner, inner),
        max_leaves=6)


def bool_expr():
    leaf = st.one_of(
        st.booleans().map(A.BoolLit),
        st.sampled_from(BOOL_VARS).map(A.Name),
        st.builds(A.Binary, st.sampled_from(["<", "<=", ">", ">=", "==", "!="]), uint_expr(), uint_expr()),
    )
    return st.recursive(
        leaf,
        lambda inner: st.one_of(
            st.builds(A.Binary, st.sampled_from(["&&", "||", "==", "!="]), inner, inner),
            st.builds(A.Unary, st.just("!"), inner)),
        max_leaves=5)


def statements(depth=2):
    simple = st.one_of(
        st.builds(A.Assign, st.sampled_from(UINT_VARS).map(A.Name), st.sampled_from(["=", "+=", "-="]),
                  uint_expr()),
        st.builds(A.Assign, st.just(A.Name("p")), st.just("="), bool_expr()),
        st.builds(A.Require, bool_expr()),
        st.builds(A.Assert, bool_expr()),
        st.integers(0, 9).map(A.Bug),
    )
    if depth == 0:
        return simple
    inner = st.lists(statements(depth - 1), max_size=3)
    return st.one_of(
        simple,
        st.builds(A.If, bool_expr(), inner, st.one_of(st.none(), inner)),
    )


def program(stmts):
    fn = A.FunctionDecl("f", [], "public", stmts, "R")
    return A.SourceUnit([A.ContractDecl(
        "R", [A.StateVar("uint", "x"), A.StateVar("uint", "y"), A.StateVar("bool", "p")], [fn])])


@settings(max_examples=150, deadline=None)
@given(st.lists(statements(), max_size=6))
def test_random_programs_round_trip_and_cfg_laws(stmts):
    unit = program(stmts)
    parsed = parse(render(unit))
    assert parsed == unit
    cfg = build_cfgs(parsed)["R.f()"]
    n = len(cfg.blocks)
    # every statement sits in exactly one block
    placed = sorted(i for b in cfg.blocks for i in b.stmts)
    assert placed == list(range(len(list(A.iter_statements(parsed.contracts[0].functions[0].body)))))
    # DAG: edges only go forward in creation order
    assert all(src < dst for src, dst in cfg.edges)
    decisions = sum(1 for s in A.iter_statements(parsed.contracts[0].functions[0].body)
                    if isinstance(s, (A.If, A.Require, A.Assert)))
    assert cyclomatic(cfg) == decisions + 1
    assert cyclomatic(cfg) == oracles.cyclomatic_merged_exit(cfg.edges, n)
    brute = oracles.neighbor_sets(cfg.edges, n)
    assert [neighbors(cfg, b) for b in range(n)] == brute
    assert (cyclomatic(cfg) == 1) == (n == 1)


# -- CFGs --

def test_cfg_fixture_counts():
    cfgs = fixture_cfgs()
    assert set(cfgs) == set(EXPECTED_CFG)
    for key, (n, e, t, cc) in EXPECTED_CFG.items():
        cfg = cfgs[key]
        assert (len(cfg.blocks), len(cfg.edges), len(cfg.terminals()), cyclomatic(cfg)) == (n, e, t, cc), key
        assert n <= 16


def test_six_block_shape():
    cfg = fixture_cfgs()["Six.step(uint)"]
    assert [b.kind for b in cfg.blocks] == ["entry", "then", "else", "join", "fall", "abort"]
    assert sorted(cfg.edges) == [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (3, 5)]
    assert neighbors(cfg, 1) == {2}
    assert neighbors(cfg, 4) == {5}
    assert neighbors(cfg, 3) == set()
    assert cfg.branches == {0: (1, 2, 3), 2: (4, 5)}


@pytest.mark.parametrize("path", ALL_SOURCES, ids=lambda p: p.stem)
def test_cyclomatic_and_neighbors_match_oracles(path):
    for key, cfg in build_cfgs(parse_file(path)).items():
        n = len(cfg.blocks)
        assert cyclomatic(cfg) == oracles.cyclomatic_merged_exit(cfg.edges, n), key
        brute = oracles.neighbor_sets(cfg.edges, n)
        for b in range(n):
            assert neighbors(cfg, b) == brute[b]


def test_neighbors_unknown_block():
    cfg = fixture_cfgs()["Six.clear()"]
    with pytest.raises(KeyError):
        neighbors(cfg, 3)


# -- static summary and closures --

def test_static_summary():
    unit = parse_file(CFG_DIR / "calls.msol")
    s = summarize(unit)
    rec = s.functions["Ledger.record(uint)"]
    assert rec.cyclomatic == 2
    assert rec.writes == ["last"]
    assert rec.callees == ["Ledger.bump()"]
    relay = s.functions["Ledger.relay(uint)"]
    assert relay.callees == ["Sink.absorb(uint)", "Ledger.record(uint)"]
    assert s.call_graph["Ledger.bump()"] == []
    doc = s.to_json()
    assert [f["function"] for f in doc["functions"]] == [f.key for f in unit.functions()]
    assert doc["functions"][1]["visibility"] == "internal"


def test_closure_order():
    unit = parse_file(CFG_DIR / "calls.msol")
    s = summarize(unit)
    assert closure_keys("Ledger.relay(uint)", s) == [
        "Ledger.relay(uint)", "Ledger.record(uint)", "Sink.absorb(uint)", "Ledger.bump()"]
    assert closure_keys("Sink.absorb(uint)", s) == ["Sink.absorb(uint)"]
