"""MiniSol execution engine.

Functions are compiled once into nested closures; ``MiniVM.execute`` then
replays a test case from genesis, one top-level call at a time.  A call that
reverts (failed require/assert, checked-arithmetic fault, insufficient
balance, call depth, step cap) has its state changes rolled back; later calls
still run.
"""
from __future__ import annotations

import logging

from ..minisol import ast as A
from ..minisol.cfg import build_cfg
from .model import (
    ADDRESS_POOL,
    CONTRACT_BASE,
    ExecResult,
    Location,
    OracleEvent,
    TestCase,
    VmState,
)

log = logging.getLogger(__name__)

MAX_UINT = 2**256 - 1
STEP_CAP = 100_000
MAX_DEPTH = 64
TX_SOURCE = -1  # pseudo block feeding every top-level call's entry edge


class Revert(Exception):
    pass


class _Timeout(Exception):
    pass


class HarnessError(Exception):
    """A call that cannot be resolved against the loaded unit."""


class _Exec:
    __slots__ = ("hits", "events", "steps", "depth", "state", "call_index", "cap", "journal")

    def __init__(self, state: VmState, cap: int):
        self.hits = {}
        self.events = []
        self.steps = 0
        self.depth = 0
        self.state = state
        self.call_index = 0
        self.cap = cap
        self.journal = []  # (container, key, old value, key existed) for rollback


def _write(ex, container: dict, key, value):
    had = key in container
    ex.journal.append((container, key, container[key] if had else None, had))
    container[key] = value


def _rollback(ex, mark: int):
    j = ex.journal
    while len(j) > mark:
        container, key, old, had = j.pop()
        if had:
            container[key] = old
        else:
            del container[key]


class _Frame:
    __slots__ = ("ex", "locals", "st", "sender", "value", "cur", "this")

    def __init__(self, ex, st, sender, value, cur, this):
        self.ex = ex
        self.locals = {}
        self.st = st
        self.sender = sender
        self.value = value
        self.cur = cur
        self.this = this


def _tick(ex):
    ex.steps += 1
    if ex.steps > ex.cap:
        raise _Timeout()


def _edge(ex, src, dst):
    hits = ex.hits
    e = (src, dst)
    hits[e] = hits.get(e, 0) + 1


class CompiledFunction:
    def __init__(self, decl: A.FunctionDecl, base: int):
        self.decl = decl
        self.key = decl.key
        self.base = base
        self.param_names = tuple(p.name for p in decl.params)
        self.param_types = tuple(p.type for p in decl.params)
        self.body = ()

    def invoke(self, ex, args, sender, value, caller_block, this):
        if ex.depth >= MAX_DEPTH:
            raise Revert()
        fr = _Frame(ex, ex.state.storage[self.decl.contract], sender, value, self.base, this)
        fr.locals.update(zip(self.param_names, args))
        _edge(ex, caller_block, self.base)
        ex.depth += 1
        try:
            for s in self.body:
                s(fr)
        finally:
            ex.depth -= 1


class MiniVM:
    """Executes test cases against a resolved :class:`SourceUnit`.

    ``invariants`` maps assert sites (``"Contract.sig#n"``, the n-th assert
    of the function in source order) to invariant ids; a failing bound
    assert reports InvariantViolation instead of AssertViolation.
    """

    def __init__(self, unit: A.SourceUnit, invariants: dict = None, step_cap: int = STEP_CAP):
        self.unit = unit
        self.step_cap = step_cap
        self.invariants = dict(invariants or {})
        self.contract_address = {
            c.name: CONTRACT_BASE + i for i, c in enumerate(unit.contracts)
        }
        self.cfgs = {}
        self.functions = {}
        self.block_names = []  # global block id -> "Contract.sig#local"
        self.block_owner = []  # global block id -> function key
        self.function_blocks = {}  # function key -> list of global block ids
        for f in unit.functions():
            cfg = build_cfg(f)
            base = len(self.block_names)
            self.cfgs[f.key] = cfg
            self.functions[f.key] = CompiledFunction(f, base)
            ids = []
            for b in cfg.blocks:
                self.block_names.append(f"{f.key}#{b.id}")
                self.block_owner.append(f.key)
                ids.append(base + b.id)
            self.function_blocks[f.key] = ids
        known_sites = set()
        for f in unit.functions():
            self._compile_function(f, known_sites)
        for site in self.invariants:
            if site not in known_sites:
                raise HarnessError(f"invariant bound to unknown assert site {site!r}")
        self.public = [self.functions[f.key] for f in unit.public_functions()]

    # -- genesis --

    def genesis(self, storage: dict = None, balances: dict = None) -> VmState:
        """Default-initialised state with optional overrides.

        ``storage`` is {contract: {var: value}}; map values are dicts keyed
        by address.  ``balances`` keys may be pool addresses or contract names.
        """
        st = {}
        for c in self.unit.contracts:
            vars_ = {}
            for v in c.state_vars:
                vars_[v.name] = {} if v.type == A.MAP else (False if v.type == A.BOOL else 0)
            st[c.name] = vars_
        for cname, overrides in (storage or {}).items():
            contract = self.unit.contract(cname)
            if contract is None:
                raise HarnessError(f"genesis storage for unknown contract {cname!r}")
            for var, value in overrides.items():
                decl = contract.state_var(var)
                if decl is None:
                    raise HarnessError(f"genesis storage for unknown variable {cname}.{var}")
                if decl.type == A.MAP:
                    value = {int(k): int(x) for k, x in dict(value).items()}
                st[cname][var] = value
        bal = {a: 0 for a in ADDRESS_POOL}
        for who, amount in (balances or {}).items():
            bal[self._address_of(who)] = int(amount)
        return VmState(st, bal, 0)

    def _address_of(self, who) -> int:
        if isinstance(who, str) and who in self.contract_address:
            return self.contract_address[who]
        return int(who)

    # -- execution --

    def execute(self, genesis: VmState, t: TestCase) -> ExecResult:
        state = genesis.copy()
        ex = _Exec(state, self.step_cap)
        reverted = []
        functions = []
        total = 0
        for i, call in enumerate(t.calls):
            fn = self.functions.get(call.key)
            if fn is None or not fn.decl.is_public:
                raise HarnessError(f"no public function {call.key}")
            if len(call.args) != len(fn.param_names):
                raise HarnessError(f"{call.key} takes {len(fn.param_names)} arguments")
            functions.append(call.key)
            ex.call_index = i
            ex.steps = 0
            ex.depth = 0
            ex.journal.clear()
            this = self.contract_address[fn.decl.contract]
            ok = True
            try:
                _tick(ex)
                if call.value:
                    bal = state.balances
                    if bal.get(call.sender, 0) < call.value:
                        raise Revert()
                    _write(ex, bal, call.sender, bal[call.sender] - call.value)
                    _write(ex, bal, this, bal.get(this, 0) + call.value)
                fn.invoke(ex, call.args, call.sender, call.value, TX_SOURCE, this)
            except Revert:
                ok = False
            except _Timeout:
                ok = False
                ex.events.append(OracleEvent(
                    "Timeout", call.key, Location(call.key, fn.decl.pos.line, fn.decl.pos.col), i))
            if not ok:
                _rollback(ex, 0)
            reverted.append(not ok)
            total += ex.steps
        state.steps = genesis.steps + total
        hits = ex.hits
        return ExecResult(
            edges=hits,
            blocks=frozenset(dst for _, dst in hits),
            functions=tuple(functions),
            events=ex.events,
            reverted=tuple(reverted),
            steps=total,
            state=state,
        )

    # -- compilation --

    def _compile_function(self, f: A.FunctionDecl, known_sites: set):
        fn = self.functions[f.key]
        cfg = self.cfgs[f.key]
        ctx = _FnCtx(self, f, fn.base, cfg, known_sites)
        fn.body = ctx.block(f.body)


class _FnCtx:
    def __init__(self, vm: MiniVM, f: A.FunctionDecl, base: int, cfg, known_sites: set):
        self.vm = vm
        self.f = f
        self.base = base
        self.cfg = cfg
        self.counter = 0  # pre-order statement index, mirrors the CFG builder
        self.asserts = 0
        self.known_sites = known_sites

    def block(self, body) -> tuple:
        return tuple(self.stmt(s) for s in body)

    def loc(self, node) -> Location:
        return Location(self.f.key, node.pos.line, node.pos.col)

    def stmt(self, s):
        idx = self.counter
        self.counter += 1
        if isinstance(s, A.If):
            then_l, else_l, join_l = self.cfg.branches[idx]
            then_b, else_b, join_b = (self.base + then_l, self.base + else_l, self.base + join_l)
            cond = self.expr(s.cond)
            then_body = self.block(s.then)
            else_body = self.block(s.orelse or [])

            def run_if(fr):
                ex = fr.ex
                _tick(ex)
                if cond(fr):
                    _edge(ex, fr.cur, then_b)
                    fr.cur = then_b
                    for st in then_body:
                        st(fr)
                else:
                    _edge(ex, fr.cur, else_b)
                    fr.cur = else_b
                    for st in else_body:
                        st(fr)
                _edge(ex, fr.cur, join_b)
                fr.cur = join_b
            return run_if

        if isinstance(s, (A.Require, A.Assert)):
            fall_l, abort_l = self.cfg.branches[idx]
            fall_b, abort_b = self.base + fall_l, self.base + abort_l
            cond = self.expr(s.cond)
            event = None
            if isinstance(s, A.Assert):
                site = f"{self.f.key}#{self.asserts}"
                self.asserts += 1
                self.known_sites.add(site)
                inv = self.vm.invariants.get(site)
                kind, ident = ("InvariantViolation", inv) if inv else ("AssertViolation", site)
                event = (kind, ident, self.loc(s))

            def run_guard(fr):
                ex = fr.ex
                _tick(ex)
                if cond(fr):
                    _edge(ex, fr.cur, fall_b)
                    fr.cur = fall_b
                    return
                _edge(ex, fr.cur, abort_b)
                fr.cur = abort_b
                if event is not None:
                    ex.events.append(OracleEvent(event[0], event[1], event[2], ex.call_index))
                raise Revert()
            return run_guard

        if isinstance(s, A.Bug):
            ident = str(s.id)
            where = self.loc(s)

            def run_bug(fr):
                ex = fr.ex
                _tick(ex)
                ex.events.append(OracleEvent("BugHit", ident, where, ex.call_index))
            return run_bug

        if isinstance(s, A.VarDecl):
            name = s.name
            value = self.expr(s.value)

            def run_decl(fr):
                _tick(fr.ex)
                fr.locals[name] = value(fr)
            return run_decl

        if isinstance(s, A.Assign):
            return self.assign(s)

        if isinstance(s, A.CallStmt):
            return self.call(s)

        raise TypeError(s)  # pragma: no cover

    def assign(self, s: A.Assign):
        value = self.expr(s.value)
        op = s.op
        t = s.target

        def combine(old, new):
            if op == "=":
                return new
            if op == "+=":
                r = old + new
                if r > MAX_UINT:
                    raise Revert()
                return r
            if old < new:
                raise Revert()
            return old - new

        if isinstance(t, A.Index):
            var = t.base.ident
            key = self.expr(t.key)

            def run_store(fr):
                _tick(fr.ex)
                m = fr.st[var]
                k = key(fr)
                _write(fr.ex, m, k, combine(m.get(k, 0), value(fr)))
            return run_store

        var = t.ident
        if t.kind == "state":
            def run_state(fr):
                _tick(fr.ex)
                st = fr.st
                _write(fr.ex, st, var, combine(st[var], value(fr)))
            return run_state

        def run_local(fr):
            _tick(fr.ex)
            loc = fr.locals
            loc[var] = combine(loc[var], value(fr))
        return run_local

    def call(self, s: A.CallStmt):
        external = s.contract is not None
        cname = s.contract or self.f.contract
        target_key = self.vm.unit.contract(cname).function(s.function).key
        vm = self.vm
        args = tuple(self.expr(a) for a in s.args)
        callee_addr = vm.contract_address[cname]

        def run_call(fr):
            ex = fr.ex
            _tick(ex)
            target = vm.functions[target_key]
            values = tuple(a(fr) for a in args)
            if external:
                target.invoke(ex, values, fr.this, 0, fr.cur, callee_addr)
            else:
                target.invoke(ex, values, fr.sender, fr.value, fr.cur, fr.this)
        return run_call

    def expr(self, e):
        if isinstance(e, (A.IntLit, A.BoolLit, A.AddrLit)):
            v = e.value
            return lambda fr: v
        if isinstance(e, A.MsgField):
            if e.attr == "sender":
                return lambda fr: fr.sender
            return lambda fr: fr.value
        if isinstance(e, A.Name):
            name = e.ident
            if e.kind == "state":
                return lambda fr: fr.st[name]
            return lambda fr: fr.locals[name]
        if isinstance(e, A.Index):
            var = e.base.ident
            key = self.expr(e.key)
            return lambda fr: fr.st[var].get(key(fr), 0)
        if isinstance(e, A.Unary):
            inner = self.expr(e.operand)
            return lambda fr: not inner(fr)
        if isinstance(e, A.Binary):
            return self.binary(e)
        raise TypeError(e)  # pragma: no cover

    def binary(self, e: A.Binary):
        l = self.expr(e.left)
        r = self.expr(e.right)
        op = e.op
        if op == "&&":
            return lambda fr: l(fr) and r(fr)
        if op == "||":
            return lambda fr: l(fr) or r(fr)
        if op == "==":
            return lambda fr: l(fr) == r(fr)
        if op == "!=":
            return lambda fr: l(fr) != r(fr)
        if op == "<":
            return lambda fr: l(fr) < r(fr)
        if op == "<=":
            return lambda fr: l(fr) <= r(fr)
        if op == ">":
            return lambda fr: l(fr) > r(fr)
        if op == ">=":
            return lambda fr: l(fr) >= r(fr)
        if op == "+":
            def add(fr):
                v = l(fr) + r(fr)
                if v > MAX_UINT:
                    raise Revert()
                return v
            return add
        if op == "-":
            def sub(fr):
                a, b = l(fr), r(fr)
                if a < b:
                    raise Revert()
                return a - b
            return sub
        if op == "*":
            def mul(fr):
                v = l(fr) * r(fr)
                if v > MAX_UINT:
                    raise Revert()
                return v
            return mul
        if op in ("/", "%"):
            def div(fr):
                a, b = l(fr), r(fr)
                if b == 0:
                    raise Revert()
                return a // b if op == "/" else a % b
            return div
        raise TypeError(op)  # pragma: no cover
