import itertools
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guidefuzz.minisol import parse, parse_file
from guidefuzz.vm import (
    ADDRESS_POOL,
    Call,
    CoverageMap,
    HarnessError,
    MiniVM,
    TestCase,
    bucket,
)

HERE = Path(__file__).parent
PLANTED = HERE / "fixtures" / "planted.msol"
BENCH = sorted((HERE.parent / "bench").glob("*.msol"))
MAX = 2**256 - 1


def tc(*calls):
    return TestCase(tuple(calls))


def call(contract, fn, *args, sender=1, value=0):
    return Call(contract, fn, tuple(args), sender, value)


# -- exhaustive check against a reference model --

class PlantedModel:
    """Hand-written semantics of tests/fixtures/planted.msol."""

    def __init__(self):
        self.stage, self.level, self.armed = 0, 0, False

    def apply(self, name, args):
        """Returns (reverted, bug_hit)."""
        if name == "set":
            self.stage, self.level = 1, args[0]
        elif name == "arm":
            if self.stage != 1:
                return True, False
            if args[0] > 100:
                self.armed = True
        elif name == "trigger":
            return False, self.armed
        elif name == "reset":
            self.stage, self.armed = 0, False
        elif name == "noise":
            a, b = args
            if a > b:
                if self.level + 1 > MAX:
                    return True, False
                self.level += 1
            else:
                self.level = 0
        return False, False


PLANTED_CALLS = (
    [("set", "set(uint)", (v,)) for v in (0, 101, MAX)]
    + [("arm", "arm(uint)", (v,)) for v in (100, 101)]
    + [("trigger", "trigger()", ()), ("reset", "reset()", ())]
    + [("noise", "noise(uint,uint)", (a, b)) for a in (0, 1) for b in (0, 1)]
)


def test_exhaustive_three_call_sequences_match_model():
    vm = MiniVM(parse_file(PLANTED))
    genesis = vm.genesis()
    n = 0
    for length in (1, 2, 3):
        for seq in itertools.product(PLANTED_CALLS, repeat=length):
            model = PlantedModel()
            expected_reverts, expected_bugs = [], []
            for i, (name, _, args) in enumerate(seq):
                rev, hit = model.apply(name, args)
                expected_reverts.append(rev)
                if hit:
                    expected_bugs.append(i)
            r = vm.execute(genesis, tc(*(call("Planted", sig, *args) for _, sig, args in seq)))
            assert list(r.reverted) == expected_reverts, seq
            assert [e.call_index for e in r.events if e.kind == "BugHit"] == expected_bugs, seq
            assert r.state.storage["Planted"] == {
                "stage": model.stage, "level": model.level, "armed": model.armed}, seq
            n += 1
    assert n == 11 + 11**2 + 11**3


def test_bug_requires_ordered_chain():
    vm = MiniVM(parse_file(PLANTED))
    g = vm.genesis()
    hit = tc(call("Planted", "set(uint)", 0), call("Planted", "arm(uint)", 101), call("Planted", "trigger()"))
    assert [e.oracle for e in vm.execute(g, hit).events] == ["BugHit:1"]
    for perm in itertools.permutations(hit.calls):
        if perm != hit.calls:
            assert not vm.execute(g, tc(*perm)).events


# -- determinism and isolation --

def random_test(vm, rng, max_len=10):
    calls = []
    for _ in range(rng.randint(1, max_len)):
        fn = rng.choice(vm.public)
        args = []
        for t in fn.param_types:
            if t == "uint":
                args.append(rng.choice([0, 1, 2, 7, 100, 101, 150, 1000, 5001, 2**32, 2**64 - 1]))
            elif t == "address":
                args.append(rng.choice(ADDRESS_POOL))
            else:
                args.append(rng.random() < 0.5)
        calls.append(Call(fn.decl.contract, fn.decl.signature, tuple(args), rng.choice(ADDRESS_POOL)))
    return TestCase(tuple(calls))


@pytest.mark.parametrize("path", [PLANTED] + BENCH, ids=lambda p: p.stem)
def test_execution_is_deterministic(path):
    vm = MiniVM(parse_file(path))
    other = MiniVM(parse_file(path))
    rng = random.Random(path.stem)
    g = vm.genesis()
    for _ in range(200):
        t = random_test(vm, rng)
        a, b, c = vm.execute(g, t), vm.execute(g, t), other.execute(other.genesis(), t)
        assert a.fingerprint() == b.fingerprint() == c.fingerprint()
        assert a.state.same_contents(b.state)


@pytest.mark.parametrize("path", [PLANTED] + BENCH, ids=lambda p: p.stem)
def test_reverted_calls_leave_no_trace(path):
    vm = MiniVM(parse_file(path))
    rng = random.Random(17)
    g = vm.genesis()
    snapshot = g.copy()
    seen_revert = 0
    for _ in range(300):
        t = random_test(vm, rng)
        r = vm.execute(g, t)
        kept = [c for c, rev in zip(t.calls, r.reverted) if not rev]
        seen_revert += any(r.reverted)
        if kept:
            again = vm.execute(g, TestCase(tuple(kept)))
            assert not any(again.reverted)
            assert again.state.same_contents(r.state)
        # genesis is never touched
        assert g.same_contents(snapshot) and g.steps == snapshot.steps
    assert seen_revert > 20


def test_partial_writes_roll_back():
    vm = MiniVM(parse("""contract R { uint a; map(address=>uint) m;
        function f(uint x) public {
            a = x;
            m[msg.sender] += x;
            require(x < 10);
        } }"""))
    r = vm.execute(vm.genesis(), tc(call("R", "f(uint)", 3), call("R", "f(uint)", 50)))
    assert r.reverted == (False, True)
    assert r.state.storage["R"] == {"a": 3, "m": {1: 3}}


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 2**70), st.sampled_from(ADDRESS_POOL)),
                min_size=1, max_size=12))
def test_journal_matches_copy_semantics(ops):
    src = """contract J { uint a; uint b; map(address=>uint) m;
        function put(uint x) public { m[msg.sender] += x; a += x; }
        function take(uint x) public { m[msg.sender] -= x; b += x; }
        function both(uint x) public { a = x; m[msg.sender] = x; require(x % 2 == 0); }
        function touch(uint x) public { b = b + 1; assert(x != 5); } }"""
    vm = MiniVM(parse(src))
    names = ["put(uint)", "take(uint)", "both(uint)", "touch(uint)"]
    t = tc(*(call("J", names[i], x, sender=s) for i, x, s in ops))
    r = vm.execute(vm.genesis(), t)
    # replay each call alone on a copied state: the reference keeps or discards whole calls
    state = vm.genesis()
    for c, rev in zip(t.calls, r.reverted):
        step = vm.execute(state, tc(c))
        assert step.reverted == (rev,)
        state = step.state
    assert state.same_contents(r.state)


# -- runtime semantics --

def test_checked_arithmetic_reverts():
    vm = MiniVM(parse("""contract A { uint x;
        function sub(uint v) public { x = x - v; }
        function add(uint v) public { x = x + v; }
        function div(uint v) public { x = 10 / v; }
        function mod(uint v) public { x = 10 % v; }
        function mul(uint v) public { x = v * v; } }"""))
    g = vm.genesis()
    cases = [("sub(uint)", 1, True), ("add(uint)", MAX, False), ("div(uint)", 0, True),
             ("mod(uint)", 0, True), ("mul(uint)", 2**128, True), ("mul(uint)", 2**128 - 1, False)]
    for fn, v, reverts in cases:
        assert vm.execute(g, tc(call("A", fn, v))).reverted == (reverts,), fn
    r = vm.execute(g, tc(call("A", "add(uint)", MAX), call("A", "add(uint)", 1)))
    assert r.reverted == (False, True)
    assert r.state.storage["A"]["x"] == MAX


def test_assert_and_invariant_events():
    unit = parse_file(HERE / "fixtures" / "cfg" / "guards.msol")
    plain = MiniVM(unit)
    g = plain.genesis({"Guards": {"total": MAX - 5}})
    r = plain.execute(g, tc(call("Guards", "put(uint)", 5), call("Guards", "put(uint)", 6)))
    # the second put overflows total and reverts before reaching the assert
    assert r.reverted == (False, True) and not r.events
    bound = MiniVM(unit, {"Guards.put(uint)#0": "I-total"})
    assert bound.invariants == {"Guards.put(uint)#0": "I-total"}
    with pytest.raises(HarnessError):
        MiniVM(unit, {"Guards.put(uint)#3": "nope"})
    vm = MiniVM(parse("""contract S { uint x;
        function f(uint v) public { x = v; assert(v != 7); bug(2); } }"""), {"S.f(uint)#0": "I7"})
    r = vm.execute(vm.genesis(), tc(call("S", "f(uint)", 7), call("S", "f(uint)", 1)))
    assert [e.oracle for e in r.events] == ["InvariantViolation:I7", "BugHit:2"]
    assert r.events[0].location.line == 2 and r.events[0].call_index == 0
    assert r.state.storage["S"]["x"] == 1
    unbound = MiniVM(vm.unit)
    assert unbound.execute(unbound.genesis(), tc(call("S", "f(uint)", 7))).events[0].oracle == \
        "AssertViolation:S.f(uint)#0"


def test_bug_keeps_running_and_repeats():
    vm = MiniVM(parse("contract B { uint x; function f() public { bug(3); x += 1; bug(3); } }"))
    r = vm.execute(vm.genesis(), tc(call("B", "f()")))
    assert [e.oracle for e in r.events] == ["BugHit:3", "BugHit:3"]
    assert r.state.storage["B"]["x"] == 1


def test_msg_sender_across_calls():
    vm = MiniVM(parse("""
        contract Front { address seen;
            function go() public { seen = msg.sender; Back.hit(); helper(); }
            function helper() internal { require(msg.sender == seen); } }
        contract Back { address caller; uint v;
            function hit() public { caller = msg.sender; v = msg.value; } }"""))
    r = vm.execute(vm.genesis(balances={3: 50}), tc(call("Front", "go()", sender=3, value=20)))
    assert r.reverted == (False,)
    assert r.state.storage["Front"]["seen"] == 3
    assert r.state.storage["Back"] == {"caller": 0x1000, "v": 0}
    assert r.state.balances[3] == 30 and r.state.balances[0x1000] == 20


def test_value_needs_balance():
    vm = MiniVM(parse("contract P { uint v; function pay() public { v = msg.value; } }"))
    r = vm.execute(vm.genesis(), tc(call("P", "pay()", value=1)))
    assert r.reverted == (True,)


def test_call_depth_limit():
    vm = MiniVM(parse("""contract D { uint n;
        function down(uint k) public { n += 1; if (k > 0) { down(k - 1); } } }"""))
    g = vm.genesis()
    assert vm.execute(g, tc(call("D", "down(uint)", 10))).state.storage["D"]["n"] == 11
    r = vm.execute(g, tc(call("D", "down(uint)", 500)))
    assert r.reverted == (True,) and r.state.storage["D"]["n"] == 0


def test_step_cap_timeout():
    vm = MiniVM(parse("""contract T { uint n;
        function down(uint k) public { n += 1; if (k > 0) { down(k - 1); } } }"""), step_cap=50)
    r = vm.execute(vm.genesis(), tc(call("T", "down(uint)", 40)))
    assert r.reverted == (True,)
    assert [e.kind for e in r.events] == ["Timeout"]


def test_harness_errors():
    vm = MiniVM(parse_file(PLANTED))
    with pytest.raises(HarnessError):
        vm.execute(vm.genesis(), tc(call("Planted", "nope()")))
    with pytest.raises(HarnessError):
        vm.execute(vm.genesis(), tc(call("Planted", "set(uint)")))
    with pytest.raises(HarnessError):
        vm.genesis({"Planted": {"ghost": 1}})
    with pytest.raises(ValueError):
        TestCase(())


# -- coverage --

def test_edges_use_global_ids_and_tx_source():
    unit = parse_file(HERE / "fixtures" / "cfg" / "six.msol")
    vm = MiniVM(unit)
    ids = vm.function_blocks["Six.step(uint)"]
    r = vm.execute(vm.genesis(), tc(call("Six", "step(uint)", 6)))
    e, then, join, fall = ids[0], ids[1], ids[3], ids[4]
    assert r.edges == {(-1, e): 1, (e, then): 1, (then, join): 1, (join, fall): 1}
    assert r.blocks == {e, then, join, fall}
    r = vm.execute(vm.genesis(), tc(*[call("Six", "step(uint)", 6)] * 4))
    assert r.reverted == (False, False, True, True)  # level reaches 3 on the third call
    assert r.edges[(join, ids[5])] == 2 and r.edges[(-1, e)] == 4
    assert vm.block_names[ids[2]] == "Six.step(uint)#2"


@pytest.mark.parametrize("count,expected", [
    (1, 0), (2, 1), (3, 2), (4, 3), (7, 3), (8, 4), (15, 4), (16, 5), (31, 5), (32, 6), (127, 6),
    (128, 7), (10**9, 7),
])
def test_buckets(count, expected):
    assert bucket(count) == expected


def test_bucket_transition_is_interesting():
    cov = CoverageMap()
    assert cov.update({(1, 2): 3})
    assert not cov.update({(1, 2): 3})
    assert cov.update({(1, 2): 4})  # 3 -> 4 crosses into the 4-7 bucket
    assert not cov.update({(1, 2): 5})
    assert cov.update({(1, 2): 1})  # a lower bucket not seen before is new too
    assert len(cov) == 1
    with pytest.raises(ValueError):
        bucket(0)


def test_coverage_map_merge_and_monotone():
    a, b = CoverageMap(), CoverageMap()
    a.update({(0, 1): 1})
    b.update({(0, 1): 9, (1, 2): 1})
    before = dict(a.seen)
    assert a.merge(b)
    assert all(a.seen[k] & v == v for k, v in before.items())
    assert not a.merge(b)
    assert a.blocks() == {1, 2}
