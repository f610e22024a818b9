import json
import math
import random
from collections import Counter
from pathlib import Path

import pytest

from guidefuzz.bench import AblationRun, baseline_ratio, format_table, summarize, time_to_bug
from guidefuzz.engine import (
    OPERATOR_WEIGHTS,
    OPERATORS,
    UINT_DICTIONARY,
    Campaign,
    Mutator,
    seed_corpus,
)
from guidefuzz.minisol import parse, parse_file
from guidefuzz.producers import MetricsBundle
from guidefuzz.scheduler import EnergyParams
from guidefuzz.vm import Call, MiniVM, TestCase

HERE = Path(__file__).parent
PLANTED = HERE / "fixtures" / "planted.msol"


def planted_unit():
    return parse_file(PLANTED)


def campaign(unit=None, **kw):
    kw.setdefault("max_executions", 3000)
    return Campaign(unit or planted_unit(), **kw)


# -- mutation --

def test_operator_frequencies():
    vm = MiniVM(planted_unit())
    mut = Mutator(vm, random.Random(4))
    t = TestCase(tuple(Call("Planted", "set(uint)", (5,)) for _ in range(4)))
    n = 40_000
    counts = Counter(mut.mutate_with_op(t)[0] for _ in range(n))
    for op, w in zip(OPERATORS, OPERATOR_WEIGHTS):
        assert abs(counts[op] / n - w) < 0.02, (op, counts[op] / n)


def test_operators_respect_length_bounds():
    vm = MiniVM(planted_unit())
    mut = Mutator(vm, random.Random(9))
    one = TestCase((Call("Planted", "trigger()", ()),))
    assert all(len(mut.mutate(one)) >= 1 for _ in range(500))
    full = TestCase(tuple(Call("Planted", "trigger()", ()) for _ in range(32)))
    assert all(len(mut.mutate(full)) <= 32 for _ in range(500))


def test_operator_effects():
    vm = MiniVM(planted_unit())
    rng = random.Random(2)
    mut = Mutator(vm, rng)
    t = TestCase((Call("Planted", "set(uint)", (500,)), Call("Planted", "noise(uint,uint)", (3, 4))))
    for _ in range(2000):
        op, m = mut.mutate_with_op(t)
        if op == "insert":
            assert len(m) == 3
        elif op == "remove":
            assert len(m) == 1 and m.calls[0] in t.calls
        elif op == "replace":
            assert len(m) == 2 and sum(a != b for a, b in zip(m.calls, t.calls)) <= 1
        else:
            diff = [(a, b) for a, b in zip(m.calls, t.calls) if a != b]
            assert len(diff) <= 1
            for new, old in diff:
                assert new.key == old.key
                changed = [x != y for x, y in zip(new.args, old.args)]
                changed += [new.sender != old.sender, new.value != old.value]
                assert sum(changed) == 1


def test_uint_values_come_from_dictionary_or_delta():
    vm = MiniVM(planted_unit())
    mut = Mutator(vm, random.Random(3))
    for _ in range(2000):
        v = mut.uint(500)
        assert v in UINT_DICTIONARY or 1 <= abs(v - 500) <= 16
    assert {mut.uint() for _ in range(500)} == set(UINT_DICTIONARY)


def test_guided_insertion_extends_longest_prefix():
    vm = MiniVM(planted_unit())
    chain = ("Planted.set(uint)", "Planted.arm(uint)", "Planted.trigger()")
    mut = Mutator(vm, random.Random(6), [(chain, 90)])
    t = TestCase((Call("Planted", "noise(uint,uint)", (0, 0)), Call("Planted", "set(uint)", (1,))))
    extended = 0
    inserts = 0
    for _ in range(4000):
        op, m = mut.mutate_with_op(t)
        if op != "insert":
            continue
        inserts += 1
        keys = m.keys
        if "Planted.arm(uint)" in keys and keys.index("Planted.arm(uint)") > keys.index("Planted.set(uint)"):
            extended += 1
    # half the inserts are guided; unguided ones pick arm 1/5 of the time, after set ~1/3
    rate = extended / inserts
    assert 0.5 < rate < 0.6


def test_unguided_insertion_without_seq_producer():
    unit = planted_unit()
    keys = [f.key for f in unit.public_functions()]
    bundle = MetricsBundle({k: 50 for k in keys}, {k: 50 for k in keys}, {},
                           [((keys[0], keys[1]), 80)], {})
    c = campaign(unit, bundle=bundle, params=EnergyParams(producers=("complexity", "vuln")))
    assert c.mutator.suggestions == []
    c = campaign(unit, bundle=bundle)
    assert c.mutator.suggestions == [((keys[0], keys[1]), 80)]


# -- campaigns --

def test_seed_corpus_one_call_per_public_function():
    vm = MiniVM(planted_unit())
    seeds = seed_corpus(vm)
    assert [s.calls[0].key for s in seeds] == [f.key for f in vm.unit.public_functions()]
    assert seeds[4].calls[0].args == (0, 0)


def test_finds_planted_bug_and_nothing_else():
    c = campaign(max_executions=200_000, stop_on_first_bug=True, seed=1)
    report = c.run()
    assert report.stop_reason == "bug"
    assert [d.oracle for d in report.detections] == ["BugHit:1"]
    d = report.detections[0]
    assert d.executions == report.executions
    keys = [call["function"] for call in d.test_case]
    i = keys.index("trigger()")
    assert "arm(uint)" in keys[:i]
    assert time_to_bug(report, "BugHit:1")[0] == d.executions
    assert time_to_bug(report, "BugHit:9") is None


def test_zero_budget():
    report = campaign(max_executions=0).run()
    assert report.executions == 0
    assert report.detections == []
    assert report.corpus_size == 5
    assert report.coverage == [{"elapsed_ms": 0.0, "executions": 0, "instructions": 0,
                                "blocks": 0, "edges": 0}]


def test_small_budget_is_exact():
    for n in (1, 3, 5, 6, 77):
        assert campaign(max_executions=n).run().executions == n


def test_needs_some_budget():
    with pytest.raises(ValueError):
        Campaign(planted_unit())


def test_same_seed_same_report_different_seed_differs():
    a = campaign(seed=5).run().to_json()
    b = campaign(seed=5).run().to_json()
    c = campaign(seed=6).run().to_json()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert a != c


def test_baseline_ignores_bundle_contents():
    unit = planted_unit()
    keys = [f.key for f in unit.public_functions()]
    rich = MetricsBundle({k: 99 for k in keys}, {k: 7 for k in keys}, {},
                         [((keys[1], keys[2]), 100)], {"source": "x"})
    params = EnergyParams(producers=())
    a = campaign(unit, bundle=rich, params=params, seed=3).run()
    b = campaign(unit, bundle=MetricsBundle.zeros(keys), params=params, seed=3).run()
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())


def test_guided_run_differs_from_baseline():
    unit = planted_unit()
    keys = [f.key for f in unit.public_functions()]
    rich = MetricsBundle({k: 99 if "arm" in k else 1 for k in keys}, {k: 50 for k in keys}, {},
                         [((keys[0], keys[1], keys[2]), 100)], {})
    a = campaign(unit, bundle=rich, seed=3).run()
    b = campaign(unit, bundle=rich, params=EnergyParams(producers=()), seed=3).run()
    assert a.config["active_producers"] == ["complexity", "vuln", "seq"]
    assert b.config["active_producers"] == []
    assert a.to_json() != b.to_json()


def test_coverage_rows_monotone():
    report = campaign(max_executions=20_000, seed=2).run()
    rows = report.coverage
    assert rows[0]["executions"] == 0
    for prev, cur in zip(rows, rows[1:]):
        for col in ("elapsed_ms", "executions", "instructions", "blocks", "edges"):
            assert cur[col] >= prev[col]
    assert rows[-1]["executions"] == report.executions


def test_time_budget_stops():
    report = campaign(max_executions=None, time_budget=0.2, seed=1).run()
    assert report.stop_reason == "time"
    assert report.executions > 0


def test_invariant_violation_detected():
    unit = parse("""contract Inv { uint a; uint b;
        function up(uint v) public { a += v; }
        function check() public { assert(a < 5); } }""")
    from guidefuzz.producers import Invariant
    c = Campaign(unit, invariants=[Invariant("I1", "a stays small", "Inv.check()#0")],
                 max_executions=5000, seed=1, stop_on_first_bug=True)
    report = c.run()
    assert report.detections[0].oracle == "InvariantViolation:I1"
    assert report.config["invariants"] == [{"id": "I1", "text": "a stays small", "site": "Inv.check()#0"}]


# -- ablation summaries --

def _run(mode, seed, ex, total=100):
    return AblationRun("b", mode, seed, not math.isinf(ex), ex, 0.0, 0.0, total)


def test_summarize_ratio():
    runs = [_run("baseline", s, x) for s, x in enumerate([100, 200, 300])]
    runs += [_run("full", s, x) for s, x in enumerate([40, 50, math.inf])]
    rows = {r["mode"]: r for r in summarize(runs)}
    assert rows["baseline"]["median_executions"] == 200
    assert rows["full"]["ratio_to_baseline"] == 0.25
    assert rows["full"]["found"] == 2
    assert "| b | 200 | 50 (0.25x) |" in format_table(list(rows.values()), ("baseline", "full"))


def test_censored_baseline_gives_upper_bound():
    base = [_run("baseline", 0, 100, 100), _run("baseline", 1, math.inf, 900),
            _run("baseline", 2, math.inf, 800)]
    assert baseline_ratio(200, base) == (0.25, True)
    assert math.isnan(baseline_ratio(math.inf, base)[0])
    assert baseline_ratio(50, base[:1]) == (0.5, False)
