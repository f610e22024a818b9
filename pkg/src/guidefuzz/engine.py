"""Feedback-driven campaign loop over call sequences.

select -> for energy(t) iterations: mutate, execute, keep if the edge map
says the mutant is interesting.  Time in reports is a virtual clock derived
from VM steps so that fixture-mode runs are byte-reproducible; wall-clock
figures are kept separately for the run manifest.
"""
from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field

from .minisol import ast as A
from .minisol.parser import parse_files
from .producers.client import ChatClient
from .producers.fetch import fetch_metrics, load_metrics
from .producers.metrics import MetricsBundle
from .scheduler import Corpus, EnergyModel, EnergyParams
from .vm import ADDRESS_POOL, MAX_ARG, MAX_CALLS, Call, CoverageMap, MiniVM, TestCase

log = logging.getLogger(__name__)

OPERATORS = ("insert", "remove", "replace", "mutate_args")
OPERATOR_WEIGHTS = (0.3, 0.2, 0.2, 0.3)
UINT_DICTIONARY = (0, 1, 2, 100, 2**32, 2**64 - 1)
MAX_DELTA = 16
SEQ_GUIDE_PROB = 0.5
STEPS_PER_MS = 1000  # virtual clock rate
BUG_KINDS = ("BugHit", "AssertViolation", "InvariantViolation")


def default_arg(typ: str):
    if typ == A.UINT:
        return 0
    if typ == A.ADDRESS:
        return ADDRESS_POOL[0]
    return False


def seed_corpus(vm: MiniVM) -> list:
    """One single-call test case per public function, default arguments."""
    if not vm.public:
        raise ValueError("source unit has no public functions")
    return [
        TestCase((Call(fn.decl.contract, fn.decl.signature,
                       tuple(default_arg(t) for t in fn.param_types)),))
        for fn in vm.public
    ]


class Mutator:
    """Sequence-level mutation operators.

    ``suggestions`` (scored call chains) switch on guided insertion: half of
    the inserts then extend the longest matched prefix of a suggested chain.
    """

    def __init__(self, vm: MiniVM, rng: random.Random, suggestions=None):
        self.vm = vm
        self.rng = rng
        self.public = vm.public
        self.by_key = {fn.key: fn for fn in vm.public}
        self.suggestions = [(tuple(s), w) for s, w in (suggestions or []) if len(s) >= 1]
        self.suggestion_weights = [max(w, 0) for _, w in self.suggestions]
        if not any(self.suggestion_weights):
            self.suggestion_weights = [1] * len(self.suggestions)

    # -- values --

    def uint(self, current=None) -> int:
        rng = self.rng
        if current is not None and rng.random() < 0.5:
            delta = rng.randint(1, MAX_DELTA)
            v = current + delta if rng.random() < 0.5 else current - delta
            return min(max(v, 0), MAX_ARG)
        return rng.choice(UINT_DICTIONARY)

    def arg(self, typ: str, current=None):
        if typ == A.UINT:
            return self.uint(current)
        if typ == A.ADDRESS:
            return self.rng.choice(ADDRESS_POOL)
        return self.rng.random() < 0.5

    def random_call(self, fn=None) -> Call:
        fn = fn or self.rng.choice(self.public)
        args = tuple(self.arg(t) for t in fn.param_types)
        return Call(fn.decl.contract, fn.decl.signature, args, self.rng.choice(ADDRESS_POOL), 0)

    # -- operators --

    def mutate(self, t: TestCase) -> TestCase:
        return self.mutate_with_op(t)[1]

    def mutate_with_op(self, t: TestCase):
        rng = self.rng
        calls = list(t.calls)
        while True:
            op = rng.choices(OPERATORS, OPERATOR_WEIGHTS)[0]
            if op == "remove" and len(calls) <= 1:
                continue
            if op == "insert" and len(calls) >= MAX_CALLS:
                continue
            break
        if op == "insert":
            self._insert(calls)
        elif op == "remove":
            del calls[rng.randrange(len(calls))]
        elif op == "replace":
            i = rng.randrange(len(calls))
            calls[i] = self.random_call()
        else:
            self._mutate_call(calls)
        return op, TestCase(tuple(calls))

    def _insert(self, calls: list):
        rng = self.rng
        if self.suggestions and rng.random() < SEQ_GUIDE_PROB:
            seq, _ = rng.choices(self.suggestions, self.suggestion_weights)[0]
            matched, last = 0, -1
            for i, c in enumerate(calls):
                if matched < len(seq) and c.key == seq[matched]:
                    matched += 1
                    last = i
            if matched < len(seq) and seq[matched] in self.by_key:
                pos = rng.randint(last + 1, len(calls))
                calls.insert(pos, self.random_call(self.by_key[seq[matched]]))
                return
        calls.insert(rng.randint(0, len(calls)), self.random_call())

    def _mutate_call(self, calls: list):
        rng = self.rng
        i = rng.randrange(len(calls))
        c = calls[i]
        fn = self.by_key[c.key]
        field_idx = rng.randrange(len(c.args) + 2)
        if field_idx < len(c.args):
            args = list(c.args)
            args[field_idx] = self.arg(fn.param_types[field_idx], args[field_idx])
            calls[i] = Call(c.contract, c.function, tuple(args), c.sender, c.value)
        elif field_idx == len(c.args):
            calls[i] = Call(c.contract, c.function, c.args, rng.choice(ADDRESS_POOL), c.value)
        else:
            calls[i] = Call(c.contract, c.function, c.args, c.sender, self.uint(c.value))


@dataclass
class Detection:
    oracle: str
    kind: str
    ident: str
    location: dict
    executions: int
    elapsed_ms: float
    test_case: list
    wall_s: float = field(default=0.0, compare=False)

    def to_json(self) -> dict:
        return {
            "oracle": self.oracle, "kind": self.kind, "ident": self.ident,
            "location": self.location, "executions": self.executions,
            "elapsed_ms": self.elapsed_ms, "test_case": self.test_case,
        }


@dataclass
class CampaignReport:
    config: dict
    executions: int = 0
    elapsed_ms: float = 0.0
    corpus_size: int = 0
    coverage: list = field(default_factory=list)  # rows: elapsed_ms, executions, ...
    detections: list = field(default_factory=list)
    stop_reason: str = "budget"
    wall_s: float = field(default=0.0, compare=False)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "executions": self.executions,
            "elapsed_ms": self.elapsed_ms,
            "corpus_size": self.corpus_size,
            "stop_reason": self.stop_reason,
            "coverage": self.coverage,
            "detections": [d.to_json() for d in self.detections],
        }

    def first(self, oracle: str):
        for d in self.detections:
            if d.oracle == oracle:
                return d
        return None

    @property
    def found_bug(self) -> bool:
        return any(d.kind in BUG_KINDS for d in self.detections)


class Campaign:
    def __init__(self, unit, bundle: MetricsBundle = None, params: EnergyParams = None,
                 seed: int = 0, genesis: dict = None, invariants=(),
                 max_executions: int = None, time_budget: float = None,
                 stop_on_first_bug: bool = False):
        if max_executions is None and time_budget is None:
            raise ValueError("campaign needs an execution or time budget")
        self.unit = unit
        self.params = params or EnergyParams()
        self.seed = seed
        self.max_executions = max_executions
        self.time_budget = time_budget
        self.stop_on_first_bug = stop_on_first_bug
        self.invariants = list(invariants)
        self.vm = MiniVM(unit, {inv.site: inv.id for inv in self.invariants if inv.site})
        genesis = genesis or {}
        self.genesis = self.vm.genesis(genesis.get("storage"), genesis.get("balances"))
        keys = [f.key for f in unit.public_functions()]
        self.bundle = bundle or MetricsBundle.zeros(keys, [i.id for i in self.invariants])
        self.model = EnergyModel(self.vm, self.bundle, self.params)
        self.rng = random.Random(seed)
        self.mutator = Mutator(
            self.vm, self.rng,
            self.bundle.sequences if "seq" in self.model.active else None,
        )
        self.corpus = Corpus(self.params, self.model)
        self.coverage = CoverageMap()
        self.executions = 0
        self.steps = 0
        self.detections: dict = {}
        self._covered_blocks: set = set()
        self._instructions = 0
        self._block_sizes = [0] * len(self.vm.block_names)
        for key, cfg in self.vm.cfgs.items():
            base = self.vm.function_blocks[key][0]
            for b in cfg.blocks:
                self._block_sizes[base + b.id] = len(b.stmts)
        self._rows: list = []
        self._start = 0.0
        self._stop = None

    # -- bookkeeping --

    @property
    def elapsed_ms(self) -> float:
        return round(self.steps / STEPS_PER_MS, 3)

    def _row(self):
        row = {
            "elapsed_ms": self.elapsed_ms,
            "executions": self.executions,
            "instructions": self._instructions,
            "blocks": len(self._covered_blocks),
            "edges": len(self.coverage),
        }
        if not self._rows or any(row[k] != self._rows[-1][k] for k in ("instructions", "blocks", "edges")):
            self._rows.append(row)

    def _exhausted(self) -> bool:
        if self._stop:
            return True
        if self.max_executions is not None and self.executions >= self.max_executions:
            self._stop = "budget"
            return True
        if self.time_budget is not None and self.executions % 64 == 0:
            if time.monotonic() - self._start >= self.time_budget:
                self._stop = "time"
                return True
        return False

    def _execute(self, test: TestCase):
        r = self.vm.execute(self.genesis, test)
        self.executions += 1
        self.steps += r.steps
        ks = self.corpus.observe(r)
        for ev in r.events:
            if ev.oracle not in self.detections:
                self.detections[ev.oracle] = Detection(
                    ev.oracle, ev.kind, ev.ident, ev.location.to_json(),
                    self.executions, self.elapsed_ms, test.to_json(),
                    time.monotonic() - self._start,
                )
                if self.stop_on_first_bug and ev.kind in BUG_KINDS:
                    self._stop = "bug"
        return r, ks

    def _admit(self, test: TestCase, r, ks, seed: bool = False):
        interesting = self.coverage.update(r.edges)
        if not (interesting or seed):
            return None
        entry = self.corpus.add(test)
        if entry is None:
            return None
        self.corpus.set_footprint(entry, r, ks)
        new_blocks = r.blocks - self._covered_blocks
        if new_blocks:
            self._covered_blocks |= new_blocks
            self._instructions += sum(self._block_sizes[b] for b in new_blocks)
        self._row()
        return entry

    # -- main loop --

    def run(self) -> CampaignReport:
        self._start = time.monotonic()
        self._row()
        seeds = seed_corpus(self.vm)
        pending = []
        for t in seeds:
            if self._exhausted():
                pending.append(t)
                continue
            r, ks = self._execute(t)
            self._admit(t, r, ks, seed=True)
        for t in pending:
            self.corpus.add(t)
        while not self._exhausted():
            entry = self.corpus.select()
            if not entry.executed:
                break
            energy = self.corpus.energy(entry)
            for _ in range(energy):
                if self._exhausted():
                    break
                mutant = self.mutator.mutate(entry.test)
                r, ks = self._execute(mutant)
                self._admit(mutant, r, ks)
        self._row_final()
        return CampaignReport(
            config=self.config_echo(),
            executions=self.executions,
            elapsed_ms=self.elapsed_ms,
            corpus_size=len(self.corpus),
            coverage=self._rows,
            detections=sorted(self.detections.values(), key=lambda d: (d.executions, d.oracle)),
            stop_reason=self._stop or "budget",
            wall_s=time.monotonic() - self._start,
        )

    def _row_final(self):
        last = self._rows[-1]
        if last["executions"] != self.executions:
            self._rows.append({**last, "elapsed_ms": self.elapsed_ms, "executions": self.executions})

    def config_echo(self) -> dict:
        return {
            "seed": self.seed,
            "max_executions": self.max_executions,
            "time_budget": self.time_budget,
            "stop_on_first_bug": self.stop_on_first_bug,
            "energy": self.params.to_json(),
            "active_producers": list(self.model.active),
            "invariants": [{"id": i.id, "text": i.text, "site": i.site} for i in self.invariants],
        }


def resolve_metrics(config, unit, client=None) -> MetricsBundle:
    """Fixture if configured, else a live fetch, else all-zero metrics."""
    ids = [i.id for i in config.invariants]
    if config.metrics_fixture:
        return load_metrics(config.metrics_fixture, unit, ids)
    if config.provider is not None and config.energy.producers:
        bundle, _ = fetch_metrics(unit, client or ChatClient(config.provider), config.invariants)
        return bundle
    return MetricsBundle.zeros([f.key for f in unit.public_functions()], ids)


def run_campaign(config, bundle: MetricsBundle = None, unit=None) -> CampaignReport:
    """Parse, resolve metrics and run one campaign described by a CampaignConfig."""
    unit = unit or parse_files(config.sources)
    if bundle is None:
        bundle = resolve_metrics(config, unit)
    return Campaign(
        unit, bundle, config.energy, seed=config.seed, genesis=config.genesis,
        invariants=config.invariants, max_executions=config.max_executions,
        time_budget=config.time_budget, stop_on_first_bug=config.stop_on_first_bug,
    ).run()
