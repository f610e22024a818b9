"""Energy assignment and corpus selection.

Per-test-case energies combine a rarity-based base energy with four
metric-driven terms:

* complexity / invariant: mean over covered blocks of the summed scores of
  each block's CFG neighbours;
* vuln: summed block scores of every called function, once per call;
* seq: summed scores of suggested call chains occurring as (not necessarily
  contiguous) subsequences of the test case.

Block scores are exponentially stretched (``A**score + B``) before use, and
each term is divided by a running median so that the per-term multipliers
stay near 1 for a typical test case.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from statistics import median

from .minisol.cfg import neighbors
from .producers.metrics import blockify

PRODUCERS = ("complexity", "vuln", "seq", "invariant")


@dataclass
class EnergyParams:
    A: float = 1.15
    B: float = 1200.0
    cap: float = 32.0
    base_energy: int = 32
    rarity_clamp: tuple = (1.0, 16.0)
    normalizer_window: int = 1024
    producers: tuple = PRODUCERS

    def __post_init__(self):
        if not self.A > 1:
            raise ValueError("A must be > 1")
        if self.B < 0:
            raise ValueError("B must be >= 0")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")
        if self.base_energy < 1:
            raise ValueError("base energy must be >= 1")
        lo, hi = self.rarity_clamp
        if not 0 < lo <= hi:
            raise ValueError("rarity clamp must satisfy 0 < lo <= hi")
        if self.normalizer_window < 1:
            raise ValueError("normalizer window must be >= 1")
        unknown = set(self.producers) - set(PRODUCERS)
        if unknown:
            raise ValueError(f"unknown producers: {sorted(unknown)}")
        # canonical order so configs compare and echo stably
        self.producers = tuple(p for p in PRODUCERS if p in self.producers)

    def to_json(self) -> dict:
        return {
            "A": self.A, "B": self.B, "cap": self.cap, "base_energy": self.base_energy,
            "rarity_clamp": list(self.rarity_clamp),
            "normalizer_window": self.normalizer_window,
            "producers": list(self.producers),
        }


def scale_score(c: float, p: EnergyParams = None) -> float:
    p = p or EnergyParams()
    return p.A ** c + p.B


def k_complexity(blocks, scores, neighbor_map) -> float:
    """Mean over covered blocks of the summed neighbour scores."""
    blocks = list(blocks)
    if not blocks:
        return 0.0
    return math.fsum(scores[n] for b in blocks for n in neighbor_map[b]) / len(blocks)


k_invariant = k_complexity


def k_vuln(functions, scores, function_blocks) -> float:
    """Sum of block scores over every called function, repeats included."""
    return math.fsum(scores[b] for f in functions for b in function_blocks[f])


def is_subsequence(seq, calls) -> bool:
    it = iter(calls)
    return all(x in it for x in seq)


def k_seq(calls, suggestions) -> float:
    """Each suggested chain found in order within ``calls`` adds its score once."""
    calls = tuple(calls)
    return math.fsum(score for seq, score in suggestions if is_subsequence(seq, calls))


def _round(x: float) -> int:
    return int(math.floor(x + 0.5))


def base_energy(edges, edge_hits: dict, mean_hits: float, p: EnergyParams) -> int:
    """E0 scaled by how rare the test case's rarest edge is, clamped."""
    lo, hi = p.rarity_clamp
    rarest = min((edge_hits[e] for e in edges), default=0)
    ratio = mean_hits / rarest if rarest else lo
    return max(1, _round(p.base_energy * min(max(ratio, lo), hi)))


def combine(e_base: int, ks: dict, p: EnergyParams, normalizers: dict) -> int:
    """min(e' + sum e'*K_i/Z_i, cap*e'), rounded half up, at least 1.

    Producers that are disabled, or whose normalizer is still undefined,
    contribute nothing.
    """
    extra = 0.0
    for name in p.producers:
        k = ks.get(name, 0.0)
        z = normalizers.get(name)
        if k > 0 and z:
            extra += e_base * (k / z)
    return max(1, _round(min(e_base + extra, p.cap * e_base)))


class Normalizer:
    """Running median of the nonzero K values of the last ``window`` executions."""

    def __init__(self, window: int):
        self.values = deque(maxlen=window)

    def push(self, k: float):
        if k > 0:
            self.values.append(k)

    def value(self):
        return median(self.values) if self.values else None


class EnergyModel:
    """Precomputed per-block scaled scores for one VM and MetricsBundle."""

    def __init__(self, vm, bundle, params: EnergyParams):
        self.params = params
        n = len(vm.block_names)
        per_fn = blockify(bundle, vm.cfgs)
        self.function_blocks = vm.function_blocks

        def flatten(table):
            out = [0.0] * n
            for key, scores in table.items():
                for local, raw in enumerate(scores):
                    out[vm.function_blocks[key][local]] = scale_score(raw, params)
            return out

        self.complexity = flatten(per_fn["complexity"])
        self.vuln = flatten(per_fn["vuln"])
        self.invariants = [flatten(t) for _, t in sorted(per_fn["invariants"].items())]
        self.suggestions = list(bundle.sequences)
        self.neighbor_map = [()] * n
        for key, cfg in vm.cfgs.items():
            base = vm.function_blocks[key][0]
            for b in cfg.blocks:
                self.neighbor_map[base + b.id] = tuple(sorted(base + x for x in neighbors(cfg, b.id)))
        # all-zero producers carry no signal and fall back to the baseline
        self.active = tuple(
            name for name in params.producers
            if not bundle.is_zero(name) and (name != "invariant" or self.invariants)
        )

    def k_values(self, blocks, functions) -> dict:
        out = {}
        for name in self.active:
            if name == "complexity":
                out[name] = k_complexity(blocks, self.complexity, self.neighbor_map)
            elif name == "vuln":
                out[name] = k_vuln(functions, self.vuln, self.function_blocks)
            elif name == "seq":
                out[name] = k_seq(functions, self.suggestions)
            else:
                out[name] = math.fsum(
                    k_invariant(blocks, scores, self.neighbor_map) for scores in self.invariants)
        return out


@dataclass
class CorpusEntry:
    test: object  # TestCase
    seq: int  # insertion number
    edges: tuple = ()
    blocks: frozenset = frozenset()
    functions: tuple = ()
    k: dict = field(default_factory=dict)
    base: int = 0
    energy: int = 0
    executed: bool = False
    _energy_key: tuple = field(default=None, repr=False)


class Corpus:
    def __init__(self, params: EnergyParams, model: EnergyModel = None):
        self.params = params
        self.model = model
        self.entries: list = []
        self._tests = set()
        self.edge_hits: dict = {}
        self.total_hits = 0
        self.normalizers = {name: Normalizer(params.normalizer_window) for name in PRODUCERS}
        self._cursor = 0

    def __len__(self):
        return len(self.entries)

    def __contains__(self, test):
        return test in self._tests

    def add(self, test, result=None):
        """Append a test case; None when its call sequence is already stored."""
        if test in self._tests:
            return None
        entry = CorpusEntry(test, len(self.entries))
        if result is not None:
            self.set_footprint(entry, result)
        self.entries.append(entry)
        self._tests.add(test)
        return entry

    def set_footprint(self, entry: CorpusEntry, result, ks: dict = None):
        entry.edges = tuple(result.edges)
        entry.blocks = result.blocks
        entry.functions = result.functions
        if ks is None:
            ks = self.model.k_values(result.blocks, result.functions) if self.model else {}
        entry.k = ks
        entry.executed = True

    def observe(self, result) -> dict:
        """Fold one execution into hit statistics and normalizers; return its K values."""
        hits = self.edge_hits
        for e, c in result.edges.items():
            hits[e] = hits.get(e, 0) + c
            self.total_hits += c
        ks = self.model.k_values(result.blocks, result.functions) if self.model else {}
        for name, k in ks.items():
            self.normalizers[name].push(k)
        return ks

    def mean_hits(self) -> float:
        return self.total_hits / len(self.edge_hits) if self.edge_hits else 0.0

    def select(self) -> CorpusEntry:
        """Round-robin over entries in insertion order."""
        if not self.entries:
            raise IndexError("select from an empty corpus")
        entry = self.entries[self._cursor % len(self.entries)]
        self._cursor += 1
        return entry

    def energy(self, entry: CorpusEntry) -> int:
        """e_cvs for ``entry``, recomputed only when its inputs changed."""
        p = self.params
        base = base_energy(entry.edges, self.edge_hits, self.mean_hits(), p)
        zs = {name: self.normalizers[name].value() for name in entry.k}
        key = (base, tuple(sorted(zs.items())))
        if key != entry._energy_key:
            entry.base = base
            entry.energy = combine(base, entry.k, p, zs)
            entry._energy_key = key
        return entry.energy
