"""Run the four producers against an endpoint, or load a fixture."""
from __future__ import annotations

import datetime as _dt
import logging
from dataclasses import dataclass, field

from ..minisol.analysis import summarize
from . import prompts as P
from .client import ChatClient, LLMError, MissingApiKey
from .metrics import MetricsBundle
from .responses import MalformedResponse, aggregate, aggregate_sequences, parse_scores, parse_sequences

log = logging.getLogger(__name__)


@dataclass
class Invariant:
    id: str
    text: str
    site: str = ""  # assert site "Contract.sig#n" the VM reports it at


@dataclass
class FetchStats:
    requests: int = 0
    failures: int = 0  # replies lost to transport errors or unparseable text
    fallback_functions: list = field(default_factory=list)  # scored 0 by fallback

    @property
    def degraded(self) -> bool:
        return self.failures > 0 or bool(self.fallback_functions)


def _ask(client: ChatClient, prompt: P.Prompt, parse, stats: FetchStats) -> list:
    """One parsed reply per temperature; ``None`` where a query failed."""
    replies = []
    for temp in client.config.temperatures:
        stats.requests += 1
        try:
            replies.append(parse(client.complete(prompt.text, temp)))
        except MissingApiKey:
            raise
        except (LLMError, MalformedResponse) as exc:
            stats.failures += 1
            log.warning("%s prompt at temperature %s failed: %s", prompt.kind, temp, exc)
            replies.append(None)
    return replies


def _score_producer(unit, summary, keys, instruction, build, client, budget, stats) -> dict:
    scores = {}
    batches, skipped = P.chunk(unit, keys, summary, instruction, budget)
    for batch in batches:
        prompt = build(batch)
        n = len(prompt.targets)
        replies = _ask(client, prompt, lambda text: parse_scores(text, n), stats)
        if all(r is None for r in replies):
            stats.fallback_functions += prompt.targets
        for key, score in zip(prompt.targets, aggregate(replies, n)):
            scores[key] = score
    for key in skipped:
        scores[key] = 0
        stats.fallback_functions.append(key)
    return {k: scores[k] for k in keys}


def _seq_prompts(unit, keys, budget):
    snippets = P.seq_snippets(unit, keys)
    try:
        return [P.build_seq_prompt(snippets, budget)]
    except P.PromptBudgetError:
        pass
    out = []
    for contract in unit.contracts:
        mine = [s for s in snippets if s.target.split(".", 1)[0] == contract.name]
        if not mine:
            continue
        try:
            out.append(P.build_seq_prompt(mine, budget))
        except P.PromptBudgetError as exc:
            log.warning("skipping sequence prompt for %s: %s", contract.name, exc)
    return out


def fetch_metrics(unit, client: ChatClient, invariants=(), summary=None,
                  budget: int = P.DEFAULT_BUDGET, timestamp: str = None):
    """Query every producer; returns (MetricsBundle, FetchStats).

    Failed queries never raise: a prompt whose replies all fail leaves its
    functions at score 0, the baseline-equivalent value.
    """
    summary = summary or summarize(unit)
    keys = [f.key for f in unit.public_functions()]
    stats = FetchStats()
    complexity = _score_producer(unit, summary, keys, P.COMPLEXITY_INSTRUCTION,
                                 lambda b: P.build_complexity_prompt(b, budget),
                                 client, budget, stats)
    vuln = _score_producer(unit, summary, keys, P.VULN_INSTRUCTION,
                           lambda b: P.build_vuln_prompt(b, budget), client, budget, stats)
    inv_scores = {}
    for inv in invariants:
        inv_scores[inv.id] = _score_producer(
            unit, summary, keys, P.invariant_instruction(inv.text),
            lambda b, text=inv.text: P.build_invariant_prompt(text, b, budget),
            client, budget, stats)
    sequences = []
    for prompt in _seq_prompts(unit, keys, budget):
        replies = _ask(client, prompt, lambda text: parse_sequences(text, keys), stats)
        sequences += aggregate_sequences(replies)
    cfg = client.config
    provenance = {
        "source": "endpoint",
        "endpoint": cfg.endpoint,
        "model": cfg.model,
        "temperatures": list(cfg.temperatures),
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    bundle = MetricsBundle(complexity, vuln, inv_scores, sequences, provenance)
    return bundle, stats


def load_metrics(path, unit, invariant_ids=None) -> MetricsBundle:
    """Load a fixture and check it against the source unit (hard errors)."""
    bundle = MetricsBundle.load(path)
    bundle.validate(unit, invariant_ids)
    return bundle
