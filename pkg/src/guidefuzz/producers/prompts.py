"""Prompt templates, snippet assembly and token-budget chunking."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from ..minisol.analysis import StaticSummary, closure_with_depth

log = logging.getLogger(__name__)

COMPLEXITY_INSTRUCTION = (
    "How complex are the following Solidity code snippets (i.e., how hard is it to gain "
    "high test coverage by trying random arguments)? Rank within the range of 0 to 100. "
    "Output in the form of <Complexity 1>,<Complexity 2>,<Complexity 3>..."
)
SEQ_INSTRUCTION = (
    "Suggest a series of interesting sequences given following the public Solidity "
    "functions and their code. Then, rank each interestingness of the sequence within the "
    "range of 0 to 100. Output one sequence in a line with the form of "
    "<Function Signature 1>=><Function Signature  2>:<Interestingness>. "
)
VULN_INSTRUCTION = (
    "How likely are the following Solidity snippets to cause vulnerabilities (e.g., "
    "logical issue, reentrancy, etc.)? Rank each in terms of 100. Output in the form of "
    "<Likelihood 1>,<Likelihood 2>,<Likelihood 3>..."
)
INVARIANT_INSTRUCTION = (
    "How likely is following Solidity code snippets to cause {{Invariant}} being violated? "
    "Rank each in terms of 100. Output in the form of "
    "<Likelihood 1>,<Likelihood 2>,<Likelihood 3>..."
)
INVARIANT_PLACEHOLDER = "{{Invariant}}"

DEFAULT_BUDGET = 28_000


class PromptBudgetError(ValueError):
    """A prompt's estimated token count exceeds the budget."""


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class Snippet:
    target: str  # function key whose score this snippet yields
    sources: tuple  # verbatim function sources, target first

    @property
    def code(self) -> str:
        return "\n\n".join(self.sources)


@dataclass
class Prompt:
    kind: str
    instruction: str
    snippets: list
    text: str
    tokens: int
    targets: list = field(default_factory=list)


def make_snippet(unit, key: str, summary: StaticSummary, closure: bool = True,
                 keep: int = None) -> Snippet:
    """Target source followed by its dependency closure.

    ``keep`` limits the closure to its first ``keep`` members after ordering
    by BFS depth, so callers can drop the farthest members first.
    """
    members = closure_with_depth(key, summary) if closure else [(key, 0)]
    if keep is not None:
        root, rest = members[0], members[1:]
        # keep the shallowest members; among equal depth, earlier closure order
        ranked = sorted(range(len(rest)), key=lambda i: (rest[i][1], i))
        kept = set(ranked[:keep])
        members = [root] + [m for i, m in enumerate(rest) if i in kept]
    return Snippet(key, tuple(unit.source_of(unit.function_by_key(k)) for k, _ in members))


def _render(instruction: str, snippets) -> str:
    parts = [instruction]
    for i, sn in enumerate(snippets, 1):
        parts.append(f"Snippet {i} ({sn.target}):\n{sn.code}")
    return "\n\n".join(parts) + "\n"


def _build(kind: str, instruction: str, batch, budget: int) -> Prompt:
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    text = _render(instruction, batch)
    tokens = estimate_tokens(text)
    if tokens > budget:
        raise PromptBudgetError(f"{kind} prompt needs {tokens} tokens, budget {budget}")
    return Prompt(kind, instruction, batch, text, tokens, [s.target for s in batch])


def build_complexity_prompt(batch, budget: int = DEFAULT_BUDGET) -> Prompt:
    return _build("complexity", COMPLEXITY_INSTRUCTION, batch, budget)


def build_vuln_prompt(batch, budget: int = DEFAULT_BUDGET) -> Prompt:
    return _build("vuln", VULN_INSTRUCTION, batch, budget)


def invariant_instruction(invariant_text: str) -> str:
    return INVARIANT_INSTRUCTION.replace(INVARIANT_PLACEHOLDER, invariant_text)


def build_invariant_prompt(invariant_text: str, batch, budget: int = DEFAULT_BUDGET) -> Prompt:
    return _build("invariant", invariant_instruction(invariant_text), batch, budget)


def build_seq_prompt(batch, budget: int = DEFAULT_BUDGET) -> Prompt:
    return _build("seq", SEQ_INSTRUCTION, batch, budget)


def fit_snippet(unit, key: str, summary: StaticSummary, instruction: str, budget: int) -> Snippet:
    """Largest snippet for ``key`` that fits a prompt on its own.

    Closure members are dropped farthest-first; the target itself is never
    dropped, so PromptBudgetError is raised when even that does not fit.
    """
    full = make_snippet(unit, key, summary)
    if estimate_tokens(_render(instruction, [full])) <= budget:
        return full
    for keep in range(len(full.sources) - 2, -1, -1):
        sn = make_snippet(unit, key, summary, keep=keep)
        if estimate_tokens(_render(instruction, [sn])) <= budget:
            log.warning("truncated closure of %s to %d members", key, keep)
            return sn
    raise PromptBudgetError(f"{key} alone exceeds the prompt budget of {budget} tokens")


def chunk(unit, keys, summary: StaticSummary, instruction: str, budget: int = DEFAULT_BUDGET):
    """Greedy first-fit of snippets into prompt batches, in declaration order.

    Returns (batches, skipped) where ``skipped`` lists keys whose target
    source alone overflows the budget.
    """
    batches: list = []
    skipped = []
    for key in keys:
        try:
            sn = fit_snippet(unit, key, summary, instruction, budget)
        except PromptBudgetError as exc:
            log.warning("%s", exc)
            skipped.append(key)
            continue
        for batch in batches:
            if estimate_tokens(_render(instruction, batch + [sn])) <= budget:
                batch.append(sn)
                break
        else:
            batches.append([sn])
    return batches, skipped


def seq_snippets(unit, keys) -> list:
    """Public-function snippets for the sequence prompt (no closures)."""
    return [Snippet(k, (unit.source_of(unit.function_by_key(k)),)) for k in keys]
