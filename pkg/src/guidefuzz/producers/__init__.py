"""Metric producers: prompts, model replies and the MetricsBundle."""
from .client import Cassette, ChatClient, LLMError, MissingApiKey, ProviderConfig
from .fetch import FetchStats, Invariant, fetch_metrics, load_metrics
from .metrics import METRICS_SCHEMA, MetricsBundle, MetricsError, blockify
from .prompts import (
    DEFAULT_BUDGET,
    Prompt,
    PromptBudgetError,
    Snippet,
    build_complexity_prompt,
    build_invariant_prompt,
    build_seq_prompt,
    build_vuln_prompt,
    chunk,
    estimate_tokens,
    make_snippet,
)
from .responses import (
    MalformedResponse,
    aggregate,
    aggregate_sequences,
    parse_scores,
    parse_sequences,
    render_scores,
)

__all__ = [
    "Cassette", "ChatClient", "DEFAULT_BUDGET", "FetchStats", "Invariant", "LLMError",
    "METRICS_SCHEMA", "MalformedResponse", "MetricsBundle", "MetricsError", "MissingApiKey",
    "Prompt", "PromptBudgetError", "ProviderConfig", "Snippet", "aggregate",
    "aggregate_sequences", "blockify", "build_complexity_prompt", "build_invariant_prompt",
    "build_seq_prompt", "build_vuln_prompt", "chunk", "estimate_tokens", "fetch_metrics",
    "load_metrics", "make_snippet", "parse_scores", "parse_sequences", "render_scores",
]
