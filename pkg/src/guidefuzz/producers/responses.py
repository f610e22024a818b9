"""Parsing and aggregation of model replies."""
from __future__ import annotations

import logging
import re
from statistics import fmean

log = logging.getLogger(__name__)

SCORE_MIN = 0
SCORE_MAX = 100


class MalformedResponse(ValueError):
    pass


_NUM = r"<?\s*-?\d+(?:\.\d+)?\s*>?"
_RUN_RE = re.compile(rf"{_NUM}(?:\s*,\s*{_NUM})*")
_VALUE_RE = re.compile(r"-?\d+(?:\.\d+)?")


def _number(text: str):
    v = float(text)
    return int(v) if v.is_integer() and "." not in text else v


def clamp(score, what: str = "score"):
    if score < SCORE_MIN or score > SCORE_MAX:
        clamped = min(max(score, SCORE_MIN), SCORE_MAX)
        log.warning("clamped out-of-range %s %s to %s", what, score, clamped)
        return clamped
    return score


def _runs(text: str):
    """Comma-separated numeric runs, each with a flag for 'fills its own line'."""
    for m in _RUN_RE.finditer(text):
        values = [_number(v) for v in _VALUE_RE.findall(m.group())]
        line_start = text.rfind("\n", 0, m.start()) + 1
        line_end = text.find("\n", m.end())
        line_end = len(text) if line_end == -1 else line_end
        before = text[line_start:m.start()].strip(" \t[(`*")
        after = text[m.end():line_end].strip(" \t])`*.")
        yield values, not before and not after


def parse_scores(text: str, expected_n: int) -> list:
    """Pull ``expected_n`` comma-separated scores out of a chatty reply.

    A run standing alone on its line wins over one embedded in prose; a
    longer run is cut to its first ``expected_n`` values only as a last
    resort.  Out-of-range values are clamped into [0, 100].
    """
    if expected_n < 1:
        raise ValueError("expected_n must be >= 1")
    runs = list(_runs(text))
    pick = None
    for values, alone in runs:
        if alone and len(values) == expected_n:
            pick = values
            break
    if pick is None:
        pick = next((v for v, _ in runs if len(v) == expected_n), None)
    if pick is None:
        longer = next((v for v, _ in runs if len(v) > expected_n), None)
        if longer is not None:
            log.warning("reply has %d scores, expected %d; using the first %d",
                        len(longer), expected_n, expected_n)
            pick = longer[:expected_n]
    if pick is None:
        raise MalformedResponse(f"no run of {expected_n} comma-separated scores in reply")
    return [clamp(v) for v in pick]


def render_scores(scores) -> str:
    return ",".join(str(s) for s in scores)


def normalize_signature(sig: str) -> str:
    sig = re.sub(r"\s+", "", sig.strip().strip("<>`\"'"))
    sig = re.sub(r"\buint\d+\b", "uint", sig)
    return sig


class SignatureResolver:
    """Maps reply spellings (qualified, bare signature, bare name) to keys."""

    def __init__(self, keys):
        self.keys = list(keys)
        self.table = {}
        ambiguous = set()
        for key in self.keys:
            contract, sig = key.split(".", 1)
            name = sig.split("(", 1)[0]
            self.table[key] = key
            for alias in (sig, name, f"{contract}.{name}"):
                if alias in self.table and self.table[alias] != key:
                    ambiguous.add(alias)
                self.table.setdefault(alias, key)
        for alias in ambiguous:
            if alias not in self.keys:
                del self.table[alias]

    def resolve(self, sig: str):
        return self.table.get(normalize_signature(sig))


_SEQ_LINE_RE = re.compile(r"^(?P<chain>.+=>.+?)\s*:\s*<?\s*(?P<score>-?\d+(?:\.\d+)?)\s*>?\s*$")


def parse_sequences(text: str, known=None) -> list:
    """Parse ``sigA=>sigB[=>sigC...]:score`` lines.

    ``known`` is the collection of valid function keys; lines naming an
    unknown or ambiguous function are dropped with a warning.  Without it,
    signatures are kept as written.
    """
    resolver = SignatureResolver(known) if known is not None else None
    out = []
    for raw in text.splitlines():
        line = re.sub(r"^\s*(?:[-*]|\d+[.)])\s+", "", raw).strip().strip("`")
        m = _SEQ_LINE_RE.match(line)
        if not m:
            continue
        parts = [p for p in m.group("chain").split("=>")]
        if resolver is not None:
            keys = [resolver.resolve(p) for p in parts]
            if None in keys:
                log.warning("dropping sequence with unknown signature: %s", raw.strip())
                continue
        else:
            keys = [normalize_signature(p) for p in parts]
        if len(keys) < 2:
            continue
        out.append((tuple(keys), clamp(_number(m.group("score")), "interestingness")))
    if not out:
        raise MalformedResponse("no sequence lines parsed")
    return out


def aggregate(replies, n: int = None) -> list:
    """Elementwise mean of the successful replies (``None`` marks a failure).

    If every reply failed the result is ``n`` zeros.
    """
    ok = [r for r in replies if r is not None]
    if not ok:
        if n is None:
            raise ValueError("no successful replies and no length given")
        return [0] * n
    length = len(ok[0])
    if any(len(r) != length for r in ok) or (n is not None and length != n):
        raise ValueError("score lists differ in length")
    return [fmean(col) for col in zip(*ok)]


def aggregate_sequences(replies) -> list:
    """Mean score per distinct sequence over successful replies; absent counts 0."""
    ok = [r for r in replies if r is not None]
    if not ok:
        return []
    totals: dict = {}
    for reply in ok:
        best: dict = {}
        for seq, score in reply:
            best[seq] = max(score, best.get(seq, score))
        for seq, score in best.items():
            totals.setdefault(seq, []).append(score)
    return [(seq, sum(scores) / len(ok)) for seq, scores in totals.items()]
