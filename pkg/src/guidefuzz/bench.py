"""Ablation sweeps: {baseline, C, V, S, full} x seeds over benchmark configs.

Time-to-bug is counted in executions until the config's target oracle
first fires (the deterministic unit); runs that never hit it are censored
at ``inf``.  Virtual milliseconds and wall seconds are recorded alongside.

When the baseline median itself is censored, the ratio reported for a mode
is an upper bound: its median over the fewest executions any censored
baseline run completed, since the true baseline median lies beyond that.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from statistics import median

from .minisol.parser import parse_files
from .engine import BUG_KINDS, resolve_metrics, run_campaign
from .scheduler import PRODUCERS

MODES = {
    "baseline": (),
    "C": ("complexity",),
    "V": ("vuln",),
    "S": ("seq",),
    "full": PRODUCERS,
}
COLUMNS = {"baseline": "Baseline", "C": "L-C", "V": "L-V", "S": "L-S", "full": "full"}


@dataclass
class AblationRun:
    bench: str
    mode: str
    seed: int
    found: bool
    executions: float  # to first target hit, inf when not found
    elapsed_ms: float
    wall_s: float
    total_executions: int = 0  # executions performed before the run stopped
    coverage_monotone: bool = True  # blocks/edges never decrease over the run


def time_to_bug(report, target: str = None):
    """(executions, elapsed_ms, wall_s) of the first target detection or None."""
    for d in report.detections:
        if (d.oracle == target) if target else d.kind in BUG_KINDS:
            return d.executions, d.elapsed_ms, d.wall_s
    return None


def run_one(config, mode: str, seed: int, unit=None, bundle=None) -> AblationRun:
    energy = config.energy
    cfg = config.with_overrides(
        seed=seed, stop_on_first_bug=True,
        energy=type(energy)(**{**asdict(energy), "producers": MODES[mode]}),
    )
    report = run_campaign(cfg, bundle, unit)
    hit = time_to_bug(report, config.target)
    name = Path(config.path).stem if config.path else "bench"
    monotone = coverage_monotone(report.coverage)
    if hit is None:
        return AblationRun(name, mode, seed, False, math.inf, report.elapsed_ms, report.wall_s,
                           report.executions, monotone)
    return AblationRun(name, mode, seed, True, *hit, report.executions, monotone)


def coverage_monotone(rows, columns=("blocks", "edges")) -> bool:
    return all(cur[c] >= prev[c] for prev, cur in zip(rows, rows[1:]) for c in columns)


def ablate(configs, seeds, modes=tuple(MODES), progress=None) -> list:
    runs = []
    for config in configs:
        unit = parse_files(config.sources)
        bundle = resolve_metrics(config, unit)
        for mode in modes:
            for seed in seeds:
                run = run_one(config, mode, seed, unit, bundle)
                runs.append(run)
                if progress:
                    progress(run)
    return runs


def summarize(runs) -> list:
    """One row per (bench, mode): median executions/ms, hit count, ratio to baseline."""
    groups = {}
    for r in runs:
        groups.setdefault((r.bench, r.mode), []).append(r)
    rows = []
    for (bench, mode), rs in groups.items():
        med = median(r.executions for r in rs)
        ratio, bound = baseline_ratio(med, groups.get((bench, "baseline")))
        rows.append({
            "bench": bench, "mode": mode, "column": COLUMNS.get(mode, mode),
            "runs": len(rs), "found": sum(r.found for r in rs),
            "median_executions": med,
            "median_ms": median(r.elapsed_ms if r.found else math.inf for r in rs),
            "median_wall_s": median(r.wall_s if r.found else math.inf for r in rs),
            "ratio_to_baseline": ratio,
            "ratio_is_bound": bound,
        })
    return rows


def baseline_ratio(med, base_runs):
    """(median / baseline median, is_upper_bound); nan when undefined."""
    if not base_runs:
        return math.nan, False
    base_med = median(r.executions for r in base_runs)
    if not math.isinf(base_med):
        return med / base_med, False
    if math.isinf(med):
        return math.nan, False
    floor = min(r.total_executions for r in base_runs if not r.found)
    return (med / floor if floor else math.nan), True


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        if math.isnan(x):
            return "-"
        return f"{x:.1f}" if x >= 10 else f"{x:.2f}"
    return str(x)


def format_table(rows, modes=tuple(MODES)) -> str:
    """Markdown table: one line per bench, median executions-to-bug per mode."""
    benches = list(dict.fromkeys(r["bench"] for r in rows))
    cell = {(r["bench"], r["mode"]): r for r in rows}
    head = "| bench | " + " | ".join(COLUMNS[m] for m in modes) + " |"
    lines = [head, "|" + "---|" * (len(modes) + 1)]
    for b in benches:
        parts = []
        for m in modes:
            r = cell.get((b, m))
            if r is None:
                parts.append("")
                continue
            txt = _fmt(r["median_executions"])
            if m != "baseline":
                bound = "<=" if r.get("ratio_is_bound") else ""
                txt += f" ({bound}{_fmt(r['ratio_to_baseline'])}x)"
            parts.append(txt)
        lines.append(f"| {b} | " + " | ".join(parts) + " |")
    return "\n".join(lines) + "\n"


def write_runs(runs, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bench", "mode", "seed", "found", "executions", "elapsed_ms", "wall_s",
                    "total_executions", "coverage_monotone"])
        for r in runs:
            w.writerow([r.bench, r.mode, r.seed, int(r.found), r.executions, r.elapsed_ms,
                        f"{r.wall_s:.4f}", r.total_executions, int(r.coverage_monotone)])
