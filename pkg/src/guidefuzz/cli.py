"""guidefuzz command line: run, fetch-metrics, static, ablate.

Exit codes: 0 completed, 2 configuration/input error, 10 a campaign stopped
on its first bug, 11 fetch-metrics finished with zero-score fallbacks.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import platform
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import jsonschema

from . import __version__
from .bench import MODES, ablate, format_table, summarize, write_runs
from .config import (
    COVERAGE_COLUMNS,
    MANIFEST_SCHEMA,
    REPORT_SCHEMA,
    STATIC_SCHEMA,
    CampaignConfig,
    ConfigError,
)
from .engine import run_campaign
from .minisol import MiniSolError, parse_files, summarize as static_summary
from .producers import (
    METRICS_SCHEMA,
    Cassette,
    ChatClient,
    LLMError,
    MetricsBundle,
    MetricsError,
    MissingApiKey,
    ProviderConfig,
    fetch_metrics,
    load_metrics,
)
from .producers.client import DEFAULT_KEY_ENV
from .producers.fetch import Invariant
from .producers.prompts import DEFAULT_BUDGET, PromptBudgetError
from .scheduler import PRODUCERS, EnergyParams
from .vm import HarnessError

log = logging.getLogger("guidefuzz")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUG = 10
EXIT_DEGRADED = 11


class UsageError(Exception):
    """Bad flags or inputs; reported with exit code 2."""


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


def _write_json(path: Path, doc, schema=None):
    if schema is not None:
        jsonschema.validate(doc, schema)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _producers(text: str) -> tuple:
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    unknown = [p for p in names if p not in PRODUCERS]
    if unknown:
        raise UsageError(f"--producers: unknown producer(s) {', '.join(unknown)}")
    return names


def _temperatures(text: str) -> tuple:
    try:
        temps = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"--temperatures: not a comma-separated list of numbers: {text!r}")
    if not temps:
        raise UsageError("--temperatures: empty list")
    return temps


def _provider(args, base: ProviderConfig = None):
    """ProviderConfig from --llm-* flags layered over the config file's [llm]."""
    endpoint = args.llm_endpoint or (base.endpoint if base else None)
    if not endpoint:
        return None
    temps = _temperatures(args.temperatures) if args.temperatures else (
        base.temperatures if base else None)
    cfg = base or ProviderConfig(endpoint=endpoint, model="")
    changes = {"endpoint": endpoint}
    if args.llm_model:
        changes["model"] = args.llm_model
    if temps:
        changes["temperatures"] = temps
    return replace(cfg, **changes)


def _load_config(args) -> CampaignConfig:
    config = CampaignConfig.from_toml(args.config)
    energy = asdict(config.energy)
    for flag, key in (("energy_A", "A"), ("energy_B", "B"), ("energy_cap", "cap"),
                      ("base_energy", "base_energy")):
        value = getattr(args, flag, None)
        if value is not None:
            energy[key] = value
    if getattr(args, "producers", None) is not None:
        energy["producers"] = _producers(args.producers)
    try:
        params = EnergyParams(**energy)
    except ValueError as exc:
        raise UsageError(f"energy parameters: {exc}") from None
    changes = {"energy": params}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "max_executions", None) is not None:
        changes["max_executions"] = args.max_executions
    if getattr(args, "time_budget", None) is not None:
        changes["time_budget"] = args.time_budget
    if getattr(args, "metrics_fixture", None):
        changes["metrics_fixture"] = args.metrics_fixture
    if getattr(args, "stop_on_first_bug", None) is not None:
        changes["stop_on_first_bug"] = args.stop_on_first_bug
    if hasattr(args, "llm_endpoint"):
        changes["provider"] = _provider(args, config.provider)
    return config.with_overrides(**changes)


def _metrics_source(config: CampaignConfig) -> str:
    if config.metrics_fixture:
        return "fixture"
    if config.provider is not None and config.energy.producers:
        return "endpoint"
    return "zeros"


# -- commands --


def cmd_run(args) -> int:
    config = _load_config(args)
    unit = parse_files(config.sources)
    from .engine import resolve_metrics
    try:
        bundle = resolve_metrics(config, unit)
    except MissingApiKey as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start, t0 = _now(), time.monotonic()
    report = run_campaign(config, bundle, unit)
    end, seconds = _now(), time.monotonic() - t0

    doc = report.to_json()
    _write_json(out / "report.json", doc, REPORT_SCHEMA)
    with open(out / "coverage.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COVERAGE_COLUMNS)
        for row in report.coverage:
            w.writerow([row[c] for c in COVERAGE_COLUMNS])
    manifest = {
        "tool": "guidefuzz",
        "version": __version__,
        "python": platform.python_version(),
        "seed": config.seed,
        "config": config.to_json(),
        "baseline": not report.config["active_producers"],
        "metrics": {"source": _metrics_source(config), "provenance": bundle.provenance},
        "wall_clock": {"start": start, "end": end, "seconds": round(seconds, 3)},
        "detections_wall_s": {d.oracle: round(d.wall_s, 4) for d in report.detections},
    }
    _write_json(out / "manifest.json", manifest, MANIFEST_SCHEMA)

    print(f"executions: {report.executions}  corpus: {report.corpus_size}  "
          f"stop: {report.stop_reason}  wall: {seconds:.2f}s")
    last = report.coverage[-1] if report.coverage else {}
    print(f"coverage: {last.get('blocks', 0)} blocks, {last.get('edges', 0)} edges")
    for d in report.detections:
        print(f"  {d.oracle} at execution {d.executions} ({d.elapsed_ms} ms virtual, "
              f"{d.wall_s:.3f} s wall) in {d.location['function']}")
    return EXIT_BUG if report.stop_reason == "bug" else EXIT_OK


def _fetch_inputs(args):
    if args.config:
        config = CampaignConfig.from_toml(args.config)
        return config.sources, config.invariants, config.provider, config.metrics_fixture
    if not args.sources:
        raise UsageError("fetch-metrics needs --config or source files")
    invariants = []
    for spec in args.invariant or ():
        ident, sep, text = spec.partition("=")
        if not sep:
            raise UsageError(f"--invariant expects ID=TEXT, got {spec!r}")
        invariants.append(Invariant(ident, text))
    return args.sources, invariants, None, None


def cmd_fetch_metrics(args) -> int:
    sources, invariants, provider, fixture = _fetch_inputs(args)
    unit = parse_files(sources)
    ids = [i.id for i in invariants]
    fixture = args.metrics_fixture or (None if args.llm_endpoint else fixture)
    degraded = False
    if fixture:
        bundle = load_metrics(fixture, unit, ids)
        print(f"fixture {fixture}: valid")
    else:
        provider = _provider(args, provider)
        if provider is None:
            raise UsageError("fetch-metrics needs --llm-endpoint, an [llm] table or --metrics-fixture")
        transport = None
        if args.cassette:
            transport = Cassette(args.cassette, mode="record" if args.record else "replay")
        client = ChatClient(provider, transport)
        try:
            if transport is None or args.record:
                provider.api_key(required=True)
            bundle, stats = fetch_metrics(unit, client, invariants, budget=args.budget)
        except MissingApiKey as exc:
            raise UsageError(str(exc)) from None
        if args.cassette and args.record:
            transport.save()
        degraded = stats.degraded
        print(f"requests: {stats.requests}  failed: {stats.failures}")
        if stats.fallback_functions:
            print("zero-score fallbacks: " + ", ".join(sorted(set(stats.fallback_functions))))
    cov = bundle.coverage(unit)
    n = cov["public_functions"]
    print(f"complexity: {cov['complexity']}/{n} functions scored")
    print(f"vuln: {cov['vuln']}/{n} functions scored")
    for inv, k in cov["invariants"].items():
        print(f"invariant {inv}: {k}/{n} functions scored")
    print(f"sequences: {cov['sequences']} suggested")
    if args.out:
        doc = bundle.to_json()
        jsonschema.validate(doc, METRICS_SCHEMA)
        bundle.save(args.out)
        print(f"wrote {args.out}")
    return EXIT_DEGRADED if degraded else EXIT_OK


def cmd_static(args) -> int:
    unit = parse_files(args.sources)
    doc = static_summary(unit).to_json()
    jsonschema.validate(doc, STATIC_SCHEMA)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.dump_static and args.dump_static != "-":
        Path(args.dump_static).write_text(text, encoding="utf-8")
        print(f"wrote {args.dump_static}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ablate(args) -> int:
    configs = [_load_config(argparse.Namespace(config=path, producers=None, seed=None,
                                                max_executions=args.max_executions,
                                                time_budget=args.time_budget,
                                                metrics_fixture=None, stop_on_first_bug=None))
               for path in args.config]
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise UsageError(f"--modes: unknown mode(s) {', '.join(bad)}")
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(run):
        if args.verbose:
            hit = "inf" if math.isinf(run.executions) else int(run.executions)
            print(f"  {run.bench} {run.mode:8s} seed {run.seed:3d}: {hit} ({run.wall_s:.2f}s)",
                  flush=True)

    t0 = time.monotonic()
    runs = ablate(configs, seeds, modes, progress)
    rows = summarize(runs)
    write_runs(runs, out / "runs.csv")
    table = format_table(rows, modes)
    (out / "summary.md").write_text(table, encoding="utf-8")
    _write_json(out / "summary.json", {"rows": [
        {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in r.items()}
        for r in rows]})
    print(table, end="")
    print(f"{len(runs)} runs in {time.monotonic() - t0:.1f}s; median executions to first bug")
    return EXIT_OK


# -- argument parsing --


def _add_energy_flags(p):
    p.add_argument("--producers", help="comma-separated subset of "
                   + ",".join(PRODUCERS) + "; empty string = baseline")
    p.add_argument("--energy-A", dest="energy_A", type=float)
    p.add_argument("--energy-B", dest="energy_B", type=float)
    p.add_argument("--energy-cap", dest="energy_cap", type=float)
    p.add_argument("--base-energy", dest="base_energy", type=int)


def _add_llm_flags(p):
    p.add_argument("--llm-endpoint", help="chat-completions URL")
    p.add_argument("--llm-model")
    p.add_argument("--temperatures", help="comma-separated, default 0.9,0.95,1.0")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guidefuzz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one campaign")
    p.add_argument("--config", required=True)
    p.add_argument("--metrics-fixture")
    _add_llm_flags(p)
    _add_energy_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-executions", type=int)
    p.add_argument("--time-budget", type=float)
    p.add_argument("--stop-on-first-bug", dest="stop_on_first_bug",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fetch-metrics", help="query producers or validate a fixture")
    p.add_argument("sources", nargs="*")
    p.add_argument("--config")
    p.add_argument("--invariant", action="append", metavar="ID=TEXT")
    p.add_argument("--metrics-fixture", help="validate this fixture instead of querying")
    _add_llm_flags(p)
    p.add_argument("--cassette", help="replay (or with --record, record) HTTP interactions")
    p.add_argument("--record", action="store_true")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="prompt token budget")
    p.add_argument("--out", help="write the MetricsBundle JSON here")
    p.set_defaults(func=cmd_fetch_metrics)

    p = sub.add_parser("static", help="emit the static-summary JSON")
    p.add_argument("sources", nargs="+")
    p.add_argument("--dump-static", metavar="PATH", help="write to PATH instead of stdout")
    p.set_defaults(func=cmd_static)

    p = sub.add_parser("ablate", help="{baseline,C,V,S,full} x seeds sweep")
    p.add_argument("--config", action="append", required=True)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--first-seed", type=int, default=1)
    p.add_argument("--modes", default=",".join(MODES))
    p.add_argument("--max-executions", type=int)
    p.add_argument("--time-budget", type=float)
    p.add_argument("--out", default="ablation")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, MetricsError, PromptBudgetError) as exc:
        print(f"guidefuzz: error: {exc}", file=sys.stderr)
    except MiniSolError as exc:
        path = getattr(exc, "path", None)
        print(f"guidefuzz: error: {path + ': ' if path else ''}{exc}", file=sys.stderr)
    except OSError as exc:
        print(f"guidefuzz: error: {exc.filename}: {exc.strerror}", file=sys.stderr)
    except LLMError as exc:
        print(f"guidefuzz: error: {exc}", file=sys.stderr)
    except HarnessError as exc:
        print(f"guidefuzz: error: config: {exc}", file=sys.stderr)
    except jsonschema.ValidationError as exc:
        print(f"guidefuzz: error: output failed its schema: {exc.message}", file=sys.stderr)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
