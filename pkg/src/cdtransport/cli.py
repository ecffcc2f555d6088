"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration, 3 simulation abort.
Output files default to the directory named by ``CDTRANSPORT_OUTPUT_DIR``
(the current directory when unset).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config
from .engine import run as run_simulation
from .errors import ConfigError, SimulationAbort
from .metrics import compute_metrics
from .traceio import read_trace, write_trace

OUTPUT_DIR_ENV = "CDTRANSPORT_OUTPUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_ABORT = 0, 2, 3

log = logging.getLogger("cdtransport")


def _output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _parse_flag(text: str):
    """``KEY`` sets a boolean flag; ``KEY=VALUE`` takes a JSON literal."""
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep:
        return key, True
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"invalid value in --flag {text!r}") from None


def _load_valid(path, overrides=None) -> config.ScenarioConfig:
    cfg = config.load(path, overrides)
    cfg.validate()
    return cfg


def _report_invalid(path, exc: ConfigError) -> int:
    print(f"{path}: invalid", file=sys.stderr)
    for item in exc.violations:
        print(f"  - {item}", file=sys.stderr)
    return EXIT_INVALID


def cmd_validate(args) -> int:
    try:
        cfg = _load_valid(args.config)
    except ConfigError as exc:
        return _report_invalid(args.config, exc)
    print(f"{args.config}: valid ({cfg.n_agents} agents, {cfg.t0:g}-{cfg.tf:g} s)")
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = dict(args.flag or [])
    if args.seed is not None:
        overrides["sim.seed"] = args.seed
    try:
        cfg = _load_valid(args.config, overrides)
    except ConfigError as exc:
        return _report_invalid(args.config, exc)
    out = Path(args.out) if args.out else _output_dir() / "trace.csv"
    metrics_path = Path(args.metrics) if args.metrics else _output_dir() / "metrics.txt"
    log.info("running %s (%d agents, seed %d)", cfg.name, cfg.n_agents, cfg.seed)
    try:
        trace = run_simulation(cfg)
    except SimulationAbort as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    out.parent.mkdir(parents=True, exist_ok=True)
    metrics_path.parent.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out)
    report = compute_metrics(trace, cfg.schedule, cfg.leaders)
    metrics_path.write_text(report.dumps())
    print(f"wrote {out} and {metrics_path}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    schedule = leaders = None
    observer = None
    if args.config:
        try:
            cfg = _load_valid(args.config)
        except ConfigError as exc:
            return _report_invalid(args.config, exc)
        schedule, leaders = cfg.schedule, cfg.leaders
        observer = "literal" if cfg.literal_innovation else "standard"
    trace = read_trace(args.trace)
    if observer:
        trace.observer = observer
    text = compute_metrics(trace, schedule, leaders).dumps()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gen_paper_scenario(args) -> int:
    out = Path(args.out) if args.out else _output_dir() / "canonical_scenario.cfg"
    out.parent.mkdir(parents=True, exist_ok=True)
    text = config.canonical_scenario(args.seed).dumps()
    out.write_text("# canonical 20-quadcopter channel transit with a slung payload\n" + text)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdtransport", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="simulate a scenario and write trace and metrics")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="override sim.seed")
    r.add_argument("--out", help="trace CSV path (default: $%s/trace.csv)" % OUTPUT_DIR_ENV)
    r.add_argument("--metrics", help="metrics path (default: $%s/metrics.txt)" % OUTPUT_DIR_ENV)
    r.add_argument("--flag", action="append", type=_parse_flag, metavar="KEY[=VALUE]",
                   help="override a config key; a bare key sets a boolean flag, e.g. "
                        + ", ".join(config.FLAG_KEYS))
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("metrics", help="compute metrics from a trace CSV")
    m.add_argument("trace")
    m.add_argument("--config", help="scenario file, enables containment metrics")
    m.add_argument("--out", help="write metrics here instead of stdout")
    m.set_defaults(func=cmd_metrics)

    g = sub.add_parser("gen-paper-scenario", help="write the canonical 20-agent scenario")
    g.add_argument("--out", help="path (default: $%s/canonical_scenario.cfg)" % OUTPUT_DIR_ENV)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_paper_scenario)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _report_invalid(getattr(args, "config", None) or getattr(args, "trace", ""), exc)


if __name__ == "__main__":
    sys.exit(main())
