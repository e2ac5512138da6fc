"""Command-line entry point: ``colt <stage> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import contextgen, corpus, dedup, preference, traincore
from .codegraph import ParseTimeout
from .config import ConfigError, PipelineConfig
from .pipeline import STAGES, Pipeline, PipelineError

EXIT_OK, EXIT_CONFIG, EXIT_PIPELINE, EXIT_PROVIDER = 0, 2, 3, 4

_PIPELINE_ERRORS = (PipelineError, corpus.IngestError, dedup.UsageError, contextgen.UsageError,
                    contextgen.OversizeError, preference.UsageError, traincore.UsageError,
                    traincore.TrainingError, ParseTimeout, OSError)

log = logging.getLogger("colt")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="TOML configuration file")
    p.add_argument("--seed", type=int, default=S, help="global seed (unsigned 64-bit)")
    p.add_argument("--jobs", type=int, default=S, help="worker cap")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--force", action="store_true", default=S,
                   help="do not warn about inputs changed since they were produced")
    p.add_argument("--corpus", default=S, help="corpus root (one repository per subdirectory)")
    p.add_argument("--provider", choices=("toy", "http"), default=S)
    p.add_argument("--provider-url", default=S, help="completion service base URL")
    p.add_argument("--provider-timeout", type=float, default=S, help="seconds per request")
    p.add_argument("-v", "--verbose", action="count", default=S)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="colt", parents=[common],
                                     description="Repository-level code completion data pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    sub.add_parser("run-all", parents=[common], help="run every stage in order")
    sub.add_parser("config", parents=[common], help="print the effective configuration")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    ns = vars(args)
    cfg = PipelineConfig.load(ns["config"]) if "config" in ns else PipelineConfig()
    if "seed" in ns:
        cfg.seed = ns["seed"]
    if "jobs" in ns:
        cfg.jobs = ns["jobs"]
    if "out" in ns:
        cfg.out_dir = ns["out"]
    if "corpus" in ns:
        cfg.corpus_root = ns["corpus"]
    if "provider" in ns:
        cfg.preference.provider = ns["provider"]
    if "provider_url" in ns:
        cfg.preference.provider_url = ns["provider_url"]
    if "provider_timeout" in ns:
        cfg.preference.provider_timeout = ns["provider_timeout"]
    return cfg.validate()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(getattr(args, "verbose", 0), logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "config":
            sys.stdout.write(cfg.to_toml())
            return EXIT_OK
        pipe = Pipeline(cfg, force=getattr(args, "force", False))
        if args.command == "run-all":
            pipe.run_all()
        else:
            pipe.run(args.command)
    except (ConfigError, dedup.ConfigError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except preference.ProviderError as exc:
        log.error("provider error: %s", exc)
        return EXIT_PROVIDER
    except _PIPELINE_ERRORS as exc:
        log.error("pipeline error: %s", exc)
        return EXIT_PIPELINE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
