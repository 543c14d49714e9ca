"""Command-line entry point: ``perfsim run`` and ``perfsim validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from pydantic import ValidationError

from . import __version__
from .config import load_config
from .scenarios import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

log = logging.getLogger("perfsim")


def _describe_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "invalid config:\n" + "\n".join(lines)


def _load(args):
    try:
        return load_config(args.config, getattr(args, "seed", None), getattr(args, "samples", None)), None
    except FileNotFoundError as exc:
        return None, str(exc)
    except json.JSONDecodeError as exc:
        return None, f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
    except ValidationError as exc:
        return None, _describe_validation(exc)
    except ValueError as exc:
        return None, f"invalid config: {exc}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perfsim", description="Strategic classification scenario runner")
    parser.add_argument("--version", action="version", version=f"perfsim {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its outputs")
    run.add_argument("--config", required=True, help="JSON config path or bundled config name")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--samples", type=int, default=None, help="override the population size n")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True, help="JSON config path or bundled config name")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg, problem = _load(args)
    if problem is not None:
        print(problem, file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: scenario={cfg.scenario} sha256={cfg.sha256()}")
        return EXIT_OK
    try:
        log.info("running %s (seed=%d, n=%d)", cfg.scenario, cfg.seed, cfg.n)
        paths = run_scenario(cfg, args.out)
    except Exception as exc:  # reported as a runtime failure, not a traceback
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
