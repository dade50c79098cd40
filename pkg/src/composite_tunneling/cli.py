"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, ExperimentConfig
from .eigen1d import GridTooNarrowError, UnderResolvedError
from .experiments import (
    run_alpha_sweep,
    run_classical,
    run_classical_comparison,
    run_effective_potentials,
    run_time_traces,
    validate,
)
from .tdse import NormIncreaseError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("composite_tunneling")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="composite-tunneling", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in EXPERIMENTS:
        p = sub.add_parser(verb)
        p.add_argument("--config", type=Path, help="YAML file layered over the built-in preset")
        p.add_argument("--out", type=Path, help="output directory (default: from config)")
        p.add_argument("--seed", type=int, help="override the ensemble seed")
        p.add_argument("--workers", type=int, help="worker processes for independent runs")
    return parser


def load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
        raw = {"preset": cfg.preset, **cfg.settings, "output_dir": cfg.output_dir, "workers": cfg.workers}
    raw["experiment"] = args.verb
    if args.workers is not None:
        raw["workers"] = args.workers
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["output_dir"] = str(args.out)
    return ExperimentConfig.from_dict(raw)


def _writable(path: Path):
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"{path} is not writable")


def run(args) -> int:
    cfg = load_config(args)
    out = Path(cfg.output_dir)
    if args.verb == "validate":
        results = validate(cfg, stream=sys.stdout)
        return EXIT_OK if all(r["ok"] for r in results) else EXIT_NUMERICAL
    _writable(out)
    if args.verb == "sweep":
        path = run_alpha_sweep(cfg, out)
        summary = {"sweep": str(path)}
    elif args.verb == "traces":
        summary = run_time_traces(cfg, out)
    elif args.verb == "zeff":
        summary = run_effective_potentials(cfg, out)
    elif args.verb == "classical":
        summary = run_classical(cfg, out)
    else:
        summary = run_classical_comparison(cfg, out)["orderings"]
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    manifest = json.loads((out / "manifest.json").read_text())
    return EXIT_NUMERICAL if manifest["failures"] else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NormIncreaseError, GridTooNarrowError, UnderResolvedError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
