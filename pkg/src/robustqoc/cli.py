"""Command-line entry point: ``robustqoc run --task ... --out ...``."""

import argparse
import json
import logging
import sys
import warnings

from .crab import default_jobs
from .experiments import STRATEGIES, TASKS, run_experiment
from .io import ConfigError, emit_outputs, load_config

log = logging.getLogger("robustqoc")

STRATEGY_CHOICES = {"target-only": ("target-only",), "robust": ("robust",), "both": STRATEGIES}


def build_parser():
    parser = argparse.ArgumentParser(prog="robustqoc", description="Noise-robust quantum optimal control experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="optimize and evaluate one benchmark")
    run.add_argument("--task", required=True, choices=TASKS)
    run.add_argument("--config", help="flat 'key = value' config file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="overrides the config seed")
    run.add_argument("--strategy", choices=sorted(STRATEGY_CHOICES), default="both")
    run.add_argument("--jobs", type=int, help="parallel restarts (default: $ROBUSTQOC_JOBS or 1)")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def _fail(kind, message, code):
    json.dump({"status": "error", "error": kind, "message": message}, sys.stderr)
    sys.stderr.write("\n")
    return code


def run_command(args):
    cfg = load_config(args.config, task=args.task, seed=args.seed)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    report = run_experiment(cfg, STRATEGY_CHOICES[args.strategy], jobs=jobs)
    manifest = emit_outputs(report, args.out)
    summary = report.summary()
    for name in report.strategies:
        s = summary[name]
        log.info(
            "%s: D_eff %.4g, F(lambda=0) %.6f, F_specific %.6f, F_random mean %s",
            name, s["d_eff"], s["fidelity_lambda0"], s["specific_fidelity_max_lambda"], s["random_mean_max_lambda"],
        )
    if "specific_infidelity_ratio" in summary:
        log.info("infidelity ratio target-only/robust (specific noise): %s", summary["specific_infidelity_ratio"])
    json.dump({"status": "ok", "out": str(args.out), "files": [f["path"] for f in manifest["files"]]}, sys.stdout)
    sys.stdout.write("\n")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        run_command(args)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    except OSError as exc:
        return _fail("io", str(exc), 3)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        return _fail(type(exc).__name__, str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
