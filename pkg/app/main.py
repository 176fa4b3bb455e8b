# app/main.py
"""
Command-line entry point: python -m app.main <subcommand> [flags]
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import load_dotenv

from app.config import ExperimentConfig, apply_overrides, load_config
from app.core import parallel
from app.core.exceptions import ConfigError
from app.core.utils import get_env_value
from app.experiments.registry import experiment_registry
from app.utils.report_utils import write_csv, write_json, write_jsonl

load_dotenv()
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def configure_logging():
    level = get_env_value("LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def write_reports(name: str, result: Dict, config: ExperimentConfig) -> List[Path]:
    """<out>/<name>.json, <name>_<table>.csv per table, <name>.jsonl for sampled records"""
    out = Path(config.output.dir)
    stem = name.replace("-", "_")
    written = []
    if config.output.json_report:
        written.append(write_json(result["data"], out / f"{stem}.json"))
        if result.get("records") is not None:
            written.append(write_jsonl(result["records"], out / f"{stem}.jsonl"))
    if config.output.csv_report:
        for table, frame in sorted(result.get("tables", {}).items()):
            if frame is None or frame.empty:
                continue
            written.append(write_csv(frame, out / f"{stem}_{table}.csv"))
    return written


def run(subcommand: str, config: ExperimentConfig) -> int:
    """Dispatch one experiment and write its reports; returns the process exit code"""
    experiment = experiment_registry.get_experiment(subcommand)
    if experiment is None:
        logger.error(f"❌ Unknown subcommand {subcommand}")
        return EXIT_CONFIG

    parallel.set_threads(config.threads)
    result = experiment.run(config)
    if not result["success"]:
        return EXIT_CONFIG if result.get("error_type") == "config" else EXIT_FAILED

    write_reports(subcommand, result, config)
    return EXIT_OK if result["passed"] else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="Master seed (overrides the config)")
    common.add_argument("--out", help="Report directory")
    common.add_argument("--threads", type=int, help="Worker threads for replica fan-out")
    common.add_argument("--json", dest="json_report", action=argparse.BooleanOptionalAction, default=None,
                        help="Write the JSON report")
    common.add_argument("--csv", dest="csv_report", action=argparse.BooleanOptionalAction, default=None,
                        help="Write CSV tables")

    parser = argparse.ArgumentParser(description="Polya sum process experiments")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sample = sub.add_parser("sample", parents=[common], help="Sample configurations (JSON lines)")
    sample.add_argument("--method", choices=["levy", "urn"])
    sample.add_argument("--count", type=int)

    selfcheck = sub.add_parser("selfcheck-combinatorics", parents=[common], help="Exact combinatorial identities")
    selfcheck.add_argument("--m-max", dest="m_max", type=int)

    ensemble = sub.add_parser("ensemble", parents=[common], help="Conditional kernels vs rejection sampling")
    ensemble.add_argument("--kind", choices=["sites", "height", "both"])
    ensemble.add_argument("--n", type=int)
    ensemble.add_argument("--m", type=int)
    ensemble.add_argument("--k", type=int)
    ensemble.add_argument("--rho-b", dest="rho_b", type=float)
    ensemble.add_argument("--samples", type=int)

    boundary = sub.add_parser("boundary", parents=[common], help="Boundary parameter recovery")
    boundary.add_argument("--ensemble", choices=["sites", "height", "both"])

    ldp = sub.add_parser("ldp", parents=[common], help="Rate-function minimizers")
    ldp.add_argument("--u", type=float)
    ldp.add_argument("--v", type=float)
    ldp.add_argument("--z-ref", dest="z_ref", type=float)

    verify = sub.add_parser("verify", parents=[common], help="Identity conformance checks")
    verify.add_argument("--grid", choices=["default"])
    verify.add_argument("--size", type=int)

    posterior = sub.add_parser("posterior", parents=[common], help="Posterior concentration")
    posterior.add_argument("--statistic", choices=["profile", "sites", "height"])
    posterior.add_argument("--rho", type=float)
    posterior.add_argument("--K", dest="K", type=int)

    dist = sub.add_parser("dist-check", parents=[common], help="Goodness of fit of window statistics")
    dist.add_argument("--size", type=int)
    return parser


def _section_overrides(args: argparse.Namespace) -> Dict[str, Dict]:
    if args.subcommand == "sample":
        return {"sample": {"method": args.method, "count": args.count}}
    if args.subcommand == "selfcheck-combinatorics":
        return {"selfcheck": {"m_max": args.m_max}}
    if args.subcommand == "ensemble":
        return {"ensemble": {"kind": args.kind, "n": args.n, "m": args.m, "k": args.k,
                             "rho_b": args.rho_b, "samples": args.samples}}
    if args.subcommand == "boundary":
        return {"boundary": {"ensembles": [args.ensemble] if args.ensemble else None}}
    if args.subcommand == "ldp":
        return {"ldp": {"u": args.u, "v": args.v, "z_ref": args.z_ref}}
    if args.subcommand == "verify":
        return {"verify": {"grid": args.grid, "size": args.size}}
    if args.subcommand == "posterior":
        return {"posterior": {"statistic": args.statistic, "rho": args.rho, "K": args.K}}
    if args.subcommand == "dist-check":
        return {"dist_check": {"size": args.size}}
    return {}


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        config = apply_overrides(
            config,
            seed=args.seed,
            out=args.out,
            threads=args.threads,
            json_report=args.json_report,
            csv_report=args.csv_report,
            **_section_overrides(args),
        )
    except ConfigError as e:
        logger.error(f"❌ {e}")
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.subcommand, config)


if __name__ == "__main__":
    sys.exit(main())
