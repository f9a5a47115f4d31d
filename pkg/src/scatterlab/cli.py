"""Command line entry point.

    scatterlab simulate      --config run.toml --out runs/a
    scatterlab verify        --config pinned:verify_nls --seed 7
    scatterlab wave-operator --config pinned:wave_nls
    scatterlab decay         --config pinned:decay_nls
    scatterlab sweep         --config pinned:wave_nls --axis p=2.2,2.5,2.8

Exit codes: 0 ok, 2 config error, 3 numerical abort, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .config import ConfigError, parse_config, read_config_text
from .runner import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, parse_axis, run, sweep

VERBS = {
    "simulate": "simulate",
    "verify": "verify-estimates",
    "wave-operator": "wave-operator",
    "decay": "decay-probe",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="TOML file, or pinned:NAME for a bundled config")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="rng seed (required by verify unless set in the config)")
    p.add_argument("--strict-boundary", action="store_true", help="abort when mass reaches the box edge")
    p.add_argument("--checkpoint-every", type=int, metavar="N", help="write a field checkpoint every N steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scatterlab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        _common(sub.add_parser(verb, help=f"run the {VERBS[verb]} experiment"))
    sw = sub.add_parser("sweep", help="run a config over the cross product of parameter axes")
    _common(sw)
    sw.add_argument("--axis", action="append", default=[], metavar="NAME=V1,V2", help="axis over p, gamma, T, n or dt")
    sw.add_argument("--workers", type=int, default=1, help="concurrent runs")
    sw.add_argument("--experiment", choices=sorted(VERBS.values()), help="override the config's experiment")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    out: dict = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.out is not None:
        out["output.dir"] = args.out
    if args.strict_boundary:
        out["output.strict_boundary"] = True
    if args.checkpoint_every is not None:
        out["output.checkpoint_every"] = args.checkpoint_every
    return out


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = _overrides(args)
    try:
        text = read_config_text(args.config)
        if args.verb == "sweep":
            if not args.axis:
                raise ConfigError("sweep needs at least one --axis")
            if args.experiment:
                overrides["experiment"] = args.experiment
            axes = [parse_axis(a) for a in args.axis]
            # validate the template before launching anything
            template = parse_config(text, overrides)
            rows = sweep(text, axes, args.out or template.output.dir, overrides, args.workers)
            failed = [r for r in rows if r["exit_code"] != EXIT_OK]
            print(f"sweep: {len(rows)} runs, {len(failed)} failed")
            return EXIT_ABORT if failed else EXIT_OK
        overrides["experiment"] = VERBS[args.verb]
        cfg = parse_config(text, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    warnings.simplefilter("default")
    result = run(cfg)
    if result.error:
        print(result.error, file=sys.stderr)
    checks = result.report.get("checks")
    summary = {"exit_code": result.exit_code, "out": str(result.out_dir)}
    if checks is not None:
        summary["checks"] = checks
    print(json.dumps(summary, indent=2))
    if result.exit_code == EXIT_VERIFY:
        print("verification failed", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
