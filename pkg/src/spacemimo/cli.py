"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 configuration error, 3 I/O error.
"""

import argparse
import os
import sys

import yaml

from . import acceptance
from .config import SEED_ENV, ConfigError, config_from_mapping, config_to_mapping, load_yaml, parse_config
from .mcsim import run_experiment
from .output import emit_csv

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _override(cfg, args):
    from dataclasses import replace

    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ConfigError("--workers", "must be at least 1")
        cfg = replace(cfg, workers=args.workers)
    return cfg


def _run_one(cfg, out):
    rows = run_experiment(cfg)
    emit_csv(rows, out, cfg.master_seed)
    print(f"{cfg.experiment}: {len(rows)} rows -> {out} (seed {cfg.master_seed})", file=sys.stderr)


def cmd_run(args):
    cfg = _override(parse_config(args.config), args)
    _run_one(cfg, args.output)
    return EXIT_OK


def load_sweep(path):
    """A sweep file holds ``experiments:`` (a list) and optional ``common:`` defaults."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = load_yaml(fh.read())
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict) or not isinstance(data.get("experiments"), list) or not data["experiments"]:
        raise ConfigError("experiments", "expected a non-empty list")
    extra = set(data) - {"experiments", "common"}
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown field")
    common = data.get("common") or {}
    if not isinstance(common, dict):
        raise ConfigError("common", "expected a mapping")
    cfgs = []
    for i, entry in enumerate(data["experiments"]):
        if not isinstance(entry, dict):
            raise ConfigError(f"experiments[{i}]", "expected a mapping")
        try:
            cfgs.append(config_from_mapping({**common, **entry}))
        except ConfigError as exc:
            raise ConfigError(f"experiments[{i}].{exc.path}", str(exc).split(": ", 1)[-1]) from None
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            cfgs = [c.with_seed(int(env)) for c in cfgs]
        except ValueError:
            raise ConfigError(SEED_ENV, "must be an integer") from None
    return cfgs


def cmd_sweep(args):
    cfgs = [_override(c, args) for c in load_sweep(args.config)]
    os.makedirs(args.output, exist_ok=True)
    for i, cfg in enumerate(cfgs):
        _run_one(cfg, os.path.join(args.output, f"{i:02d}_{cfg.experiment}.csv"))
    return EXIT_OK


def cmd_validate(args):
    only = None
    if args.only:
        try:
            only = {int(x) for x in args.only.split(",")}
        except ValueError:
            raise ConfigError("--only", "expected comma-separated criterion numbers") from None
    workers = args.workers or 1
    results = acceptance.run_all(workers=workers, only=only, echo=print)
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"FAILED: criterion {failed[0].number} ({failed[0].name}); {len(failed)} of {len(results)} failed")
        return EXIT_VALIDATION
    print(f"all {len(results)} criteria passed")
    return EXIT_OK


def cmd_describe(args):
    if args.config:
        cfg = parse_config(args.config)
    else:
        cfg = config_from_mapping({"experiment": args.experiment})
    cfg = _override(cfg, args)
    sys.stdout.write(yaml.safe_dump(config_to_mapping(cfg), sort_keys=False))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="spacemimo", description="Multi-satellite uplink MIMO experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, workers=True):
        p.add_argument("--seed", type=int, help=f"master seed (overrides {SEED_ENV} and the config)")
        if workers:
            p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("run", help="run one experiment and write a CSV")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every experiment of a sweep file into a directory")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the acceptance suite")
    p.add_argument("--workers", type=int)
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("describe", help="print the fully resolved configuration")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("config", nargs="?")
    src.add_argument("--experiment")
    common(p, workers=False)
    p.set_defaults(func=cmd_describe)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
