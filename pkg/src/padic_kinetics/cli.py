"""Command-line entry point.

    padic-kinetics glass --config glass.json --out results/glass
    padic-kinetics protein --out results/protein
    padic-kinetics oracle-compare --config glass.json
    padic-kinetics mc --config protein.json --paths 100000 --seed 7
    padic-kinetics custom --config my_landscape.json
    padic-kinetics init-config glass > glass.json

Without ``--config`` the built-in scenario of the same name is used. Output
goes to ``--out``, else ``$PADIC_KINETICS_OUT/<command>``, else
``./padic-kinetics-out/<command>``.

Exit codes: 0 success, 2 config error, 3 numerical tolerance breach, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import DEFAULTS, ScenarioConfig, default_config, load_config
from .exceptions import ConfigError, NumericalError, UsageError
from .scenarios import (
    RUNNERS,
    default_output_dir,
    run_mc,
    run_oracle_compare,
    write_bundle,
)

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("padic_kinetics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="padic-kinetics",
        description="Master-equation scenarios on hierarchical (p-adic) energy landscapes.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_scenario):
        p.add_argument("--config", help=f"scenario JSON (default: built-in {default_scenario!r})")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="Monte Carlo seed (overrides the config)")
        p.add_argument("--paths", type=int, help="Monte Carlo paths (overrides the config)")
        p.add_argument("--jobs", type=int, help="worker processes for parameter sweeps")

    for name, default, text in [
        ("glass", "glass", "fast-cooling glass scenario, one run per quench target"),
        ("protein", "protein", "protein folding under a temperature ramp"),
        ("oracle-compare", "glass", "eigenvalues, dense trajectories and Monte Carlo against the spectral solver"),
        ("mc", "protein", "Monte Carlo occupancy of the initial ball"),
        ("custom", None, "arbitrary landscape described by the config"),
    ]:
        p = sub.add_parser(name, help=text)
        common(p, default)
        p.set_defaults(default_scenario=default)
        if name == "oracle-compare":
            p.add_argument("--skip-mc", action="store_true", help="only eigenvalues and trajectories")
    init = sub.add_parser("init-config", help="print a built-in scenario config as JSON")
    init.add_argument("name", choices=sorted(DEFAULTS))
    return parser


def resolve_config(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.default_scenario:
        cfg = default_config(args.default_scenario)
    else:
        raise ConfigError(f"{args.command} needs --config")
    updates = {}
    if args.seed is not None:
        updates["oracle.seed"] = args.seed
    if args.paths is not None:
        updates["oracle.paths"] = args.paths
    if args.jobs is not None:
        updates["jobs"] = args.jobs
    return cfg.with_updates(**updates) if updates else cfg


def _run(args) -> int:
    if args.command == "init-config":
        sys.stdout.write(default_config(args.name).to_json())
        return EXIT_OK
    cfg = resolve_config(args)
    command = args.command
    if command in ("glass", "protein") and cfg.scenario != command:
        raise ConfigError(f"the {command} command needs a config with scenario={command!r}, got {cfg.scenario!r}")
    log.info("running %s", command)
    if command in RUNNERS:
        bundle = RUNNERS[command](cfg)
    elif command == "oracle-compare":
        bundle = run_oracle_compare(cfg, skip_mc=args.skip_mc)
    else:
        bundle = run_mc(cfg)
    out = write_bundle(bundle, args.out or default_output_dir(command))
    for name, passed in bundle.checks.items():
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
    print(f"wrote {out}")
    return EXIT_OK if bundle.ok else EXIT_TOLERANCE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _run(args)
    except UsageError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
