"""Command-line entry point: ``ehmac <subcommand> [--config FILE] [--preset NAME] ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import ConfigError, ExperimentConfig, PRESETS, csv_text, run, write_outputs

logger = logging.getLogger("ehmac")

SUBCOMMAND_METHODS = {
    "solve": ["sne"],
    "heuristic": ["heuristic"],
    "baselines": ["ebp", "nbp"],
    "bounds": ["upper_bound"],
}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ehmac", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("solve", "symmetric Nash equilibrium policy"),
        ("heuristic", "closed-form heuristic policy and its bounds"),
        ("baselines", "energy- and network-balanced baselines (plus gop when e_max = 1)"),
        ("bounds", "network upper bound"),
        ("simulate", "Monte-Carlo validation of the configured methods"),
        ("sweep", "full parameter sweep (figure data)"),
        ("verify", "acceptance checks with measured values and thresholds"),
    ]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=Path, help="JSON experiment config")
        sp.add_argument("--preset", choices=sorted(PRESETS))
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _load(args: argparse.Namespace, overrides: dict) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
        if args.preset:
            raise ConfigError("use either --config or --preset")
    elif args.preset:
        cfg = ExperimentConfig.preset(args.preset)
    else:
        cfg = ExperimentConfig.from_dict({}, name=args.command)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    if cfg.simulate:
        cfg.check_sim()
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    return cfg


def _verify(args: argparse.Namespace) -> int:
    from .acceptance import run_suite

    cfg = _load(args, {})
    checks = run_suite(with_simulation=cfg.simulate, scale=cfg.tolerance_scale,
                       seed=cfg.seed)
    if not cfg.simulate:
        print("simulation disabled in config: running the property-only subset")
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            return _verify(args)
        overrides: dict = {}
        if args.command in SUBCOMMAND_METHODS:
            overrides["methods"] = list(SUBCOMMAND_METHODS[args.command])
            overrides["simulate"] = False
        elif args.command == "simulate":
            overrides["simulate"] = True
        cfg = _load(args, overrides)
        if args.command == "baselines" and all(e == 1 for e in cfg.e_max):
            cfg.methods.append("gop")
        if args.command != "sweep":
            cfg.name = args.command
        rows = run(cfg, threads=max(1, args.threads))
        csv_path, json_path = write_outputs(cfg, rows, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(csv_text(rows))
    flagged = [r for r in rows if r["status"] != "ok"]
    for r in flagged:
        print(f"flagged: U={r['U']} beta={r['beta']} e_max={r['e_max']} {r['method']}: {r['status']}",
              file=sys.stderr)
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
