"""Command-line entry point.

    cilab simulate|sweep|scatter|stability|oracle [options]

Options mirror RunConfig; a ``--config FILE`` of flat ``key=value`` lines
supplies defaults that explicit flags override. Exit codes: 0 success,
1 configuration error, 2 runtime/numerical error, 3 oracle check failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import CilabError, InvalidArgumentError
from .harness import (
    RunConfig,
    default_n_values,
    run_oracle,
    run_scatter,
    run_stability,
    run_sweep,
    run_trajectory,
)

_COMMANDS = ("simulate", "sweep", "scatter", "stability", "oracle")

_FIELD_TYPES = {
    "rel_tol": float, "abs_tol": float, "t_max": float,
    "equilibrium_tol": float, "quad_abs_tol": float, "epsilon": float,
    "imitation_rate": float,
    "quad_max_panels": int, "grid_max": int, "grid_per_decade": int,
    "mc_samples": int, "population": int, "rounds": int, "threads": int,
    "full": bool,
}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArgumentError(message)


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(prog="cilab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scheme", action="append", dest="schemes",
                       choices=["binary", "market", "minority"])
        group = p.add_mutually_exclusive_group()
        group.add_argument("--n", action="append", type=int, dest="n_values")
        group.add_argument("--n-grid", type=str, default=None,
                           help="MAX[:PER_DECADE] sweep grid spec")
        seeds = p.add_mutually_exclusive_group()
        seeds.add_argument("--seeds", type=int, default=None,
                           help="use seeds 0..k-1")
        seeds.add_argument("--seed-list", type=int, nargs="+", default=None)
        p.add_argument("--init", action="append", dest="inits",
                       choices=["uniform", "concentrated"])
        p.add_argument("--full", action="store_true", default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--threads", type=int, default=None)
        for key, typ in _FIELD_TYPES.items():
            if key in ("threads", "full"):
                continue
            p.add_argument(f"--{key.replace('_', '-')}", type=typ,
                           dest=key, default=None)
    return parser


def _parse_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InvalidArgumentError(
                        f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as err:
        raise InvalidArgumentError(f"cannot read config file: {err}") from err
    return values


def _coerce(key: str, value: str):
    if key in ("schemes", "inits"):
        return value.split()
    if key in ("n_values", "seed_list"):
        return [int(v) for v in value.split()]
    if key == "seeds":
        return int(value)
    typ = _FIELD_TYPES.get(key)
    if typ is bool:
        return value.lower() in ("1", "true", "yes")
    if typ is None:
        if key in ("out", "out_dir", "n_grid"):
            return value
        raise InvalidArgumentError(f"unknown config key {key!r}")
    return typ(value)


def _resolve(args: argparse.Namespace) -> RunConfig:
    config = RunConfig(command=args.command)
    file_values = {}
    if args.config:
        file_values = {k: _coerce(k, v)
                       for k, v in _parse_config_file(args.config).items()}

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        if key in file_values:
            return file_values[key]
        return default

    config.full = bool(pick(args.full, "full", False))
    config.schemes = pick(args.schemes, "schemes", list(config.schemes))
    config.inits = pick(args.inits, "inits", list(config.inits))
    config.out_dir = pick(args.out, "out", config.out_dir)
    config.threads = int(pick(args.threads, "threads", 1))

    seeds_k = pick(args.seeds, "seeds", None)
    seed_list = pick(args.seed_list, "seed_list", None)
    if seeds_k is not None:
        config.seeds = list(range(int(seeds_k)))
    elif seed_list is not None:
        config.seeds = [int(s) for s in seed_list]

    grid = pick(args.n_grid, "n_grid", None)
    if grid is not None:
        parts = str(grid).split(":")
        config.grid_max = int(parts[0])
        if len(parts) > 1:
            config.grid_per_decade = int(parts[1])

    n_values = pick(args.n_values, "n_values", None)
    if n_values is not None:
        config.n_values = [int(v) for v in n_values]
    elif args.command != "sweep":
        config.n_values = default_n_values(args.command, config.full)

    for key in _FIELD_TYPES:
        if key in ("threads", "full"):
            continue
        value = pick(getattr(args, key, None), key, None)
        if value is not None:
            setattr(config, key, value)
    return config


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        config = _resolve(args)
    except InvalidArgumentError as err:
        print(f"cilab: config error: {err}", file=sys.stderr)
        return 1
    try:
        if config.command == "simulate":
            out = run_trajectory(config)
        elif config.command == "sweep":
            out = run_sweep(config)
        elif config.command == "scatter":
            out = run_scatter(config)
        elif config.command == "stability":
            out = run_stability(config)
        else:
            out, passed = run_oracle(config)
            print(f"wrote {out}")
            return 0 if passed else 3
        print(f"wrote {out}")
        return 0
    except InvalidArgumentError as err:
        print(f"cilab: config error: {err}", file=sys.stderr)
        return 1
    except CilabError as err:
        print(f"cilab: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
