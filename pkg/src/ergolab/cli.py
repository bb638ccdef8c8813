"""Command line interface: validate, run, and sweep experiment configs.

Configs are JSON or TOML files (see ``ExperimentConfig``).  ``run`` writes a
CSV, a JSON summary, and a plot script into the output directory and exits
0 on success, 1 on an invalid config, 2 on a budget violation.  ``sweep``
expands a config with a ``grid`` section (dotted keys to lists of values)
into the cartesian product of runs.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys

from .errors import ErgolabError, SizeError
from .experiments import ExperimentConfig, run_experiment, validate_config, write_outputs

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BUDGET = 2


def _load_raw(path: str) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        import tomli

        return tomli.loads(raw.decode("utf-8"))
    return json.loads(raw.decode("utf-8"))


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    data = cfg.to_dict()
    if args.out is not None:
        data["output"] = args.out
    if getattr(args, "seed_count", None):
        seeds = dict(data.get("seeds", {}))
        seeds.pop("list", None)
        seeds.setdefault("base", 1)
        seeds["count"] = args.seed_count
        data["seeds"] = seeds
    return ExperimentConfig.from_dict(data)


def _cmd_validate(args) -> int:
    try:
        cfg = ExperimentConfig.from_file(args.config)
    except (OSError, ValueError, KeyError, ErgolabError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = validate_config(_apply_overrides(cfg, args))
    for line in report.lines():
        print(line)
    return EXIT_OK


def _run_one(cfg: ExperimentConfig, threads: int) -> int:
    report = validate_config(cfg)
    if not report.ok:
        for line in report.lines():
            print(line, file=sys.stderr)
        return EXIT_INVALID
    try:
        result = run_experiment(cfg, threads=threads)
    except SizeError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        if exc.suggested_spacing is not None:
            print(f"suggested grid spacing: {exc.suggested_spacing:g}", file=sys.stderr)
        return EXIT_BUDGET
    except ErgolabError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    paths = write_outputs(result, cfg.output)
    for kind, path in sorted(paths.items()):
        print(f"{kind}: {path}")
    return EXIT_OK


def _cmd_run(args) -> int:
    try:
        cfg = _apply_overrides(ExperimentConfig.from_file(args.config), args)
        if cfg.observable is not None:
            with open(cfg.observable, "rb"):
                pass
    except (OSError, ValueError, KeyError, ErgolabError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return _run_one(cfg, args.threads)


def _expand_grid(base: dict, grid: dict) -> list[dict]:
    keys = sorted(grid)
    combos = itertools.product(*(grid[k] for k in keys))
    out = []
    for combo in combos:
        data = json.loads(json.dumps(base))
        for key, value in zip(keys, combo):
            node = data
            parts = key.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        out.append(data)
    return out


def _cmd_sweep(args) -> int:
    try:
        raw = _load_raw(args.config)
        base = raw["base"]
        grid = raw.get("grid", {})
    except (OSError, ValueError, KeyError) as exc:
        print(f"invalid sweep config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    worst = EXIT_OK
    for i, data in enumerate(_expand_grid(base, grid)):
        try:
            cfg = _apply_overrides(ExperimentConfig.from_dict(data), args)
        except (ValueError, KeyError, ErgolabError) as exc:
            print(f"invalid config in sweep entry {i}: {exc}", file=sys.stderr)
            return EXIT_INVALID
        subdir = f"{cfg.output}/sweep_{i:03d}_{cfg.config_hash()}"
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "output": subdir})
        print(f"sweep entry {i}: {subdir}")
        code = _run_one(cfg, args.threads)
        worst = max(worst, code)
        if code == EXIT_INVALID:
            return code
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ergolab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("validate", _cmd_validate), ("run", _cmd_run), ("sweep", _cmd_sweep)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON or TOML config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--threads", type=int, default=1, help="seed fan-out workers")
        p.add_argument("--seed-count", type=int, default=None, help="override the seed count")
        p.set_defaults(func=fn)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
