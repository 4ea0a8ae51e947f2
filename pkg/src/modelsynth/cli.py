"""Configuration-driven experiment runner.

Subcommands::

    modelsynth split  --config cfg.yaml [--out DIR] [--seed N] [--k N]
    modelsynth run    --config cfg.yaml [--out DIR] [overrides...]
    modelsynth report ARTIFACTS_DIR

Configs are YAML (JSON is also accepted; YAML is a superset).  Relative
paths inside a config resolve against the config file's directory.  A single
master seed derives every sub-seed (split, batch schedules, analyst CV
folds) via SHA-256 of "master:purpose", so one integer reproduces the whole
artifact tree byte for byte.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .analysts import AnalystProgram
from .data import (
    Dataset,
    RowValidationError,
    SchemaError,
    derive_seed,
    load_json,
    load_ozone_csv,
    save_json,
    split_random,
)
from .evaluate import MetricsReport, run_experiment
from .linmodel import ConditioningError, DivergenceError, ImproperPriorError, ResponseSpec
from .report import render_tables
from .synthesis import ProvenanceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    """The run configuration is syntactically or semantically invalid."""


@dataclass
class RunConfig:
    data_path: Path
    k: int
    seed: int
    protocols: list[str]
    modes: list[str]
    analyst_paths: list[Path]
    baselines: list[str]
    out_dir: Path
    formats: list[str]
    batch_size: int = 10
    response: ResponseSpec = field(default_factory=ResponseSpec)

    def validate(self):
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if self.seed is None:
            raise ConfigError("a master seed is required")
        # a missing data file is a data error (exit 3), caught at load time
        for p in self.analyst_paths:
            if not p.exists():
                raise ConfigError(f"analyst program file not found: {p}")
        for proto in self.protocols:
            if proto not in ("once", "ten"):
                raise ConfigError(f"unknown protocol {proto!r}")
        for mode in self.modes:
            if mode not in ("bayesian", "convex"):
                raise ConfigError(f"unknown synthesis mode {mode!r}")
        for fmt in self.formats:
            if fmt not in ("text", "json"):
                raise ConfigError(f"unknown format {fmt!r}")
        if not self.protocols:
            raise ConfigError("at least one protocol is required")


_PROTOCOL_FLAG = {"once": ["once"], "ten": ["ten"], "both": ["once", "ten"]}
_MODE_FLAG = {"bayes": ["bayesian"], "convex": ["convex"], "both": ["bayesian", "convex"]}


def _load_config_file(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return obj


def _normalize_modes(raw) -> list[str]:
    out = []
    for m in raw:
        m = str(m).lower()
        if m in ("bayes", "bayesian"):
            out.append("bayesian")
        elif m == "convex":
            out.append("convex")
        else:
            raise ConfigError(f"unknown synthesis mode {m!r}")
    return out


def build_run_config(args) -> RunConfig:
    cfg = {}
    base = Path(".")
    if args.config:
        path = Path(args.config)
        cfg = _load_config_file(path)
        base = path.parent

    def respath(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    data_path = Path(args.data) if args.data else respath(cfg.get("data", ""))
    if not str(data_path) or str(data_path) == ".":
        raise ConfigError("no data file given (config key 'data' or --data)")
    k = args.k if args.k is not None else int(cfg.get("k", 3))
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("no master seed given (config key 'seed' or --seed)")
    if args.protocol:
        protocols = _PROTOCOL_FLAG[args.protocol]
    else:
        protocols = [str(p) for p in cfg.get("protocols", ["once", "ten"])]
        protocols = [{"ten_by_ten": "ten"}.get(p, p) for p in protocols]
    if args.synthesis:
        modes = _MODE_FLAG[args.synthesis]
    else:
        modes = _normalize_modes(cfg.get("synthesis", ["bayes", "convex"]))
    out_dir = Path(args.out) if args.out else respath(cfg.get("out", "out"))
    if args.format == "both":
        formats = ["text", "json"]
    elif args.format:
        formats = [args.format]
    else:
        formats = [str(f) for f in cfg.get("formats", ["text", "json"])]
    run = RunConfig(
        data_path=data_path,
        k=int(k),
        seed=int(seed),
        protocols=protocols,
        modes=modes,
        analyst_paths=[respath(p) for p in cfg.get("analysts", [])],
        baselines=[str(b).upper() for b in cfg.get("baselines", ["AIC", "BIC"])],
        out_dir=out_dir,
        formats=formats,
        batch_size=int(cfg.get("batch_size", 10)),
        response=ResponseSpec.from_config(cfg.get("response", {})),
    )
    run.validate()
    return run


def load_programs(config: RunConfig) -> list[AnalystProgram]:
    programs = []
    for p in config.analyst_paths:
        obj = _load_config_file(p)
        try:
            programs.append(AnalystProgram.from_config(obj))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"invalid analyst program {p}: {e}") from None
    if len(programs) != config.k:
        raise ConfigError(
            f"need exactly k={config.k} analyst programs, got {len(programs)}")
    return programs


def _load_data(config: RunConfig) -> Dataset:
    return load_ozone_csv(config.data_path)


def cmd_split(args) -> int:
    config = build_run_config(args)
    data = _load_data(config)
    split = split_random(data, config.k, derive_seed(config.seed, "split"))
    config.out_dir.mkdir(parents=True, exist_ok=True)
    out = config.out_dir / "split.json"
    save_json(split.to_json(), out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = build_run_config(args)
    data = _load_data(config)
    programs = load_programs(config)
    result = run_experiment(
        data, programs, config.k, config.seed,
        protocols=tuple(config.protocols), modes=tuple(config.modes),
        baselines=tuple(config.baselines), batch_size=config.batch_size,
        response=config.response,
    )
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    save_json(result.split.to_json(), out / "split.json")
    if "json" in config.formats:
        save_json(result.report.to_json(), out / "report.json")
        weights_dir = out / "weights"
        weights_dir.mkdir(exist_ok=True)
        for (test_split, mode), traj in result.trajectories.items():
            save_json(traj, weights_dir / f"test{test_split}_{mode}.json")
    if "text" in config.formats:
        text = render_tables(result.report)
        (out / "tables.txt").write_text(text, encoding="utf-8")
        print(text)
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    art_dir = Path(args.artifacts)
    path = art_dir / "report.json"
    if not path.exists():
        print(f"no artifacts found in {art_dir}", file=sys.stderr)
        return EXIT_DATA
    report = MetricsReport.from_json(load_json(path))
    print(render_tables(report), end="")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelsynth",
        description="Split-data model synthesis: split, train, synthesize, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="YAML or JSON run configuration")
        p.add_argument("--data", help="CSV data file (overrides config)")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--k", type=int, help="number of splits (overrides config)")
        p.add_argument("--protocol", choices=["once", "ten", "both"],
                       help="which prediction protocols to run")
        p.add_argument("--synthesis", choices=["bayes", "convex", "both"],
                       help="which synthesis modes to run")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--format", choices=["text", "json", "both"],
                       help="report formats to write")

    p_split = sub.add_parser("split", help="write the seeded split assignment")
    add_common(p_split)
    p_split.set_defaults(func=cmd_split)

    p_run = sub.add_parser("run", help="run the full comparison grid")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="render tables from artifacts")
    p_report.add_argument("artifacts", help="directory holding report.json")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, RowValidationError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConditioningError, DivergenceError, ImproperPriorError,
            ProvenanceError, ArithmeticError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
