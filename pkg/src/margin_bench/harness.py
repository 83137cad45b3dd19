"""Command-line entry point and experiment orchestration.

Subcommands:

* ``margin-bench run --config <path> [--out <dir>] [--seed <int>] [--<key> <value>...]``
* ``margin-bench report <sweep csv>``
* ``margin-bench gen-config``

Config files are flat ``key = value`` lines with dotted section prefixes
(see ``gen-config`` output); any key can be overridden on the command line
by a flag of the same name.  Exit codes: 0 success, 1 usage, 2 data error,
3 numeric failure.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, _kernels
from .dataio import FORMATS, load_ratings, split_holdout
from .errors import ConfigError, DataError, MarginBenchError, NumericError
from .evaluate import (EvalPoint, SweepResult, evaluate_config,
                       find_optimal_threshold, read_sweep_csv,
                       sweep_thresholds, write_sweep_csv)
from .factor import Hyperparams, save_model, train
from .profitgen import ProfitConfig, assign_profits, load_profits, save_profits
from .purchase import RELEVANCE_DECAY, PurchaseModel
from .rerank import STRATEGIES, RerankConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_DEFAULT_GRID = "5.0:2.0:0.1"

CONFIG_TEMPLATE = """\
# margin-bench experiment configuration: flat `key = value` lines,
# overridable by command-line flags of the same dotted names.

data.path = ratings.dat
data.format = movielens-1m

split.test_fraction = 0.2
split.seed = 42

mf.k = 32
mf.epochs = 20
mf.learning_rate = 0.005
mf.regularization = 0.02
mf.init_scale = 0.1
mf.seed = 7

profit.mean = 2.0
profit.min = 0.0
profit.max = 4.0
profit.sigma = 1.0
profit.seed = 21
# replay a previously written profits.csv instead of drawing new values
# profit.file = runs/earlier/profits.csv

rerank.n = 10
# thresholds swept for profit-rerank: start:stop:step (descending) or a comma list
rerank.grid = 5.0:2.0:0.1

purchase.lambda = 1.0
purchase.r_max = 5.0

strategies = baseline,profit-rerank,expected-margin

out = runs/experiment
"""

_DEFAULTS = {
    "data.path": "ratings.dat",
    "data.format": "movielens-1m",
    "split.test_fraction": "0.2",
    "split.seed": "42",
    "mf.k": "32",
    "mf.epochs": "20",
    "mf.learning_rate": "0.005",
    "mf.regularization": "0.02",
    "mf.init_scale": "0.1",
    "mf.seed": "7",
    "profit.mean": "2.0",
    "profit.min": "0.0",
    "profit.max": "4.0",
    "profit.sigma": "1.0",
    "profit.seed": "21",
    "profit.file": "",
    "rerank.n": "10",
    "rerank.grid": _DEFAULT_GRID,
    "purchase.lambda": "1.0",
    "purchase.r_max": "5.0",
    "strategies": "baseline,profit-rerank,expected-margin",
    "out": "runs/experiment",
}


def parse_grid(text: str) -> np.ndarray:
    """'start:stop:step' (descending) or a comma-separated threshold list."""
    text = text.strip()
    try:
        if ":" in text:
            start_s, stop_s, step_s = text.split(":")
            start, stop, step = float(start_s), float(stop_s), float(step_s)
            if step <= 0 or start < stop:
                raise ValueError
            n_steps = int(round((start - stop) / step))
            values = np.round(start - step * np.arange(n_steps + 1), 9)
        else:
            values = np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise ConfigError(f"cannot parse threshold grid {text!r}") from None
    if values.size == 0:
        raise ConfigError("threshold grid is empty")
    return values


@dataclass
class ExperimentConfig:
    data_path: str
    data_format: str
    test_fraction: float
    split_seed: int
    hyperparams: Hyperparams
    profit: ProfitConfig
    profit_file: str
    n: int
    grid: np.ndarray
    decay: PurchaseModel
    strategies: tuple
    out_dir: str
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_keys(cls, keys: dict) -> "ExperimentConfig":
        unknown = set(keys) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        merged = dict(_DEFAULTS)
        merged.update(keys)

        def _float(key):
            try:
                return float(merged[key])
            except ValueError:
                raise ConfigError(f"{key} must be a number, got {merged[key]!r}") from None

        def _int(key):
            try:
                return int(merged[key])
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {merged[key]!r}") from None

        fmt = merged["data.format"]
        if fmt not in FORMATS:
            raise ConfigError(f"data.format must be one of {FORMATS}, got {fmt!r}")
        strategies = tuple(s.strip() for s in merged["strategies"].split(",") if s.strip())
        for s in strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; expected one of {STRATEGIES}")
        if not strategies:
            raise ConfigError("strategies list is empty")

        hp = Hyperparams(k=_int("mf.k"), epochs=_int("mf.epochs"),
                         learning_rate=_float("mf.learning_rate"),
                         regularization=_float("mf.regularization"),
                         init_scale=_float("mf.init_scale"), seed=_int("mf.seed"))
        profit = ProfitConfig(mean=_float("profit.mean"), min=_float("profit.min"),
                              max=_float("profit.max"), sigma=_float("profit.sigma"),
                              seed=_int("profit.seed"))
        decay = PurchaseModel(kind=RELEVANCE_DECAY, lam=_float("purchase.lambda"),
                              r_max=_float("purchase.r_max"))
        cfg = cls(data_path=merged["data.path"], data_format=fmt,
                  test_fraction=_float("split.test_fraction"),
                  split_seed=_int("split.seed"), hyperparams=hp, profit=profit,
                  profit_file=merged["profit.file"],
                  n=_int("rerank.n"), grid=parse_grid(merged["rerank.grid"]),
                  decay=decay, strategies=strategies, out_dir=merged["out"],
                  raw=merged)
        try:
            hp.validate()
            profit.validate()
            if not (0.0 <= cfg.test_fraction <= 1.0):
                raise ValueError(f"split.test_fraction must be in [0, 1], got {cfg.test_fraction}")
            if cfg.n < 1:
                raise ValueError(f"rerank.n must be >= 1, got {cfg.n}")
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cfg

    def fingerprint(self) -> str:
        """Hash over every parameter except the output directory."""
        canon = "\n".join(f"{k} = {self.raw[k]}"
                          for k in sorted(self.raw) if k != "out")
        return hashlib.sha256(canon.encode()).hexdigest()


def read_config_file(path: str) -> dict:
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    keys = {}
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`")
            key, value = line.split("=", 1)
            keys[key.strip()] = value.strip()
    return keys


def parse_overrides(tokens) -> dict:
    """``--key value`` pairs; ``--out`` and ``--seed`` are convenience names."""
    overrides = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or i + 1 >= len(tokens):
            raise ConfigError(f"cannot parse override {tok!r}; expected `--key value` pairs")
        key = tok[2:]
        if key == "seed":
            key = "mf.seed"
        overrides[key] = tokens[i + 1]
        i += 2
    return overrides


def run(config: ExperimentConfig) -> int:
    """Execute the full pipeline and write all artifacts to the output dir."""
    try:
        n_threads = int(os.environ.get("MARGIN_BENCH_THREADS", "0") or "0")
    except ValueError:
        raise ConfigError("MARGIN_BENCH_THREADS must be an integer") from None
    _kernels.set_thread_cap(n_threads)

    started = time.time()
    os.makedirs(config.out_dir, exist_ok=True)

    print(f"loading {config.data_path} ({config.data_format})")
    data = load_ratings(config.data_path, config.data_format)
    print(f"  {len(data)} ratings, {data.n_users} users, {data.n_items} items")
    split = split_holdout(data, config.test_fraction, config.split_seed)
    print(f"  split: {len(split.train)} train / {len(split.test)} test")

    print(f"training mf (k={config.hyperparams.k}, epochs={config.hyperparams.epochs})")
    model = train(split.train, config.hyperparams)
    model_path = os.path.join(config.out_dir, "model.npz")
    save_model(model, model_path)

    if config.profit_file:
        print(f"replaying profits from {config.profit_file}")
        profits = load_profits(config.profit_file, data.item_map)
    else:
        profits = assign_profits(data.n_items, config.profit)
    profit_path = os.path.join(config.out_dir, "profits.csv")
    save_profits(profits, data.item_ids, profit_path)

    fingerprint = config.fingerprint()
    artifacts = ["model.npz", "profits.csv"]
    for strategy in config.strategies:
        csv_name = f"sweep_{strategy}.csv"
        print(f"evaluating {strategy}")
        if strategy == "profit-rerank":
            sweep = sweep_thresholds(model, profits, split, config.grid,
                                     config.n, config.decay, fingerprint)
        else:
            point = evaluate_config(model, profits, split, strategy,
                                    RerankConfig(n=config.n), config.decay)
            if strategy == "baseline":
                sweep = SweepResult(baseline=point, points=(), fingerprint=fingerprint)
            else:
                base = evaluate_config(model, profits, split, "baseline",
                                       RerankConfig(n=config.n), config.decay)
                sweep = SweepResult(baseline=base, points=(point,),
                                    fingerprint=fingerprint)
        write_sweep_csv(sweep, os.path.join(config.out_dir, csv_name))
        artifacts.append(csv_name)

    manifest = {
        "version": __version__,
        "config": {k: config.raw[k] for k in sorted(config.raw)},
        "fingerprint": fingerprint,
        "artifacts": artifacts,
        "wall_clock_sec": round(time.time() - started, 3),
        "jit_enabled": _kernels.JIT_ENABLED,
    }
    with open(os.path.join(config.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"artifacts written to {config.out_dir}")
    return EXIT_OK


def _fmt_row(label: str, row: EvalPoint) -> str:
    return (f"  {label}: guaranteed ${row.avg_profit_guaranteed:.6f}, "
            f"relevance ${row.avg_profit_relevance:.6f}, "
            f"precision@n {row.precision_at_n:.6f}")


def report(csv_path: str) -> int:
    """Print a human-readable summary of one sweep CSV."""
    sweep = read_sweep_csv(csv_path)
    base = sweep.baseline
    print(f"sweep report for {csv_path}")
    print(_fmt_row("baseline (no re-ranking)", base))
    if not sweep.points:
        print("  no sweep points")
        return EXIT_OK
    for objective in ("guaranteed", "relevance"):
        thr, dollars = find_optimal_threshold(sweep, objective)
        print(f"  optimal threshold ({objective} purchase): "
              f"{thr:g} at ${dollars:.6f}")
    for target in (4.5, 4.0):
        match = [p for p in sweep.points if abs(p.threshold - target) < 1e-6]
        if not match:
            print(f"  threshold {target}: not in grid")
            continue
        p = match[0]
        print(f"  threshold {target}: profit gain {p.profit_gain_pct:.6f}%, "
              f"accuracy loss {p.accuracy_loss_pct:.6f}%")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="margin-bench",
        description="Profit-aware top-N re-ranking experiments")
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run the full experiment pipeline")
    run_p.add_argument("--config", required=True, help="path to a key=value config file")

    report_p = sub.add_parser("report", help="summarize a sweep CSV")
    report_p.add_argument("csv", help="path to a sweep CSV")

    sub.add_parser("gen-config", help="print a default config file")

    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit:
        return EXIT_USAGE

    try:
        if args.command == "gen-config":
            if extra:
                raise ConfigError(f"unexpected arguments: {' '.join(extra)}")
            sys.stdout.write(CONFIG_TEMPLATE)
            return EXIT_OK
        if args.command == "run":
            keys = read_config_file(args.config)
            keys.update(parse_overrides(extra))
            config = ExperimentConfig.from_keys(keys)
            return run(config)
        if args.command == "report":
            if extra:
                raise ConfigError(f"unexpected arguments: {' '.join(extra)}")
            return report(args.csv)
        parser.print_help()
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"margin-bench: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"margin-bench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"margin-bench: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MarginBenchError as exc:
        print(f"margin-bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
