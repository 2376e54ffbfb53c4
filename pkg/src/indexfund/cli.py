"""Command-line experiment runner.

    indexfund --synthetic --seed 7 --output out/
    indexfund --config experiment.cfg --k_values 5,10 --jobs 4
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace

import numpy as np
import pandas as pd

from indexfund import backtest, clustering
from indexfund.config import ExperimentConfig, coerce, dump_config, read_config
from indexfund.data import compute_returns, format_float, load_panel, split_index, write_panel
from indexfund.errors import ConfigError, IndexFundError
from indexfund.synthetic import generate_synthetic

log = logging.getLogger("indexfund")

SUMMARY_COLUMNS = ["benchmark", "method", "k", "frequency", "tracking_error", "mean_turnover"]


def build_parser():
    p = argparse.ArgumentParser(
        prog="indexfund",
        description="Cluster a stock universe into k representatives, weight them, and "
                    "backtest tracking error and turnover against three benchmarks.")
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--synthetic", action="store_true", default=None,
                   help="generate a seeded one-factor dataset instead of reading CSVs")
    p.add_argument("--output", dest="output_dir", metavar="DIR")
    for f in fields(ExperimentConfig):
        if f.name in ("synthetic", "output_dir"):
            flags = [f"--{f.name}"] if f.name == "output_dir" else []
        else:
            flags = [f"--{f.name}"]
            if "_" in f.name:
                flags.append(f"--{f.name.replace('_', '-')}")
        if flags:
            p.add_argument(*flags, dest=f.name, metavar=f.name.upper(), default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args):
    values = {}
    if args.config:
        values.update(read_config(args.config))
    for f in fields(ExperimentConfig):
        given = getattr(args, f.name, None)
        if given is None:
            continue
        values[f.name] = given if isinstance(given, bool) else coerce(f.name, given)
    return replace(ExperimentConfig(), **values).validate()


def _atomic_write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_csv(frame, path, **kw):
    tmp = f"{path}.tmp"
    frame.to_csv(tmp, float_format=format_float, lineterminator="\n", **kw)
    os.replace(tmp, path)


def load_data(cfg):
    if cfg.synthetic:
        panel = generate_synthetic(cfg.synthetic_n, cfg.synthetic_days, cfg.seed)
        data_dir = os.path.join(cfg.output_dir, "data")
        os.makedirs(data_dir, exist_ok=True)
        prices_path = os.path.join(data_dir, "prices.csv")
        shares_path = os.path.join(data_dir, "shares.csv")
        write_panel(panel, prices_path, shares_path)
        return load_panel(prices_path, shares_path)
    return load_panel(cfg.prices_path, cfg.shares_path)


def cell_name(cell):
    return f"{cell.benchmark}_{cell.method}_k{cell.k}_{cell.frequency}"


def write_cell(cell, tickers, cell_dir):
    base = os.path.join(cell_dir, cell_name(cell))
    diffs = cell.daily_diffs.to_frame()
    diffs.index = diffs.index.strftime("%Y-%m-%d")
    diffs.index.name = "date"
    _atomic_csv(diffs, f"{base}_diffs.csv")
    for suffix, w in (("weights", cell.weights), ("benchmark", cell.benchmark_weights)):
        frame = pd.DataFrame(w, index=cell.rebalance_dates.strftime("%Y-%m-%d"),
                             columns=list(tickers))
        frame.index.name = "date"
        if suffix == "weights":
            frame.insert(0, "turnover", [np.nan if t is None else t
                                         for t in cell.turnover_series])
            frame.insert(1, "ex_ante_tracking_error", cell.ex_ante)
        _atomic_csv(frame, f"{base}_{suffix}.csv")


def summary_frame(cells):
    return pd.DataFrame([[c.benchmark, c.method, c.k, c.frequency, c.tracking_error,
                          c.mean_turnover] for c in cells], columns=SUMMARY_COLUMNS)


def run(cfg):
    """Run the configured grid and write every output under `cfg.output_dir`."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    panel = load_data(cfg)
    too_big = [k for k in cfg.k_values if k > panel.n]
    if too_big:
        raise ConfigError(f"k_values {too_big} exceed the universe of {panel.n} stocks")

    returns = compute_returns(panel)
    caps = panel.market_caps()
    train_rows = split_index(len(returns), cfg.train_fraction)
    log.info("universe n=%d, %d train / %d test rows", panel.n, train_rows,
             len(returns) - train_rows)

    executor = ProcessPoolExecutor(cfg.jobs) if cfg.jobs > 1 else None
    try:
        cells, solutions = backtest.run_grid(
            returns, caps, train_rows, cfg.k_values, cfg.frequencies, cfg.benchmarks,
            cfg.methods, cfg.turnover_bound, cfg.recluster, executor=executor)
    finally:
        if executor is not None:
            executor.shutdown()

    cluster_dir = os.path.join(cfg.output_dir, "clusters")
    cell_dir = os.path.join(cfg.output_dir, "cells")
    os.makedirs(cluster_dir, exist_ok=True)
    os.makedirs(cell_dir, exist_ok=True)
    for k, sol in solutions.items():
        path = os.path.join(cluster_dir, f"k{k}.csv")
        clustering.write_solution(sol, panel.tickers, f"{path}.tmp")
        os.replace(f"{path}.tmp", path)
    for cell in cells:
        write_cell(cell, panel.tickers, cell_dir)

    summary = summary_frame(cells)
    _atomic_csv(summary, os.path.join(cfg.output_dir, "summary.csv"), index=False)
    _atomic_write_text(os.path.join(cfg.output_dir, "config.txt"), dump_config(cfg))
    return summary


def format_grid(summary):
    table = summary.pivot_table(index=["benchmark", "method", "k"], columns="frequency",
                                values="tracking_error", sort=False)
    return "annualized tracking error\n" + table.to_string(float_format=lambda v: f"{v:.4f}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        summary = run(cfg)
    except IndexFundError as exc:
        print(f"error [{exc.module}]: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error [data_ingest]: file not found: {exc.filename}", file=sys.stderr)
        return 2
    print(format_grid(summary))
    print(f"{len(summary)} cells written to {cfg.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
