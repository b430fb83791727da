"""Command line front end: run, sweep, analyze, validate.

Exit codes: 0 success, 1 runtime failure (simulation fault, unreadable
results), 2 usage or configuration errors. The only nondeterminism is an
omitted --seed, which is generated once and printed so the run can be
reproduced.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import secrets
import sys
from importlib import resources

from .config import ConfigError, load_config
from .department import METRIC_FIELDS, run_replication
from .experiments import (
    format_summary_table,
    load_results,
    results_to_cells,
    run_sweep,
    save_results,
    summarize,
)
from .kernel import SimulationFault
from .stats import anova_two_way, levene_test, tukey_hsd

CONFIG_DIR_ENV = "RETAILSIM_CONFIG_DIR"
DEFAULT_CONFIG_FILES = ("dept_atv.toml", "dept_ww.toml")


def resolve_config_path(name, extra_dir=None):
    """Find a config by path or name: cwd, --config-dir, env dir, packaged."""
    tried = []
    names = [name] if name.endswith(".toml") else [name, name + ".toml"]
    dirs = [None]
    if extra_dir:
        dirs.append(extra_dir)
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if env_dir:
        dirs.append(env_dir)
    for candidate_dir in dirs:
        for base in names:
            path = os.path.join(candidate_dir, base) if candidate_dir else base
            if os.path.isfile(path):
                return path
            tried.append(path)
    packaged = resources.files("retailsim") / "configs"
    for base in names:
        candidate = packaged / base
        if candidate.is_file():
            return str(candidate)
        tried.append(str(candidate))
    raise ConfigError(f"config {name!r} not found; tried: {', '.join(tried)}")


def _fmt_metric(value):
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fmt_p(p):
    if math.isnan(p):
        return "undefined"
    return f"{p:.6g}"


def _fmt_f(f):
    if math.isnan(f):
        return "undefined (zero within-cell variance)"
    return f"{f:.2f}"


# ---------------------------------------------------------------------------
# Subcommands


def cmd_run(args):
    config = load_config(resolve_config_path(args.config))
    staffing = config.staffing
    overrides = {
        "cashiers": args.cashiers,
        "normal_sellers": args.normal_sellers,
        "expert_sellers": args.expert_sellers,
        "section_managers": args.section_managers,
    }
    supplied = {k: v for k, v in overrides.items() if v is not None}
    if supplied:
        staffing = dataclasses.replace(staffing, **supplied)
    if args.weeks is not None:
        if args.weeks < 1:
            raise ConfigError(f"horizon must be >= 1 day, got --weeks {args.weeks}")
        horizon = dataclasses.replace(config.horizon, days=args.weeks * 7)
        config = dataclasses.replace(config, horizon=horizon)
    seed = args.seed if args.seed is not None else secrets.randbits(63)
    print(f"seed: {seed}")
    metrics = run_replication(config, staffing=staffing, seed=seed)
    for name in METRIC_FIELDS:
        print(f"{name}: {_fmt_metric(getattr(metrics, name))}")
    if args.out:
        import csv

        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(METRIC_FIELDS)
            writer.writerow(
                ["" if getattr(metrics, n) is None else _fmt_metric(getattr(metrics, n)) for n in METRIC_FIELDS]
            )
        print(f"metrics written to {args.out}")
    return 0


def cmd_sweep(args):
    if args.reps < 1:
        raise ConfigError(f"--reps must be >= 1, got {args.reps}")
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    configs = {}
    for name in args.configs:
        cfg = load_config(resolve_config_path(name, args.config_dir))
        if cfg.label in configs:
            raise ConfigError(f"duplicate department label {cfg.label!r} in sweep configs")
        configs[cfg.label] = cfg
    rows = run_sweep(
        args.experiment,
        configs,
        replications=args.reps,
        base_seed=args.base_seed,
        jobs=args.jobs,
    )
    save_results(rows, args.out)
    print(f"{len(rows)} replications written to {args.out}")
    print()
    print("mean transactions per cell:")
    print(format_summary_table(summarize(rows, "transactions"), "transactions"))
    if args.experiment == "empowerment":
        print()
        print("mean cashier utilization per cell:")
        print(
            format_summary_table(
                summarize(rows, "cashier_utilization"), "cashier_utilization"
            )
        )
        print()
        print("mean refund satisfaction per cell:")
        print(
            format_summary_table(
                summarize(rows, "refund_satisfaction"), "refund_satisfaction"
            )
        )
    return 0


def cmd_analyze(args):
    try:
        rows = load_results(args.results)
    except OSError as exc:
        print(f"error: cannot read {args.results}: {exc}", file=sys.stderr)
        return 1
    if not rows:
        raise ValueError(f"{args.results} holds no result rows")
    experiments = {row.experiment for row in rows}
    if len(experiments) != 1:
        raise ValueError(f"results mix experiments {sorted(experiments)}; analyze one at a time")
    experiment = experiments.pop()
    metric = args.metric
    departments, levels, data = results_to_cells(rows, metric)
    table = anova_two_way(data, factor_names=("department", experiment))

    print(f"Two-way ANOVA on {metric} ({experiment} sweep, "
          f"{len(departments)} departments x {len(levels)} levels)")
    df_w = table.within.df
    for effect in table.effects():
        print(
            f"  {effect.name}: F({effect.df}, {df_w}) = {_fmt_f(effect.f)}, "
            f"p = {_fmt_p(effect.p)}"
        )
    print(
        f"  within: SS = {table.within.ss:.6g}, df = {df_w}, "
        f"MS = {table.within.ms:.6g}"
    )
    if table.degenerate:
        print("  note: zero within-cell variance; F ratios are undefined")

    flat_groups = [cell for dept_cells in data for cell in dept_cells]
    lev = levene_test(flat_groups)
    print(
        f"Levene (mean-centered) across {len(flat_groups)} cells: "
        f"W({lev.df1}, {lev.df2}) = {_fmt_f(lev.w)}, p = {_fmt_p(lev.p)}"
    )
    if lev.degenerate:
        print("  note: zero spread in absolute deviations; W is undefined")
    elif lev.p < 0.05:
        print("  note: variance homogeneity rejected at alpha = 0.05; "
              "interpret F tests at a stricter alpha (e.g. 0.01)")

    tukey = None
    if table.degenerate:
        print(f"Tukey HSD on {experiment} levels: skipped (degenerate ANOVA)")
    else:
        import numpy as np

        arr = np.asarray(data, dtype=float)
        level_means = arr.mean(axis=(0, 2))
        n_per_level = arr.shape[0] * arr.shape[2]
        tukey = tukey_hsd(level_means, n_per_level, table.within.ms, df_w)
        print(f"Tukey HSD on {experiment} levels (pooled over departments):")
        for r in tukey:
            mark = "*" if r.significant else " "
            print(
                f"  {levels[r.group_i]!s:>6} vs {levels[r.group_j]!s:<6} "
                f"diff = {r.diff:12.4f}  q = {r.q_stat:9.4f}  "
                f"p = {_fmt_p(r.p_value)} {mark}"
            )

    out = args.out
    if out is None:
        root, _ = os.path.splitext(args.results)
        out = root + ".analysis.csv"
    _write_analysis_csv(out, metric, table, lev, tukey, levels)
    print(f"analysis written to {out}")
    return 0


def _write_analysis_csv(path, metric, table, lev, tukey, levels):
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["section", "name", "ss", "df1", "df2", "ms", "statistic", "p", "significant"]
        )

        def num(x):
            if x is None or (isinstance(x, float) and math.isnan(x)):
                return ""
            return repr(float(x))

        df_w = table.within.df
        for effect in table.effects():
            writer.writerow(
                ["anova", effect.name, num(effect.ss), effect.df, df_w,
                 num(effect.ms), num(effect.f), num(effect.p), ""]
            )
        writer.writerow(
            ["anova", "within", num(table.within.ss), df_w, "",
             num(table.within.ms), "", "", ""]
        )
        writer.writerow(
            ["levene", f"{metric} cells", "", lev.df1, lev.df2, "",
             num(lev.w), num(lev.p), ""]
        )
        for r in tukey or ():
            writer.writerow(
                ["tukey", f"{levels[r.group_i]} vs {levels[r.group_j]}", "", "", "",
                 "", num(r.q_stat), num(r.p_value), str(r.significant).lower()]
            )


def cmd_validate(args):
    path = resolve_config_path(args.config)
    config = load_config(path)
    print(
        f"{path}: OK ({config.label}: {config.staffing.total()} staff, "
        f"{config.horizon.days} days of {config.horizon.trading_day_minutes:g} minutes)"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="retailsim",
        description="Retail department simulator: single runs, experiment sweeps, "
        "and statistical analysis of sweep results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one replication and print its metrics")
    p_run.add_argument("--config", required=True, help="config file path or name")
    p_run.add_argument("--cashiers", type=int, help="override staffing.cashiers")
    p_run.add_argument("--normal-sellers", type=int, dest="normal_sellers")
    p_run.add_argument("--expert-sellers", type=int, dest="expert_sellers")
    p_run.add_argument("--section-managers", type=int, dest="section_managers")
    p_run.add_argument(
        "--weeks", type=int, default=None,
        help="horizon in 7-day trading weeks (default: the config horizon, 10 weeks)",
    )
    p_run.add_argument("--seed", type=int, default=None,
                       help="replication seed (omitted: generated and printed)")
    p_run.add_argument("--out", help="also write metrics to a one-row CSV")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a full experiment sweep")
    p_sweep.add_argument(
        "--experiment", required=True, choices=("cashiers", "empowerment")
    )
    p_sweep.add_argument("--reps", type=int, default=20,
                         help="replications per cell (default 20)")
    p_sweep.add_argument("--base-seed", type=int, default=1, dest="base_seed")
    p_sweep.add_argument("--out", default="results.csv",
                         help="results CSV path (default results.csv)")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="worker processes (default 1)")
    p_sweep.add_argument("--config-dir", dest="config_dir",
                         help="directory searched for config files first")
    p_sweep.add_argument(
        "--configs", nargs="+", default=list(DEFAULT_CONFIG_FILES),
        help="department config files (default: the two shipped departments)",
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analyze", help="ANOVA / Levene / Tukey on sweep results")
    p_an.add_argument("--results", required=True, help="results CSV from sweep")
    p_an.add_argument("--metric", default="transactions",
                      help=f"one of: {', '.join(METRIC_FIELDS)}")
    p_an.add_argument(
        "--out",
        help="path for the machine-readable analysis CSV "
        "(default: <results>.analysis.csv next to the input)",
    )
    p_an.set_defaults(func=cmd_analyze)

    p_val = sub.add_parser("validate", help="check a config file and exit")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
