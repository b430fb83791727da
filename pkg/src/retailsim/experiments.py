"""Experiment harness: staffing and empowerment sweeps over both departments.

Each (department, level, replication) cell gets its own seed derived by
hashing the cell coordinates under a base seed, so adding replications or
reordering execution (including --jobs parallelism) never shifts any cell's
stream. Rows come back in (experiment, department, level, replication)
order, and result CSVs are written with round-trip float formatting so a
repeated sweep is byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import StaffingPlan
from .department import METRIC_FIELDS, RunMetrics, run_replication
from .stats import RunningStat

CASHIER_LEVELS = (1, 2, 3, 4, 5)
EMPOWERMENT_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
CSV_ID_FIELDS = ("experiment", "department", "level", "replication", "seed")

_EXPERIMENTS = ("cashiers", "empowerment")


def derive_cell_seed(base_seed, department, level, replication):
    """Stable 63-bit seed for one experiment cell."""
    text = f"{base_seed}|{department}|{level!r}|{replication}"
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def cashier_fill_plan(cashiers, total=10, expert_sellers=1, section_managers=1):
    """Staffing for the cashier sweep: a fixed headcount reallocated.

    The department always fields `total` staff including one expert seller
    and one section manager; whoever is not a cashier sells.
    """
    normal = total - cashiers - expert_sellers - section_managers
    if cashiers < 1 or normal < 0:
        raise ValueError(
            f"cannot staff {cashiers} cashiers from {total} total "
            f"(needs {expert_sellers} expert + {section_managers} manager)"
        )
    return StaffingPlan(cashiers, normal, expert_sellers, section_managers)


@dataclass(frozen=True)
class ExperimentDesign:
    """Factorial layout of one sweep: departments x levels x replications."""

    name: str
    departments: tuple
    levels: tuple
    replications: int = 20
    base_seed: int = 1

    def __post_init__(self):
        if self.name not in _EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.name!r}; pick from {_EXPERIMENTS}")
        if len(self.departments) < 1 or len(self.levels) < 1:
            raise ValueError("design needs at least one department and one level")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        seeds = [
            self.seed_for(d, lv, r)
            for d in self.departments
            for lv in self.levels
            for r in range(1, self.replications + 1)
        ]
        if len(set(seeds)) != len(seeds):
            raise ValueError("seed derivation collided across cells; change base_seed")

    def seed_for(self, department, level, replication):
        return derive_cell_seed(self.base_seed, department, level, replication)


@dataclass(frozen=True)
class ResultRow:
    """One replication outcome tagged with its cell coordinates."""

    experiment: str
    department: str
    level: object
    replication: int
    seed: int
    metrics: RunMetrics


def _cell_config(experiment, config, level):
    """Config and staffing actually simulated for one cell."""
    if experiment == "cashiers":
        return config, cashier_fill_plan(level)
    empowerment = dataclasses.replace(config.empowerment, p_empowered=level)
    return dataclasses.replace(config, empowerment=empowerment), config.staffing


def _run_cell(task):
    config, staffing, seed = task
    return run_replication(config, staffing=staffing, seed=seed)


def run_sweep(experiment, configs, replications=20, base_seed=1, jobs=1):
    """Run a full sweep; returns ResultRows in canonical order.

    `configs` maps department label to DepartmentConfig; label order is the
    row order. jobs > 1 fans replications out to worker processes without
    changing any result (each cell is seeded independently).
    """
    if experiment == "cashiers":
        levels = CASHIER_LEVELS
    elif experiment == "empowerment":
        levels = EMPOWERMENT_LEVELS
    else:
        raise ValueError(f"unknown experiment {experiment!r}; pick from {_EXPERIMENTS}")
    design = ExperimentDesign(
        name=experiment,
        departments=tuple(configs),
        levels=levels,
        replications=replications,
        base_seed=base_seed,
    )
    coords = []
    tasks = []
    for dept in design.departments:
        for level in design.levels:
            cell_cfg, staffing = _cell_config(experiment, configs[dept], level)
            for rep in range(1, design.replications + 1):
                seed = design.seed_for(dept, level, rep)
                coords.append((dept, level, rep, seed))
                tasks.append((cell_cfg, staffing, seed))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, tasks, chunksize=8))
    else:
        outcomes = [_run_cell(t) for t in tasks]
    return [
        ResultRow(experiment, dept, level, rep, seed, metrics)
        for (dept, level, rep, seed), metrics in zip(coords, outcomes)
    ]


# ---------------------------------------------------------------------------
# CSV round trip


def csv_header():
    return list(CSV_ID_FIELDS) + list(METRIC_FIELDS)


def _format_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results_csv(rows, fh):
    """Write rows to an open text file (newline='' per csv docs)."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(csv_header())
    for row in rows:
        record = [row.experiment, row.department, row.level, row.replication, row.seed]
        record += [getattr(row.metrics, name) for name in METRIC_FIELDS]
        writer.writerow([_format_value(v) for v in record])


def save_results(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        write_results_csv(rows, fh)


def _parse_level(text):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _parse_metric(text):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def load_results(path):
    """Read a results CSV back into ResultRows."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != csv_header():
            raise ValueError(
                f"{path}: unexpected results header; expected {csv_header()!r}"
            )
        rows = []
        for record in reader:
            if len(record) != len(header):
                raise ValueError(f"{path}: row {reader.line_num}: wrong field count")
            ident, metric_vals = record[:5], record[5:]
            metrics = RunMetrics(
                **{
                    name: _parse_metric(v)
                    for name, v in zip(METRIC_FIELDS, metric_vals)
                }
            )
            rows.append(
                ResultRow(
                    experiment=ident[0],
                    department=ident[1],
                    level=_parse_level(ident[2]),
                    replication=int(ident[3]),
                    seed=int(ident[4]),
                    metrics=metrics,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Summaries


@dataclass(frozen=True)
class CellSummary:
    experiment: str
    department: str
    level: object
    n: int
    mean: float
    sd: object  # None with a single replication


def summarize(rows, metric):
    """Per-cell mean and sample sd of one metric, in row encounter order."""
    if not rows:
        raise ValueError("no result rows to summarize")
    if metric not in METRIC_FIELDS:
        raise ValueError(f"unknown metric {metric!r}; pick from {METRIC_FIELDS}")
    order = []
    stats = {}
    for row in rows:
        key = (row.experiment, row.department, row.level)
        acc = stats.get(key)
        if acc is None:
            acc = RunningStat()
            stats[key] = acc
            order.append(key)
        value = getattr(row.metrics, metric)
        if value is None:
            raise ValueError(
                f"metric {metric!r} is absent for cell "
                f"{row.department}/{row.level} (role not staffed)"
            )
        acc.push(value)
    return [
        CellSummary(
            experiment=key[0],
            department=key[1],
            level=key[2],
            n=stats[key].n,
            mean=stats[key].mean,
            sd=stats[key].sd,
        )
        for key in order
    ]


def format_summary_table(summaries, metric):
    """Plain-text per-cell table; utilizations get 4 decimals, counts 2."""
    places = 4 if "utilization" in metric else 2
    lines = [f"{'department':<12} {'level':>8} {'n':>4} {'mean':>14} {'sd':>12}"]
    for s in summaries:
        sd = "" if s.sd is None else f"{s.sd:.{places}f}"
        lines.append(
            f"{s.department:<12} {s.level!s:>8} {s.n:>4} {s.mean:>14.{places}f} {sd:>12}"
        )
    return "\n".join(lines)


def results_to_cells(rows, metric):
    """Arrange rows as (departments, levels, values) for the two-way ANOVA.

    Departments keep first-seen order, levels sort ascending, and every
    (department, level) cell must hold the same number of replications.
    """
    if metric not in METRIC_FIELDS:
        raise ValueError(f"unknown metric {metric!r}; pick from {METRIC_FIELDS}")
    departments = []
    levels = set()
    cells = {}
    for row in rows:
        if row.department not in departments:
            departments.append(row.department)
        levels.add(row.level)
        value = getattr(row.metrics, metric)
        if value is None:
            raise ValueError(
                f"metric {metric!r} is absent for cell {row.department}/{row.level}"
            )
        cells.setdefault((row.department, row.level), []).append(value)
    levels = sorted(levels)
    counts = {key: len(v) for key, v in cells.items()}
    expected = len(departments) * len(levels)
    if len(cells) != expected or len(set(counts.values())) != 1:
        raise ValueError(
            "results are not a balanced department x level grid; "
            f"got cell counts {counts}"
        )
    data = [[cells[(d, lv)] for lv in levels] for d in departments]
    return departments, levels, data
