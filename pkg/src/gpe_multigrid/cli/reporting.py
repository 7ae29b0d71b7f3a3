"""
reporting.py

Writers for report.json and the CSV tables. CSV files are UTF-8 with line-feed line
endings; empty cells stand for missing values.

Author: Nathan Swanson
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from pathlib import Path

from gpe_multigrid.models import LevelRecord, SolveReport

LEVELS_HEADER = (
    "level",
    "n_dofs",
    "lambda",
    "scf_iters",
    "mg_cycles",
    "t_linear_s",
    "t_nonlinear_s",
    "t_total_s",
    "err_lambda",
)
BENCH_HEADER = ("method", "zeta", "level", "n_dofs", "t_total_s")
ADAPT_HEADER = ("iter", "n_dofs", "lambda", "total_eta", "t_total_s")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_cell(v) for v in row] for row in rows)
    return path


def write_report(report: SolveReport, out_dir: Path) -> Path:
    path = out_dir / "report.json"
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def read_report(path: Path) -> SolveReport:
    return SolveReport.model_validate_json(path.read_text(encoding="utf-8"))


def write_levels(levels: Sequence[LevelRecord], out_dir: Path) -> Path:
    rows = (
        (r.level, r.n_dofs, r.eigenvalue, r.scf_iters, r.mg_cycles, r.t_linear, r.t_nonlinear, r.t_total, r.err_lambda)
        for r in levels
    )
    return write_csv(out_dir / "levels.csv", LEVELS_HEADER, rows)


def write_bench(rows: Iterable[tuple[str, float, int, int, float]], out_dir: Path) -> Path:
    return write_csv(out_dir / "bench.csv", BENCH_HEADER, rows)


def write_adapt(levels: Sequence[LevelRecord], out_dir: Path) -> Path:
    rows = ((r.level, r.n_dofs, r.eigenvalue, r.total_eta, r.t_total) for r in levels)
    return write_csv(out_dir / "adapt.csv", ADAPT_HEADER, rows)
