"""
runs.py

The three batch runs behind the CLI. Each returns the process exit code on success and
lets GpeError propagate; the click layer maps errors to exit codes.

Author: Nathan Swanson
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np

from gpe_multigrid.cli.config import load_config
from gpe_multigrid.cli.reporting import write_adapt, write_bench, write_levels, write_report
from gpe_multigrid.fem.mesh import write_mesh
from gpe_multigrid.logger import gpe_logger
from gpe_multigrid.models import BenchMethod, Method, RunManifest, SolverConfig
from gpe_multigrid.solvers.adapt import adaptive_loop
from gpe_multigrid.solvers.driver import linear_reference_solve, solve
from gpe_multigrid.util.env_check import startup_info


def _prepare(manifest: RunManifest):
    config = load_config(manifest.config_path)
    out_dir = Path(manifest.out_dir)
    startup_info(manifest.command, out_dir)
    return config, out_dir


def run_solve(manifest: RunManifest) -> int:
    config, out_dir = _prepare(manifest)
    report = solve(config.solver)
    write_report(report, out_dir)
    write_levels(report.levels, out_dir)
    if config.solver.dump_mesh:
        write_mesh(report.eigenpair.space.mesh, out_dir / "mesh.txt")
    gpe_logger.info(f"lambda = {report.eigenvalue:.12f} on {report.n_dofs} dofs ({report.wall_clock:.2f}s)")
    return 0


def _median_times(runs: list[list]) -> list[tuple[int, int, float]]:
    """(level, n_dofs, median t_total) over repeated runs of the same configuration."""
    times: dict[tuple[int, int], list[float]] = defaultdict(list)
    for levels in runs:
        for record in levels:
            times[(record.level, record.n_dofs)].append(record.t_total)
    return [(level, n_dofs, float(np.median(t))) for (level, n_dofs), t in sorted(times.items())]


def bench_rows(solver: SolverConfig, methods, zeta_values, repetitions: int) -> list[tuple[str, float, int, int, float]]:
    rows = []
    for method in methods:
        if method == BenchMethod.DIRECT_LINEAR:
            runs = [linear_reference_solve(solver) for _ in range(repetitions)]
            rows += [(str(method), 0.0, *entry) for entry in _median_times(runs)]
            continue
        for zeta in zeta_values:
            cfg = solver.model_copy(update={"zeta": float(zeta), "method": Method(method.value)})
            runs = [solve(cfg).levels for _ in range(repetitions)]
            rows += [(str(method), float(zeta), *entry) for entry in _median_times(runs)]
            gpe_logger.info(f"bench {method} zeta={zeta}: finest t_total {rows[-1][-1]:.3f}s")
    return rows


def run_bench(manifest: RunManifest) -> int:
    config, out_dir = _prepare(manifest)
    rows = bench_rows(config.solver, config.bench.methods, config.bench.zeta_values, manifest.repetitions)
    write_bench(rows, out_dir)
    return 0


def run_adapt(manifest: RunManifest) -> int:
    config, out_dir = _prepare(manifest)
    report = adaptive_loop(config.solver, config.adapt)
    write_adapt(report.levels, out_dir)
    write_report(report, out_dir)
    if config.solver.dump_mesh:
        write_mesh(report.eigenpair.space.mesh, out_dir / "mesh.txt")
    return 0
