# SPDX-FileCopyrightText: 2025-present NS <nathanswanson370@gmail.com>
#
# SPDX-License-Identifier: MIT
from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import click
from pydantic import ValidationError
from rich.console import Console

from gpe_multigrid.__about__ import __version__
from gpe_multigrid.errors import ConfigError, GpeError
from gpe_multigrid.logger import gpe_logger
from gpe_multigrid.models import Command, RunManifest

console = Console(stderr=True)

EXIT_CONFIG = 1
EXIT_SOLVER = 2


def _dispatch(runner: Callable[[RunManifest], int], command: Command, config: Path, out: Path, reps: int) -> None:
    try:
        manifest = RunManifest(command=command, config_path=str(config), out_dir=str(out), repetitions=reps)
        code = runner(manifest)
    except (ConfigError, ValidationError) as e:
        console.print(f"config error: {e}", markup=False, highlight=False)
        raise SystemExit(EXIT_CONFIG) from e
    except GpeError as e:
        gpe_logger.error(f"{command} failed: {e}")
        console.print(f"solver error: {e}", markup=False, highlight=False)
        raise SystemExit(EXIT_SOLVER) from e
    raise SystemExit(code)


def run_options(f):
    f = click.option("--reps", type=click.IntRange(min=1), default=3, show_default=True, help="timing repetitions")(f)
    f = click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="output directory")(f)
    f = click.option("--config", "config", required=True, type=click.Path(dir_okay=False, path_type=Path))(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(version=__version__, prog_name="gpe_multigrid")
def gpe_multigrid() -> None:
    """Ground state of the Gross-Pitaevskii equation by multilevel correction."""


@gpe_multigrid.command()
@run_options
def solve(config: Path, out: Path, reps: int) -> None:
    """Multilevel (or direct) solve; writes report.json and levels.csv."""
    from gpe_multigrid.cli.runs import run_solve

    _dispatch(run_solve, Command.SOLVE, config, out, reps)


@gpe_multigrid.command()
@run_options
def bench(config: Path, out: Path, reps: int) -> None:
    """Timing sweep over zeta and methods; writes bench.csv."""
    from gpe_multigrid.cli.runs import run_bench

    _dispatch(run_bench, Command.BENCH, config, out, reps)


@gpe_multigrid.command()
@run_options
def adapt(config: Path, out: Path, reps: int) -> None:
    """Adaptive multilevel loop; writes adapt.csv and report.json."""
    from gpe_multigrid.cli.runs import run_adapt

    _dispatch(run_adapt, Command.ADAPT, config, out, reps)
