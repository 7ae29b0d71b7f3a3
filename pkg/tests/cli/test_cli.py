import csv

import pytest
from click.testing import CliRunner

from gpe_multigrid.__about__ import __version__
from gpe_multigrid.cli import gpe_multigrid
from gpe_multigrid.cli.reporting import ADAPT_HEADER, BENCH_HEADER, LEVELS_HEADER, read_report
from gpe_multigrid.errors import SolverError
from tests.mock_data import ADAPT_CONFIG, BAD_KEY_CONFIG, BENCH_CONFIG, MINIMAL_CONFIG, TRAP_CONFIG


def read_csv(path):
    with path.open(encoding="utf-8", newline="") as f:
        return list(csv.reader(f))


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_config(tmp_path):
    def _write(text: str):
        path = tmp_path / "run.cfg"
        path.write_text(text, encoding="utf-8")
        return path

    return _write


def invoke(runner, command, config, out, *extra):
    return runner.invoke(gpe_multigrid, [command, "--config", str(config), "--out", str(out), *extra])


def test_solve_writes_report_and_levels(runner, write_config, tmp_path):
    """
    Tests that `solve` exits 0 and writes one CSV row per level plus a report that reads back.
    """
    out = tmp_path / "out"
    result = invoke(runner, "solve", write_config(MINIMAL_CONFIG), out)
    assert result.exit_code == 0, result.output

    rows = read_csv(out / "levels.csv")
    assert tuple(rows[0]) == LEVELS_HEADER
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 3]
    assert all(r[-1] == "" for r in rows[1:])
    assert (out / "levels.csv").read_bytes().count(b"\r") == 0

    report = read_report(out / "report.json")
    assert report.eigenvalue == float(rows[-1][2])
    assert report.n_dofs == int(rows[-1][1]) == len(report.coefficients)
    assert report.config.zeta == 0.0
    assert not (out / "mesh.txt").exists()


def test_solve_direct_and_mesh_dump(runner, write_config, tmp_path):
    out = tmp_path / "out"
    text = "dump_mesh = true\n" + TRAP_CONFIG.format(method="direct")
    result = invoke(runner, "solve", write_config(text), out)
    assert result.exit_code == 0, result.output
    assert len(read_csv(out / "levels.csv")) == 2
    header = (out / "mesh.txt").read_text(encoding="utf-8").splitlines()[0]
    assert header.split()[0] == "2"


def test_tensor_run_matches_direct_run(runner, write_config, tmp_path):
    """
    Tests that the multilevel and the direct solve of the same config report close eigenvalues.
    """
    eigenvalues = []
    for method in ("tensor", "direct"):
        out = tmp_path / method
        result = invoke(runner, "solve", write_config(TRAP_CONFIG.format(method=method)), out)
        assert result.exit_code == 0, result.output
        eigenvalues.append(read_report(out / "report.json").eigenvalue)
    assert eigenvalues[0] == pytest.approx(eigenvalues[1], rel=1e-2)


def test_unknown_key_is_a_config_error(runner, write_config, tmp_path):
    result = invoke(runner, "solve", write_config(BAD_KEY_CONFIG), tmp_path / "out")
    assert result.exit_code == 1
    assert "zeta_typo" in result.output


def test_missing_config_file(runner, tmp_path):
    result = invoke(runner, "solve", tmp_path / "nope.cfg", tmp_path / "out")
    assert result.exit_code == 1


def test_solver_failure_exit_code(runner, write_config, tmp_path, mocker):
    mocker.patch("gpe_multigrid.cli.runs.solve", side_effect=SolverError("correction-diverged", "lambda grew"))
    result = invoke(runner, "solve", write_config(MINIMAL_CONFIG), tmp_path / "out")
    assert result.exit_code == 2
    assert "correction-diverged" in result.output


def test_bench_writes_one_row_per_level(runner, write_config, tmp_path):
    out = tmp_path / "out"
    result = invoke(runner, "bench", write_config(BENCH_CONFIG), out, "--reps", "1")
    assert result.exit_code == 0, result.output
    rows = read_csv(out / "bench.csv")
    assert tuple(rows[0]) == BENCH_HEADER
    assert [(r[0], float(r[1]), int(r[2])) for r in rows[1:]] == [("tensor", 1.0, 1), ("tensor", 1.0, 2)]
    assert all(float(r[4]) >= 0 for r in rows[1:])


def test_bench_rejects_zero_repetitions(runner, write_config, tmp_path):
    result = invoke(runner, "bench", write_config(BENCH_CONFIG), tmp_path / "out", "--reps", "0")
    assert result.exit_code == 2


def test_adapt_stops_at_max_dofs(runner, write_config, tmp_path):
    out = tmp_path / "out"
    result = invoke(runner, "adapt", write_config(ADAPT_CONFIG.format(max_dofs=1)), out)
    assert result.exit_code == 0, result.output
    rows = read_csv(out / "adapt.csv")
    assert tuple(rows[0]) == ADAPT_HEADER
    assert len(rows) == 2
    assert float(rows[1][3]) > 0
    assert read_report(out / "report.json").n_dofs == int(rows[1][1])


def test_version(runner):
    result = runner.invoke(gpe_multigrid, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output
