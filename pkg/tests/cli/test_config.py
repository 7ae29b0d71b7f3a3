import pytest

from gpe_multigrid.cli.config import load_config, parse_config
from gpe_multigrid.errors import ConfigError
from gpe_multigrid.models import BenchMethod, DomainKind, Method
from tests.mock_data import ADAPT_CONFIG, BAD_KEY_CONFIG, MINIMAL_CONFIG, TRAP_CONFIG


def test_solver_keys_map_onto_the_models():
    config = parse_config(TRAP_CONFIG.format(method="baseline"))
    solver = config.solver
    assert solver.domain.kind == DomainKind.UNIT_SQUARE
    assert solver.domain.initial_subdivision == 4
    assert solver.n_levels == 3
    assert solver.zeta == 10.0
    assert solver.potential.gammas == (1.0, 1.0)
    assert solver.method == Method.BASELINE
    assert solver.scf.tol_lambda == 1e-12
    assert solver.scf.max_iters == 500
    assert solver.scf.damping == 0.5


def test_defaults_fill_missing_sections():
    config = parse_config(MINIMAL_CONFIG)
    assert config.solver.potential.is_zero
    assert config.solver.reference_lambda is None
    assert config.bench.methods == [BenchMethod.TENSOR, BenchMethod.BASELINE, BenchMethod.DIRECT_LINEAR]
    assert config.adapt.max_dofs == 5000


def test_lists_and_sections():
    text = MINIMAL_CONFIG + "\n[bench]\nzeta_values = 1, 10 ,100\nmethods = direct-linear, tensor\n"
    config = parse_config(text)
    assert config.bench.zeta_values == [1.0, 10.0, 100.0]
    assert config.bench.methods == [BenchMethod.DIRECT_LINEAR, BenchMethod.TENSOR]

    adapt = parse_config(ADAPT_CONFIG.format(max_dofs=1234))
    assert adapt.solver.domain.kind == DomainKind.L_SHAPE
    assert adapt.adapt.max_dofs == 1234
    assert adapt.adapt.theta_mark == 0.5


@pytest.mark.parametrize("raw", ["none", "None", ""])
def test_reference_lambda_can_be_left_out(raw):
    config = parse_config(MINIMAL_CONFIG + f"reference_lambda = {raw}\n")
    assert config.solver.reference_lambda is None
    assert parse_config(MINIMAL_CONFIG + "reference_lambda = 19.7392\n").solver.reference_lambda == 19.7392


def test_inline_comments_are_ignored():
    config = parse_config("zeta = 5  # interaction\nsubdivision = 2\n")
    assert config.solver.zeta == 5.0


@pytest.mark.parametrize(
    ("text", "code", "fragment"),
    [
        (BAD_KEY_CONFIG, "unknown-key", "zeta_typo"),
        (MINIMAL_CONFIG + "\n[plots]\ndpi = 300\n", "unknown-key", "plots"),
        (MINIMAL_CONFIG + "zeta = 3\n", "duplicate-key", "zeta"),
        ("zeta = -1\n", "invalid-value", "solver.zeta"),
        ("domain = torus\n", "invalid-value", "solver.domain.kind"),
        ("n_levels = 1\n", "invalid-value", "n_levels must be >= 2"),
        ("no separator here\n", "parse-error", "cannot parse"),
    ],
)
def test_config_errors(text, code, fragment):
    with pytest.raises(ConfigError) as exc_info:
        parse_config(text, source="run.cfg")
    assert exc_info.value.code == code
    assert fragment in exc_info.value.message


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(MINIMAL_CONFIG, encoding="utf-8")
    assert load_config(path).solver.n_levels == 3

    with pytest.raises(ConfigError) as exc_info:
        load_config(tmp_path / "missing.cfg")
    assert exc_info.value.code == "missing-file"
