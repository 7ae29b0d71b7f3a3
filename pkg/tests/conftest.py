import numpy as np
import pytest

from gpe_multigrid.fem.fespace import FeSpace
from gpe_multigrid.fem.mesh import Mesh, build_initial_mesh, refine_uniform
from gpe_multigrid.models import DomainKind, DomainSpec, ScfConfig, SolverConfig

ENV_VARS = ["GPE_LOG_LEVEL", "GPE_CHECK_IDENTITIES", "NUM_THREADS"]


@pytest.fixture(autouse=True)
def purge_env_vars(monkeypatch):
    """
    Every test starts from the default runtime switches.
    """
    for var in ENV_VARS:
        monkeypatch.delenv(var, raising=False)


def uniform_chain(kind: DomainKind, subdivision: int, levels: int) -> list[FeSpace]:
    mesh = build_initial_mesh(DomainSpec(kind=kind, initial_subdivision=subdivision))
    spaces = [FeSpace(mesh)]
    for _ in range(levels - 1):
        mesh = refine_uniform(mesh)
        spaces.append(FeSpace(mesh))
    return spaces


@pytest.fixture
def two_cell_square() -> Mesh:
    """
    The unit square cut into two triangles.
    """
    return build_initial_mesh(DomainSpec(kind=DomainKind.UNIT_SQUARE, initial_subdivision=1))


@pytest.fixture(scope="session")
def square_spaces() -> list[FeSpace]:
    """
    Nested P1 spaces on the unit square with 9, 49, 225 and 961 dofs.
    """
    return uniform_chain(DomainKind.UNIT_SQUARE, 4, 4)


@pytest.fixture(scope="session")
def l_shape_spaces() -> list[FeSpace]:
    return uniform_chain(DomainKind.L_SHAPE, 2, 3)


@pytest.fixture
def tight_scf() -> ScfConfig:
    return ScfConfig(damping=0.5, tol_lambda=1e-12, tol_u=1e-10, max_iters=500)


@pytest.fixture
def small_config(tight_scf) -> SolverConfig:
    """
    Three uniform levels on top of a 4x4 unit square, harmonic trap, moderate interaction.
    """
    return SolverConfig(
        domain=DomainSpec(kind=DomainKind.UNIT_SQUARE, initial_subdivision=4),
        n_levels=3,
        zeta=10.0,
        scf=tight_scf,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)
