import numpy as np
import pytest
import scipy.sparse as sp

from gpe_multigrid.fem.assemble import FineCellCoupling, assemble_mass
from gpe_multigrid.fem.border import assemble_border_statics, assemble_bordered_fine
from gpe_multigrid.fem.fespace import CoeffVec, prolongation
from gpe_multigrid.models import HarmonicPotential
from gpe_multigrid.solvers.augmented import update_dynamic

TRAP = HarmonicPotential(gammas=(1.0, 2.0))
ZETA = 25.0


@pytest.fixture
def bordered(square_spaces, rng):
    coarse, fine = square_spaces[0], square_spaces[2]
    u_tilde = CoeffVec(values=rng.standard_normal(fine.n_dofs), space=fine)
    statics = assemble_border_statics(coarse, fine, u_tilde, TRAP, ZETA)
    u_H = rng.standard_normal(coarse.n_dofs)
    return statics, u_H, -0.7


def rel(a, b) -> float:
    a = a.toarray() if sp.issparse(a) else np.asarray(a)
    b = b.toarray() if sp.issparse(b) else np.asarray(b)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def test_decomposed_blocks_match_monolithic_assembly(bordered):
    """
    Tests that statics plus tensor contractions reproduce every block of the bordered pair
    integrated directly on the fine mesh.
    """
    statics, u_H, alpha = bordered
    decomposed = update_dynamic(statics, u_H, alpha)
    direct = assemble_bordered_fine(statics.coupling, statics.u_tilde, u_H, alpha, TRAP, ZETA)
    assert rel(decomposed.A_H, direct.A_H) <= 1e-11
    assert rel(decomposed.b_Hh, direct.b_Hh) <= 1e-11
    assert decomposed.xi == pytest.approx(direct.xi, rel=1e-11)
    assert rel(decomposed.M_H, direct.M_H) <= 1e-11
    assert rel(decomposed.c_Hh, direct.c_Hh) <= 1e-11
    assert decomposed.gamma == pytest.approx(direct.gamma, rel=1e-11)


def test_fine_reassembly_with_statics(bordered):
    """
    Tests that the per-iteration fine reassembly of the baseline method matches the decomposed pair.
    """
    statics, u_H, alpha = bordered
    decomposed = update_dynamic(statics, u_H, alpha)
    baseline = assemble_bordered_fine(statics.coupling, statics.u_tilde, u_H, alpha, TRAP, ZETA, statics=statics)
    assert rel(baseline.A_H, decomposed.A_H) <= 1e-11
    assert rel(baseline.b_Hh, decomposed.b_Hh) <= 1e-11
    assert baseline.xi == pytest.approx(decomposed.xi, rel=1e-11)


def test_block_mass_is_the_fine_mass_norm(bordered):
    """
    Tests that the bordered mass form equals the fine-grid L2 norm of P u_H + alpha u_tilde.
    """
    statics, u_H, alpha = bordered
    values = prolongation(statics.coarse_space, statics.fine_space) @ u_H + alpha * statics.u_tilde.values
    M = assemble_mass(statics.fine_space)
    assert statics.mass.inner(u_H, alpha, u_H, alpha) == pytest.approx(values @ (M @ values), rel=1e-12)
    assert statics.mass.norm(u_H, alpha) ** 2 == pytest.approx(values @ (M @ values), rel=1e-12)


def test_block_matrices(bordered):
    statics, u_H, alpha = bordered
    system = update_dynamic(statics, u_H, alpha)
    n = statics.n
    K = system.stiffness_block()
    B = system.mass_block()
    assert K.shape == B.shape == (n + 1, n + 1)
    assert abs(K - K.T).max() <= 1e-12 * abs(K).max()
    x = np.append(u_H, alpha)
    assert system.rayleigh(u_H, alpha) == pytest.approx((x @ (K @ x)) / (x @ (B @ x)), rel=1e-12)


def test_statics_without_tensor(square_spaces, rng):
    coarse, fine = square_spaces[0], square_spaces[1]
    u_tilde = CoeffVec(values=rng.standard_normal(fine.n_dofs), space=fine)
    coupling = FineCellCoupling.build(coarse, fine)
    statics = assemble_border_statics(coarse, fine, u_tilde, TRAP, ZETA, coupling=coupling, with_tensor=False)
    assert statics.T_H is None
    assert statics.coupling is coupling
    assert statics.gamma == pytest.approx(u_tilde.values @ (assemble_mass(fine) @ u_tilde.values), rel=1e-12)
