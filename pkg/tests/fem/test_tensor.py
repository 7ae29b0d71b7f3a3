from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpe_multigrid.errors import AssemblyError
from gpe_multigrid.fem.assemble import FineCellCoupling, scatter_vector
from gpe_multigrid.fem.fespace import CoeffVec
from gpe_multigrid.fem.tensor import (
    SparseTensor3,
    assemble_tensor_TH,
    tensor_contract_double,
    tensor_contract_mode3,
)


def symmetric_dense(rng, n: int, density: float = 0.4) -> np.ndarray:
    raw = rng.standard_normal((n, n, n)) * (rng.random((n, n, n)) < density)
    return sum(np.transpose(raw, axes) for axes in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)])


def from_dense(dense: np.ndarray) -> SparseTensor3:
    n = dense.shape[0]
    triples = np.array(list(product(range(n), repeat=3)))
    return SparseTensor3.from_symmetric_entries(n, triples, dense[tuple(triples.T)])


def dense_coarse_basis(coupling: FineCellCoupling) -> np.ndarray:
    """Coarse basis at fine quadrature points as an (nf, nq, n) array, without any tensor code."""
    n = coupling.coarse.n_dofs
    dense = np.zeros((*coupling.basis.shape[:2], n))
    for a in range(3):
        dofs = coupling.coarse_dofs[:, a]
        keep = np.flatnonzero(dofs >= 0)
        np.add.at(dense, (keep, slice(None), dofs[keep]), coupling.basis[keep, :, a])
    return dense


@pytest.fixture
def tensor_setup(square_spaces, rng):
    coarse, fine = square_spaces[0], square_spaces[1]
    coupling = FineCellCoupling.build(coarse, fine)
    u_tilde = CoeffVec(values=rng.standard_normal(fine.n_dofs), space=fine)
    return coarse, fine, coupling, u_tilde


def test_canonical_storage_round_trip(rng):
    """
    Tests that a symmetric tensor survives canonical storage and expansion.
    """
    dense = symmetric_dense(rng, 5)
    T = from_dense(dense)
    assert np.all(np.diff(T.subs, axis=1) >= 0)
    assert T.dims == (5, 5, 5)
    assert np.allclose(T.to_dense(), dense, atol=1e-13)


def test_non_canonical_subscripts_are_rejected():
    with pytest.raises(AssemblyError) as exc_info:
        SparseTensor3(n=3, subs=np.array([[2, 1, 0]]), vals=np.array([1.0]))
    assert exc_info.value.code == "non-canonical"


@settings(max_examples=25, deadline=None)
@given(n=st.integers(min_value=1, max_value=8), seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_contractions_match_dense(n, seed):
    """
    Tests both contractions against einsum on the dense tensor, and (T u) u against the double contraction.
    """
    rng = np.random.default_rng(seed)
    dense = symmetric_dense(rng, n)
    T = from_dense(dense)
    u = rng.standard_normal(n)
    Tu = tensor_contract_mode3(T, u)
    assert np.allclose(Tu.toarray(), np.einsum("ijk,k->ij", dense, u), atol=1e-12)
    assert np.allclose(tensor_contract_double(T, u), np.einsum("ijk,j,k->i", dense, u, u), atol=1e-12)
    assert np.allclose(Tu @ u, tensor_contract_double(T, u), atol=1e-12)


def test_contraction_dimension_mismatch():
    T = SparseTensor3.empty(4)
    with pytest.raises(AssemblyError) as exc_info:
        tensor_contract_mode3(T, np.ones(3))
    assert exc_info.value.code == "dimension-mismatch"
    with pytest.raises(AssemblyError):
        tensor_contract_double(T, np.ones(5))


def test_tensor_matches_brute_force(tensor_setup):
    """
    Tests T_H against a dense triple product of the coarse basis over the fine quadrature points.
    """
    coarse, fine, coupling, u_tilde = tensor_setup
    zeta = 7.0
    T = assemble_tensor_TH(coarse, fine, u_tilde, zeta, coupling=coupling)
    B = dense_coarse_basis(coupling)
    weight = zeta * coupling.weights * coupling.fine_at_quad(u_tilde.nodal())
    expected = np.einsum("fq,fqi,fqj,fqk->ijk", weight, B, B, B)
    dense = T.to_dense()
    assert np.abs(dense - expected).max() <= 1e-13 * np.abs(expected).max()
    assert np.array_equal(dense, np.transpose(dense, (1, 0, 2)))
    assert np.array_equal(dense, np.transpose(dense, (2, 1, 0)))


def test_tensor_contraction_is_the_cubic_density_term(tensor_setup, rng):
    """
    Tests ((T u) u)_i = int zeta u_tilde u_H^2 phi_i, integrated independently on the fine cells.
    """
    coarse, fine, coupling, u_tilde = tensor_setup
    zeta = 3.0
    T = assemble_tensor_TH(coarse, fine, u_tilde, zeta, coupling=coupling)
    u_H = rng.standard_normal(coarse.n_dofs)
    weight = zeta * coupling.weights * coupling.fine_at_quad(u_tilde.nodal()) * coupling.coarse_at_quad(u_H) ** 2
    expected = scatter_vector(coupling.coarse_dofs, np.einsum("fq,fqa->fa", weight, coupling.basis), coarse.n_dofs)
    assert np.allclose(tensor_contract_double(T, u_H), expected, rtol=1e-12, atol=1e-14)


def test_tensor_is_empty_without_interaction(tensor_setup):
    coarse, fine, coupling, u_tilde = tensor_setup
    assert assemble_tensor_TH(coarse, fine, u_tilde, 0.0, coupling=coupling).nnz == 0
    zero = CoeffVec(values=np.zeros(fine.n_dofs), space=fine)
    assert assemble_tensor_TH(coarse, fine, zero, 5.0, coupling=coupling).nnz == 0


def test_tensor_sparsity_follows_coarse_supports(tensor_setup):
    """
    Tests that only triples of coarse dofs sharing a coarse cell are stored.
    """
    coarse, fine, coupling, u_tilde = tensor_setup
    T = assemble_tensor_TH(coarse, fine, u_tilde, 1.0, coupling=coupling)
    together = set()
    for dofs in coarse.cell_dofs:
        dofs = dofs[dofs >= 0]
        together |= {tuple(sorted(t)) for t in product(dofs, repeat=3)}
    assert {tuple(s) for s in T.subs} <= together
