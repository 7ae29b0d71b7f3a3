"""
tensor.py

Symmetric third-order tensor T_ijk = int(zeta * u_tilde * phi_i phi_j phi_k) over the
coarse basis. Only canonical entries (i <= j <= k) are stored; contractions expand them
to their permutations with a multiplicity weight, so no dense or 6-fold copy is kept.

Author: Nathan Swanson
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import permutations

import numpy as np
import scipy.sparse as sp

from gpe_multigrid.errors import AssemblyError
from gpe_multigrid.fem.assemble import FineCellCoupling, map_cell_chunks
from gpe_multigrid.fem.fespace import CoeffVec, FeSpace

_PERMUTATIONS = np.array(list(permutations(range(3))))
_LOCAL_TRIPLES = np.array([(a, b, c) for a in range(3) for b in range(3) for c in range(3)])


def _distinct_permutations(subs: np.ndarray) -> np.ndarray:
    i, j, k = subs.T
    same = (i == j).astype(int) + (j == k) + (i == k)
    # all distinct -> 6, exactly two equal -> 3, all equal -> 1
    return np.select([same == 0, same == 1], [6, 3], default=1)


def _canonical_sum(n: int, triples: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort every triple and sum the values of equal canonical triples."""
    keep = np.all(triples >= 0, axis=1)
    triples = np.sort(triples[keep], axis=1).astype(np.int64)
    keys = (triples[:, 0] * n + triples[:, 1]) * n + triples[:, 2]
    unique_keys, inverse = np.unique(keys, return_inverse=True)
    sums = np.bincount(inverse, weights=values[keep], minlength=unique_keys.size)
    subs = np.stack([unique_keys // (n * n), (unique_keys // n) % n, unique_keys % n], axis=1)
    return subs, sums


@dataclass(frozen=True, eq=False)
class SparseTensor3:
    n: int
    subs: np.ndarray  # (nnz, 3), i <= j <= k, lexicographically sorted
    vals: np.ndarray

    def __post_init__(self):
        if self.subs.size and np.any(np.diff(self.subs, axis=1) < 0):
            msg = "tensor subscripts must be canonical (i <= j <= k)"
            raise AssemblyError("non-canonical", msg)

    @classmethod
    def empty(cls, n: int) -> SparseTensor3:
        return cls(n=n, subs=np.zeros((0, 3), dtype=np.int64), vals=np.zeros(0))

    @classmethod
    def from_symmetric_entries(cls, n: int, triples: np.ndarray, values: np.ndarray) -> SparseTensor3:
        """Build from entries listed under every permutation of their subscripts."""
        subs, sums = _canonical_sum(n, triples, values)
        return cls(n=n, subs=subs, vals=sums / _distinct_permutations(subs))

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def nnz(self) -> int:
        return self.vals.size

    @cached_property
    def _expanded(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        weight = self.vals * _distinct_permutations(self.subs) / 6.0
        expanded = self.subs[:, _PERMUTATIONS].reshape(-1, 3)  # (6 nnz, 3)
        return expanded[:, 0], expanded[:, 1], expanded[:, 2], np.repeat(weight, 6)

    def to_dense(self) -> np.ndarray:
        rows, cols, third, weight = self._expanded
        dense = np.zeros(self.dims)
        np.add.at(dense, (rows, cols, third), weight)
        return dense


def _check_length(T: SparseTensor3, u: np.ndarray) -> None:
    if u.shape != (T.n,):
        msg = f"vector of shape {u.shape} against a tensor of dimension {T.n}"
        raise AssemblyError("dimension-mismatch", msg)


def tensor_contract_mode3(T: SparseTensor3, u: np.ndarray) -> sp.csr_matrix:
    """(T u)_ij = sum_k T_ijk u_k."""
    _check_length(T, u)
    rows, cols, third, weight = T._expanded
    return sp.csr_matrix((weight * u[third], (rows, cols)), shape=(T.n, T.n))


def tensor_contract_double(T: SparseTensor3, u: np.ndarray) -> np.ndarray:
    """((T u) u)_i = sum_jk T_ijk u_j u_k without forming T u."""
    _check_length(T, u)
    rows, cols, third, weight = T._expanded
    return np.bincount(rows, weights=weight * u[cols] * u[third], minlength=T.n)


def assemble_tensor_TH(
    coarse: FeSpace,
    fine: FeSpace,
    u_tilde: CoeffVec,
    zeta: float,
    *,
    coupling: FineCellCoupling | None = None,
) -> SparseTensor3:
    """Integrates zeta * u_tilde * phi_i phi_j phi_k cell by cell on the fine mesh."""
    n = coarse.n_dofs
    if zeta == 0 or not np.any(u_tilde.values):
        return SparseTensor3.empty(n)
    coupling = coupling or FineCellCoupling.build(coarse, fine)
    u_q = coupling.fine_at_quad(u_tilde.nodal())

    def chunk(cells: slice) -> tuple[np.ndarray, np.ndarray]:
        basis = coupling.basis[cells]
        weight = zeta * coupling.weights[cells] * u_q[cells]
        local = np.einsum("fq,fqa,fqb,fqc->fabc", weight, basis, basis, basis).reshape(-1, 27)
        triples = coupling.coarse_dofs[cells][:, _LOCAL_TRIPLES]  # (nf, 27, 3)
        return _canonical_sum(n, triples.reshape(-1, 3), local.ravel())

    parts = map_cell_chunks(chunk, coupling.n_cells)
    subs, sums = _canonical_sum(
        n, np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    )
    return SparseTensor3(n=n, subs=subs, vals=sums / _distinct_permutations(subs))
