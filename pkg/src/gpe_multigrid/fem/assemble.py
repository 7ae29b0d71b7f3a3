"""
assemble.py

Sparse assembly of the P1 bilinear forms (stiffness + potential, mass, density-weighted
mass) and the fine-cell coupling that lets coarse basis functions be integrated exactly
over the cells of a descendant mesh.

Cell loops are vectorised with einsum and may be split into chunks that run on a thread
pool capped by NUM_THREADS; chunk results are always merged in chunk order.

Author: Nathan Swanson
"""

from __future__ import annotations

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from gpe_multigrid.fem.fespace import CoeffVec, FeSpace, p1_gradients
from gpe_multigrid.fem.mesh import barycentric, nesting_map
from gpe_multigrid.fem.quadrature import QuadRule, quad_rule
from gpe_multigrid.util import settings

Potential = Callable[[np.ndarray], np.ndarray] | None

CHUNK_CELLS = 16384
NONLINEAR_DEGREE = 4
MASS_DEGREE = 2


def map_cell_chunks[T](fn: Callable[[slice], T], n_cells: int) -> list[T]:
    """Apply fn to consecutive cell slices, returning the results in slice order."""
    threads = settings.num_threads()
    size = CHUNK_CELLS if threads == 1 else max(1024, min(CHUNK_CELLS, -(-n_cells // threads)))
    slices = [slice(start, min(start + size, n_cells)) for start in range(0, max(n_cells, 1), size)]
    if threads == 1 or len(slices) == 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, slices))


def scatter_matrix(dofs: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    """Sum (nc, 3, 3) local blocks into an n x n matrix; negative dof indices are dropped."""
    rows = np.broadcast_to(dofs[:, :, None], local.shape)
    cols = np.broadcast_to(dofs[:, None, :], local.shape)
    keep = (rows >= 0) & (cols >= 0)
    return sp.csr_matrix((local[keep], (rows[keep], cols[keep])), shape=(n, n))


def scatter_vector(dofs: np.ndarray, local: np.ndarray, n: int) -> np.ndarray:
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=local[keep], minlength=n)


def _target(space: FeSpace, eliminate: bool) -> tuple[np.ndarray, int]:
    if eliminate:
        return space.cell_dofs, space.n_dofs
    return space.mesh.cells, space.n_total


def _quad_points(space: FeSpace, rule: QuadRule, cells: slice) -> np.ndarray:
    corners = space.mesh.vertices[space.mesh.cells[cells]]
    return np.einsum("qa,nad->nqd", rule.points, corners)


def _evaluate(W: Potential, points: np.ndarray) -> np.ndarray:
    flat = points.reshape(-1, points.shape[-1])
    return np.asarray(W(flat), dtype=float).reshape(points.shape[:-1])


def _assemble(space: FeSpace, local_fn: Callable[[slice], np.ndarray], eliminate: bool) -> sp.csr_matrix:
    local = np.concatenate(map_cell_chunks(local_fn, space.mesh.n_cells), axis=0)
    dofs, n = _target(space, eliminate)
    return scatter_matrix(dofs, local, n)


def assemble_stiffness_potential(space: FeSpace, W: Potential = None, *, eliminate: bool = True) -> sp.csr_matrix:
    """Matrix of int(grad phi_i . grad phi_j + W phi_i phi_j)."""
    grads = space.gradients
    areas = np.abs(space.mesh.cell_areas)
    rule = quad_rule(NONLINEAR_DEGREE)

    def local(cells: slice) -> np.ndarray:
        g = grads[cells]
        block = areas[cells, None, None] * np.einsum("nad,nbd->nab", g, g)
        if W is not None:
            wq = _evaluate(W, _quad_points(space, rule, cells)) * areas[cells, None]
            block += np.einsum("nq,q,qa,qb->nab", wq, rule.weights, rule.points, rule.points)
        return block

    return _assemble(space, local, eliminate)


def assemble_mass(space: FeSpace, *, eliminate: bool = True) -> sp.csr_matrix:
    rule = quad_rule(MASS_DEGREE)
    pattern = np.einsum("q,qa,qb->ab", rule.weights, rule.points, rule.points)
    areas = np.abs(space.mesh.cell_areas)

    def local(cells: slice) -> np.ndarray:
        return areas[cells, None, None] * pattern[None]

    return _assemble(space, local, eliminate)


def assemble_weighted_mass(
    space: FeSpace, rho: CoeffVec | np.ndarray, zeta: float, *, eliminate: bool = True
) -> sp.csr_matrix:
    """Matrix of int(zeta * rho^2 * phi_i phi_j), rho given as a CoeffVec or as values on every vertex."""
    dofs, n = _target(space, eliminate)
    if zeta == 0:
        return sp.csr_matrix((n, n))
    nodal = rho.nodal() if isinstance(rho, CoeffVec) else np.asarray(rho, dtype=float)
    rule = quad_rule(NONLINEAR_DEGREE)
    areas = np.abs(space.mesh.cell_areas)
    cells_all = space.mesh.cells

    def local(cells: slice) -> np.ndarray:
        rho_q = nodal[cells_all[cells]] @ rule.points.T  # (n, nq)
        weight = zeta * areas[cells, None] * rule.weights[None, :] * rho_q**2
        return np.einsum("nq,qa,qb->nab", weight, rule.points, rule.points)

    return _assemble(space, local, eliminate)


@dataclass(frozen=True, eq=False)
class FineCellCoupling:
    """Coarse P1 basis restricted to the cells of a descendant mesh.

    On each fine cell the coarse basis functions are linear, so products of a handful of
    coarse and fine P1 functions are integrated exactly by the degree-4 rule.
    """

    coarse: FeSpace
    fine: FeSpace
    fine_to_coarse: np.ndarray
    coarse_values: np.ndarray  # (nf, 3, 3): coarse basis b at fine vertex a
    coarse_gradients: np.ndarray  # (nf, 3, 2)
    coarse_dofs: np.ndarray  # (nf, 3), -1 for constrained
    fine_areas: np.ndarray
    rule: QuadRule

    @classmethod
    def build(cls, coarse: FeSpace, fine: FeSpace, degree: int = NONLINEAR_DEGREE) -> FineCellCoupling:
        embedding = nesting_map(coarse.mesh, fine.mesh)
        parents = embedding.fine_to_coarse
        fine_corners = fine.mesh.vertices[fine.mesh.cells]
        return cls(
            coarse=coarse,
            fine=fine,
            fine_to_coarse=parents,
            coarse_values=barycentric(coarse.mesh, parents, fine_corners),
            coarse_gradients=coarse.gradients[parents],
            coarse_dofs=coarse.cell_dofs[parents],
            fine_areas=np.abs(fine.mesh.cell_areas),
            rule=quad_rule(degree),
        )

    @property
    def n_cells(self) -> int:
        return self.fine_areas.size

    @cached_property
    def basis(self) -> np.ndarray:
        """Coarse basis values at fine quadrature points, (nf, nq, 3)."""
        return np.einsum("qa,fab->fqb", self.rule.points, self.coarse_values)

    @cached_property
    def weights(self) -> np.ndarray:
        """Fine quadrature weights including the cell area, (nf, nq)."""
        return self.fine_areas[:, None] * self.rule.weights[None, :]

    @cached_property
    def points(self) -> np.ndarray:
        corners = self.fine.mesh.vertices[self.fine.mesh.cells]
        return np.einsum("qa,fad->fqd", self.rule.points, corners)

    @cached_property
    def fine_gradients(self) -> np.ndarray:
        return p1_gradients(self.fine.mesh)

    def potential(self, W: Potential) -> np.ndarray:
        if W is None:
            return np.zeros(self.weights.shape)
        return _evaluate(W, self.points)

    def fine_at_quad(self, nodal: np.ndarray) -> np.ndarray:
        return nodal[self.fine.mesh.cells] @ self.rule.points.T

    def fine_gradient(self, nodal: np.ndarray) -> np.ndarray:
        return np.einsum("fad,fa->fd", self.fine_gradients, nodal[self.fine.mesh.cells])

    def coarse_at_quad(self, u_H: np.ndarray) -> np.ndarray:
        local = np.where(self.coarse_dofs >= 0, u_H[np.maximum(self.coarse_dofs, 0)], 0.0)
        return np.einsum("fqb,fb->fq", self.basis, local)
