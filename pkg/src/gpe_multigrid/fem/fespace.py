"""
fespace.py

P1 Lagrange spaces with Dirichlet elimination: the unknowns are the values at interior
vertices, boundary vertices are constrained to zero.

Author: Nathan Swanson
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from gpe_multigrid.errors import AssemblyError, MeshError
from gpe_multigrid.fem.mesh import Mesh, ancestry

CONSTRAINED = -1


@dataclass(frozen=True, eq=False)
class FeSpace:
    mesh: Mesh

    @property
    def n_total(self) -> int:
        return self.mesh.n_vertices

    @cached_property
    def interior_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.mesh.boundary_vertices)

    @cached_property
    def dof_of_vertex(self) -> np.ndarray:
        dofs = np.full(self.n_total, CONSTRAINED, dtype=np.int64)
        dofs[self.interior_dofs] = np.arange(self.interior_dofs.size)
        return dofs

    @property
    def n_dofs(self) -> int:
        return int(self.interior_dofs.size)

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        return self.dof_of_vertex[self.mesh.cells]

    @cached_property
    def gradients(self) -> np.ndarray:
        """Constant basis gradients per cell, shape (nc, 3, 2)."""
        return p1_gradients(self.mesh)

    def nodal(self, values: np.ndarray) -> np.ndarray:
        full = np.zeros(self.n_total)
        full[self.interior_dofs] = values
        return full


@dataclass(frozen=True, eq=False)
class CoeffVec:
    values: np.ndarray
    space: FeSpace

    def __post_init__(self):
        if self.values.shape != (self.space.n_dofs,):
            msg = f"coefficient vector of length {self.values.shape} on a space with {self.space.n_dofs} dofs"
            raise AssemblyError("dimension-mismatch", msg)
        if not np.all(np.isfinite(self.values)):
            msg = "coefficient vector has non-finite entries"
            raise AssemblyError("non-finite", msg)

    def nodal(self) -> np.ndarray:
        """Values at every vertex, zero on the boundary."""
        return self.space.nodal(self.values)


def p1_gradients(mesh: Mesh) -> np.ndarray:
    p = mesh.vertices[mesh.cells]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=1)  # rows x1-x0, x2-x0
    det = np.linalg.det(jac)
    scale = np.abs(jac).max(axis=(1, 2)) ** 2
    if np.any(np.abs(det) <= 1e-14 * scale):
        bad = int(np.argmin(np.abs(det) / scale))
        msg = f"cell {bad} is degenerate"
        raise AssemblyError("singular-geometry", msg)
    # grad lambda_1, grad lambda_2 are the columns of J^{-1} for J with rows x1-x0, x2-x0
    inv = np.linalg.inv(jac)
    g12 = np.transpose(inv, (0, 2, 1))
    g0 = -g12.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g12], axis=1)


def interpolate(space: FeSpace, f: Callable[[np.ndarray], np.ndarray]) -> CoeffVec:
    points = space.mesh.vertices[space.interior_dofs]
    values = np.asarray(f(points), dtype=float).reshape(-1) if points.size else np.zeros(0)
    return CoeffVec(values=np.broadcast_to(values, (space.n_dofs,)).copy(), space=space)


def vertex_prolongation(coarse: Mesh, fine: Mesh) -> sp.csr_matrix:
    """Maps nodal values on every coarse vertex to nodal values on every fine vertex."""
    result = sp.identity(coarse.n_vertices, format="csr")
    for mesh in reversed(ancestry(coarse, fine)):
        nv_old = mesh.parent.n_vertices
        new = np.arange(nv_old, mesh.n_vertices)
        parents = mesh.vertex_parents[nv_old:]
        rows = np.concatenate([np.arange(nv_old), np.repeat(new, 2)])
        cols = np.concatenate([np.arange(nv_old), parents.ravel()])
        vals = np.concatenate([np.ones(nv_old), np.full(2 * new.size, 0.5)])
        step = sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_vertices, nv_old))
        result = step @ result
    return result.tocsr()


def prolongation(coarse: FeSpace, fine: FeSpace) -> sp.csr_matrix:
    """Interior-dof prolongation of shape (fine.n_dofs, coarse.n_dofs)."""
    full = vertex_prolongation(coarse.mesh, fine.mesh)
    return full[fine.interior_dofs][:, coarse.interior_dofs].tocsr()


def is_nested(coarse: FeSpace, fine: FeSpace) -> bool:
    try:
        ancestry(coarse.mesh, fine.mesh)
    except MeshError:
        return False
    return True


def bubble_guess(space: FeSpace, seed: int | None = None) -> CoeffVec:
    """Positive bounding-box bubble, optionally with a small seeded perturbation."""
    lo = space.mesh.vertices.min(axis=0)
    hi = space.mesh.vertices.max(axis=0)

    def bubble(points: np.ndarray) -> np.ndarray:
        return np.prod((points - lo) * (hi - points), axis=1)

    guess = interpolate(space, bubble).values
    if seed is not None:
        rng = np.random.default_rng(seed)
        guess = guess * (1.0 + 1e-3 * rng.uniform(-1.0, 1.0, guess.size))
    return CoeffVec(values=guess, space=space)
