"""
border.py

Pieces of the bordered eigenproblem on V_H + span{u_tilde}.

`assemble_border_statics` integrates, once per correction step, everything that does not
change during the nonlinear iteration. `assemble_bordered_fine` rebuilds the full bordered
pair by fine-grid quadrature of the current density; it is the per-iteration work of the
baseline method and the monolithic reference for the decomposed assembly.

Author: Nathan Swanson
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from gpe_multigrid.fem.assemble import (
    FineCellCoupling,
    Potential,
    assemble_mass,
    assemble_stiffness_potential,
    map_cell_chunks,
    scatter_matrix,
    scatter_vector,
)
from gpe_multigrid.fem.fespace import CoeffVec, FeSpace
from gpe_multigrid.fem.tensor import SparseTensor3, assemble_tensor_TH

DENSE_FACTOR_THRESHOLD = 2000


@dataclass(frozen=True, eq=False)
class BorderStatics:
    A_H1: sp.csr_matrix
    A_H23: sp.csr_matrix
    T_H: SparseTensor3 | None
    b_Hh1: np.ndarray
    b_Hh23: np.ndarray
    d1: float
    xi_h: float
    M_H: sp.csr_matrix
    c_Hh: np.ndarray
    gamma: float
    u_tilde: CoeffVec
    coarse_space: FeSpace
    fine_space: FeSpace
    zeta: float
    coupling: FineCellCoupling

    @property
    def n(self) -> int:
        return self.coarse_space.n_dofs

    @cached_property
    def mass(self) -> BlockMass:
        return BlockMass(M_H=self.M_H, c_Hh=self.c_Hh, gamma=self.gamma)


@dataclass(frozen=True, eq=False)
class BlockMass:
    """The mass side [[M_H, c], [c^T, gamma]] of the bordered pair."""

    M_H: sp.csr_matrix
    c_Hh: np.ndarray
    gamma: float

    def inner(self, u: np.ndarray, alpha: float, v: np.ndarray, beta: float) -> float:
        return float(u @ (self.M_H @ v) + alpha * (self.c_Hh @ v) + beta * (self.c_Hh @ u) + alpha * beta * self.gamma)

    def norm(self, u: np.ndarray, alpha: float) -> float:
        return float(np.sqrt(max(self.inner(u, alpha, u, alpha), 0.0)))

    @cached_property
    def schur_pivot(self) -> float:
        """gamma - c^T M_H^-1 c; the block is SPD exactly when this is positive. Factors M_H once."""
        if not self.c_Hh.size:
            return float(self.gamma)
        if self.c_Hh.size <= DENSE_FACTOR_THRESHOLD:
            y = la.cho_solve(la.cho_factor(self.M_H.toarray()), self.c_Hh)
        else:
            y = spla.splu(sp.csc_matrix(self.M_H)).solve(self.c_Hh)
        return float(self.gamma - self.c_Hh @ y)


@dataclass(frozen=True, eq=False)
class BorderedSystem:
    """Blocks of [[A_H, b], [b^T, xi]] x = lambda [[M_H, c], [c^T, gamma]] x."""

    A_H: sp.csr_matrix
    b_Hh: np.ndarray
    xi: float
    M_H: sp.csr_matrix
    c_Hh: np.ndarray
    gamma: float

    @property
    def n(self) -> int:
        return self.b_Hh.size

    def stiffness_block(self) -> sp.csr_matrix:
        return sp.bmat([[self.A_H, self.b_Hh[:, None]], [self.b_Hh[None, :], np.array([[self.xi]])]], format="csr")

    def mass_block(self) -> sp.csr_matrix:
        return sp.bmat([[self.M_H, self.c_Hh[:, None]], [self.c_Hh[None, :], np.array([[self.gamma]])]], format="csr")

    @property
    def mass(self) -> BlockMass:
        return BlockMass(M_H=self.M_H, c_Hh=self.c_Hh, gamma=self.gamma)

    def form(self, u: np.ndarray, alpha: float) -> float:
        return float(u @ (self.A_H @ u) + 2.0 * alpha * (self.b_Hh @ u) + alpha**2 * self.xi)

    def rayleigh(self, u: np.ndarray, alpha: float) -> float:
        return self.form(u, alpha) / self.mass.inner(u, alpha, u, alpha)


def assemble_border_statics(
    coarse: FeSpace,
    fine: FeSpace,
    u_tilde: CoeffVec,
    W: Potential,
    zeta: float,
    *,
    coupling: FineCellCoupling | None = None,
    with_tensor: bool = True,
) -> BorderStatics:
    """Iteration-invariant data of the bordered problem; cost linear in the fine dof count.

    `with_tensor=False` skips T_H for callers that reassemble the density term on the
    fine grid every iteration.
    """
    coupling = coupling or FineCellCoupling.build(coarse, fine)
    n = coarse.n_dofs
    nodal = u_tilde.nodal()
    u_q = coupling.fine_at_quad(nodal)
    grad_u = coupling.fine_gradient(nodal)
    w_q = coupling.potential(W)

    def chunk(cells: slice):
        basis = coupling.basis[cells]
        weights = coupling.weights[cells]
        u = u_q[cells]
        g = grad_u[cells]
        area = coupling.fine_areas[cells]
        b1 = area[:, None] * np.einsum("fad,fd->fa", coupling.coarse_gradients[cells], g)
        b1 += np.einsum("fq,fqa->fa", weights * w_q[cells] * u, basis)
        c = np.einsum("fq,fqa->fa", weights * u, basis)
        a23 = np.einsum("fq,fqa,fqb->fab", zeta * weights * u**2, basis, basis)
        b23 = np.einsum("fq,fqa->fa", zeta * weights * u**3, basis)
        scalars = np.array(
            [
                np.sum(area * np.einsum("fd,fd->f", g, g)) + np.sum(weights * w_q[cells] * u**2),
                np.sum(zeta * weights * u**4),
                np.sum(weights * u**2),
            ]
        )
        return b1, c, a23, b23, scalars

    parts = map_cell_chunks(chunk, coupling.n_cells)
    dofs = coupling.coarse_dofs
    b1, c, a23, b23 = (np.concatenate([p[i] for p in parts]) for i in range(4))
    d1, xi_h, gamma = np.sum([p[4] for p in parts], axis=0)

    tensor = assemble_tensor_TH(coarse, fine, u_tilde, zeta, coupling=coupling) if with_tensor else None
    return BorderStatics(
        A_H1=assemble_stiffness_potential(coarse, W),
        A_H23=scatter_matrix(dofs, a23, n),
        T_H=tensor,
        b_Hh1=scatter_vector(dofs, b1, n),
        b_Hh23=scatter_vector(dofs, b23, n),
        d1=float(d1),
        xi_h=float(xi_h),
        M_H=assemble_mass(coarse),
        c_Hh=scatter_vector(dofs, c, n),
        gamma=float(gamma),
        u_tilde=u_tilde,
        coarse_space=coarse,
        fine_space=fine,
        zeta=zeta,
        coupling=coupling,
    )


def assemble_bordered_fine(
    coupling: FineCellCoupling,
    u_tilde: CoeffVec,
    u_H: np.ndarray,
    alpha: float,
    W: Potential,
    zeta: float,
    *,
    statics: BorderStatics | None = None,
) -> BorderedSystem:
    """Bordered pair for the density u_H + alpha * u_tilde, integrated on the fine cells.

    With `statics` the density-independent blocks are reused and only the zeta terms are
    integrated; without it every block is integrated on the fine mesh.
    """
    n = coupling.coarse.n_dofs
    nodal = u_tilde.nodal()
    u_q = coupling.fine_at_quad(nodal)
    rho_q = coupling.coarse_at_quad(u_H) + alpha * u_q
    full = statics is None
    if full:
        grad_u = coupling.fine_gradient(nodal)
        w_q = coupling.potential(W)

    def chunk(cells: slice):
        basis = coupling.basis[cells]
        weights = coupling.weights[cells]
        u = u_q[cells]
        density = zeta * weights * rho_q[cells] ** 2
        a = np.einsum("fq,fqa,fqb->fab", density, basis, basis)
        b = np.einsum("fq,fqa->fa", density * u, basis)
        xi = np.sum(density * u**2)
        if not full:
            return a, b, xi
        area = coupling.fine_areas[cells]
        grads = coupling.coarse_gradients[cells]
        g = grad_u[cells]
        pot = weights * w_q[cells]
        a += area[:, None, None] * np.einsum("fad,fbd->fab", grads, grads)
        a += np.einsum("fq,fqa,fqb->fab", pot, basis, basis)
        b += area[:, None] * np.einsum("fad,fd->fa", grads, g) + np.einsum("fq,fqa->fa", pot * u, basis)
        xi += np.sum(area * np.einsum("fd,fd->f", g, g)) + np.sum(pot * u**2)
        m = np.einsum("fq,fqa,fqb->fab", weights, basis, basis)
        c = np.einsum("fq,fqa->fa", weights * u, basis)
        return a, b, xi, m, c, np.sum(weights * u**2)

    parts = map_cell_chunks(chunk, coupling.n_cells)
    dofs = coupling.coarse_dofs
    A = scatter_matrix(dofs, np.concatenate([p[0] for p in parts]), n)
    b = scatter_vector(dofs, np.concatenate([p[1] for p in parts]), n)
    xi = float(sum(p[2] for p in parts))
    if not full:
        return BorderedSystem(
            A_H=(statics.A_H1 + A).tocsr(),
            b_Hh=statics.b_Hh1 + b,
            xi=statics.d1 + xi,
            M_H=statics.M_H,
            c_Hh=statics.c_Hh,
            gamma=statics.gamma,
        )
    return BorderedSystem(
        A_H=A,
        b_Hh=b,
        xi=xi,
        M_H=scatter_matrix(dofs, np.concatenate([p[3] for p in parts]), n),
        c_Hh=scatter_vector(dofs, np.concatenate([p[4] for p in parts]), n),
        gamma=float(sum(p[5] for p in parts)),
    )
