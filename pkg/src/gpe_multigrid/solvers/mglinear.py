"""
mglinear.py

Geometric multigrid for the auxiliary linear problem

    (-Laplace + W + zeta |u_k|^2) u_tilde = lambda_k u_k

on a chain of nested P1 spaces. The finest operator is assembled, coarser ones are the
Galerkin products P^T A P of the nested-space prolongations. Cycling is pyamg's
MultilevelSolver with the geometric levels plugged in by hand and symmetric Gauss-Seidel
smoothing, so the V-cycle is a symmetric operator.

Author: Nathan Swanson
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from pyamg.multilevel import MultilevelSolver
from pyamg.relaxation.smoothing import change_smoothers

from gpe_multigrid.errors import MultigridError
from gpe_multigrid.fem.assemble import Potential, assemble_stiffness_potential, assemble_weighted_mass
from gpe_multigrid.fem.fespace import CoeffVec, FeSpace, is_nested, prolongation
from gpe_multigrid.logger import gpe_logger

SMOOTHER_SWEEPS = 2
COARSE_DIRECT_THRESHOLD = 500
MAX_CYCLES = 100


@dataclass(frozen=True, eq=False)
class MgHierarchy:
    spaces: list[FeSpace]  # coarsest to finest
    matrices: list[sp.csr_matrix]  # coarsest to finest
    prolongations: list[sp.csr_matrix]  # prolongations[l] maps level l to level l + 1
    solver: MultilevelSolver
    smoother_sweeps: int = SMOOTHER_SWEEPS
    coarse_direct_threshold: int = COARSE_DIRECT_THRESHOLD

    @property
    def n_levels(self) -> int:
        return len(self.matrices)

    @property
    def finest(self) -> sp.csr_matrix:
        return self.matrices[-1]


def _multilevel_solver(
    matrices: list[sp.csr_matrix], prolongations: list[sp.csr_matrix], sweeps: int, threshold: int
) -> MultilevelSolver:
    # pyamg numbers levels from the finest down
    levels = [MultilevelSolver.Level() for _ in matrices]
    for level, A in zip(levels, reversed(matrices), strict=True):
        level.A = A
    for level, P in zip(levels, reversed(prolongations), strict=False):
        level.P = P
        level.R = P.T.tocsr()

    coarse_solver = "cholesky" if matrices[0].shape[0] <= threshold else "splu"
    ml = MultilevelSolver(levels, coarse_solver=coarse_solver)
    smoother = ("gauss_seidel", {"sweep": "symmetric", "iterations": sweeps})
    change_smoothers(ml, smoother, smoother)
    return ml


def build_hierarchy(
    spaces: list[FeSpace],
    W: Potential,
    zeta: float,
    density: CoeffVec | None = None,
    *,
    smoother_sweeps: int = SMOOTHER_SWEEPS,
    coarse_direct_threshold: int = COARSE_DIRECT_THRESHOLD,
) -> MgHierarchy:
    """Hierarchy over `spaces` (coarse to fine) for the operator -Laplace + W + zeta |density|^2.

    Spaces without interior dofs carry no correction and are left out.
    """
    spaces = [s for s in spaces if s.n_dofs > 0]
    if not spaces:
        msg = "a multigrid hierarchy needs at least one space"
        raise MultigridError("not-nested", msg)
    for coarse, fine in zip(spaces, spaces[1:], strict=False):
        if coarse is fine or coarse.mesh is fine.mesh or not is_nested(coarse, fine):
            msg = "multigrid spaces must be strictly nested from coarse to fine"
            raise MultigridError("not-nested", msg)

    finest = spaces[-1]
    A = assemble_stiffness_potential(finest, W)
    if zeta and density is not None:
        if density.space is not finest:
            msg = "density must live on the finest space of the hierarchy"
            raise MultigridError("not-nested", msg)
        A = (A + assemble_weighted_mass(finest, density, zeta)).tocsr()

    prolongations = [prolongation(c, f) for c, f in zip(spaces, spaces[1:], strict=False)]
    matrices = [A]
    for P in reversed(prolongations):
        matrices.insert(0, (P.T @ matrices[0] @ P).tocsr())
    return MgHierarchy(
        spaces=list(spaces),
        matrices=matrices,
        prolongations=prolongations,
        solver=_multilevel_solver(matrices, prolongations, smoother_sweeps, coarse_direct_threshold),
        smoother_sweeps=smoother_sweeps,
        coarse_direct_threshold=coarse_direct_threshold,
    )


def _check_sizes(h: MgHierarchy, *vectors: np.ndarray) -> None:
    n = h.finest.shape[0]
    if any(v.shape != (n,) for v in vectors):
        msg = f"vectors must have length {n}"
        raise MultigridError("dimension-mismatch", msg)


def vcycle(h: MgHierarchy, rhs: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """One V-cycle on the finest level starting from x0 (x0 is not modified)."""
    _check_sizes(h, rhs, x0)
    rhs = np.asarray(rhs, dtype=float)
    return h.solver.solve(rhs, x0=np.array(x0, dtype=float), tol=0.0, maxiter=1, cycle="V")


def solve_mg(
    h: MgHierarchy, rhs: np.ndarray, x0: np.ndarray, tol: float, max_cycles: int = MAX_CYCLES
) -> tuple[np.ndarray, int]:
    """V-cycles from x0 until ||rhs - A x|| < tol ||rhs||; returns the iterate and the cycle count."""
    _check_sizes(h, rhs, x0)
    if tol <= 0:
        msg = f"multigrid tolerance must be positive, got {tol}"
        raise MultigridError("bad-tolerance", msg)
    rhs = np.asarray(rhs, dtype=float)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0:
        return np.zeros_like(rhs), 0

    residuals: list[float] = []
    x = h.solver.solve(
        rhs, x0=np.array(x0, dtype=float), tol=tol, maxiter=max_cycles, cycle="V", residuals=residuals
    )
    if residuals[-1] >= tol * rhs_norm:
        msg = (
            f"multigrid stopped at relative residual {residuals[-1] / rhs_norm:.2e} "
            f"after {max_cycles} V-cycles (target {tol:.1e})"
        )
        gpe_logger.error(msg)
        raise MultigridError("max-cycles-exceeded", msg)
    return x, len(residuals) - 1


def solve_aux(
    h: MgHierarchy,
    lambda_k: float,
    u_k_fine: np.ndarray,
    mass_fine: sp.csr_matrix,
    tol: float,
    max_cycles: int = MAX_CYCLES,
) -> tuple[np.ndarray, int]:
    """Solve A u_tilde = lambda_k M u_k starting from the prolonged u_k."""
    rhs = lambda_k * (mass_fine @ u_k_fine)
    u_tilde, cycles = solve_mg(h, rhs, u_k_fine, tol, max_cycles)
    gpe_logger.debug(f"auxiliary solve: {cycles} V-cycles on {h.n_levels} levels, n = {rhs.size}")
    return u_tilde, cycles
