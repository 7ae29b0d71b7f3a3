"""
eigcore.py

Smallest eigenpair of symmetric pencils (dense LAPACK for small systems, shift-invert
ARPACK otherwise) and the damped self-consistent field iteration for the discrete
Gross-Pitaevskii problem on a single space.

Author: Nathan Swanson
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from gpe_multigrid.errors import EigenError
from gpe_multigrid.fem.assemble import (
    Potential,
    assemble_mass,
    assemble_stiffness_potential,
    assemble_weighted_mass,
)
from gpe_multigrid.fem.fespace import CoeffVec, FeSpace, bubble_guess
from gpe_multigrid.logger import gpe_logger
from gpe_multigrid.models import ScfConfig

DENSE_THRESHOLD = 500
RESIDUAL_TOL = 1e-10
MIN_STEP = 1e-6
ENERGY_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class Eigenpair:
    eigenvalue: float
    coeffs: CoeffVec

    @property
    def space(self) -> FeSpace:
        return self.coeffs.space

    @property
    def values(self) -> np.ndarray:
        return self.coeffs.values


def _as_dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _dense_pair(A, M) -> tuple[float, np.ndarray]:
    try:
        w, v = la.eigh(_as_dense(A), _as_dense(M), subset_by_index=[0, 0])
    except la.LinAlgError as e:
        msg = "mass matrix is not positive definite"
        raise EigenError("indefinite-mass", msg) from e
    return float(w[0]), v[:, 0]


def _sparse_pair(A, M, v0: np.ndarray | None) -> tuple[float, np.ndarray]:
    M = sp.csr_matrix(M)
    if np.any(M.diagonal() <= 0):
        msg = "mass matrix has a non-positive diagonal entry"
        raise EigenError("indefinite-mass", msg)
    try:
        w, v = spla.eigsh(sp.csc_matrix(A), k=1, M=M.tocsc(), sigma=0.0, which="LM", v0=v0)
    except spla.ArpackNoConvergence as e:
        msg = "shift-invert Lanczos did not converge"
        raise EigenError("not-converged", msg) from e
    except (RuntimeError, spla.ArpackError) as e:
        msg = f"shift-invert Lanczos failed: {e}"
        raise EigenError("not-converged", msg) from e
    return float(w[0]), v[:, 0]


def smallest_eigpair(
    A, M, *, v0: np.ndarray | None = None, dense_threshold: int = DENSE_THRESHOLD
) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of A x = lambda M x with x^T M x = 1 and (M 1) . x >= 0."""
    n = A.shape[0]
    if n == 0:
        msg = "eigenproblem without unknowns"
        raise EigenError("empty-space", msg)
    if n <= dense_threshold:
        lam, x = _dense_pair(A, M)
    else:
        lam, x = _sparse_pair(A, M, v0)

    Mx = M @ x
    norm_sq = float(x @ Mx)
    if norm_sq <= 0:
        msg = "mass matrix is not positive definite"
        raise EigenError("indefinite-mass", msg)
    x = x / np.sqrt(norm_sq)
    Mx = Mx / np.sqrt(norm_sq)
    if Mx.sum() < 0:
        x, Mx = -x, -Mx

    Ax = A @ x
    residual = np.linalg.norm(Ax - lam * Mx)
    if residual > RESIDUAL_TOL * max(np.linalg.norm(Ax), np.finfo(float).tiny):
        msg = f"eigen-residual {residual:.2e} above {RESIDUAL_TOL:.0e} relative"
        raise EigenError("not-converged", msg)
    return lam, x


def m_norm(M, x: np.ndarray) -> float:
    return float(np.sqrt(max(x @ (M @ x), 0.0)))


def gp_energy(K, G, u: np.ndarray) -> float:
    """E(u) = 1/2 u'Ku + 1/4 u'G(u)u with G(u) the density-weighted mass of u."""
    return float(0.5 * (u @ (K @ u)) + 0.25 * (u @ (G @ u)))


def accept_step(trial: float, current: float) -> bool:
    return trial <= current + ENERGY_SLACK * abs(current)


def scf_solve(
    space: FeSpace,
    W: Potential,
    zeta: float,
    cfg: ScfConfig,
    init: Eigenpair | None = None,
    *,
    seed: int | None = None,
) -> tuple[Eigenpair, int]:
    """
    Damped SCF: freeze the density, take the smallest eigenpair, mix, repeat until self-consistent.

    The damping is the largest mixing step. A step that raises the energy is halved until
    it does not and the halved step is kept from then on. The iteration stops once
    lambda_hat settles and the undamped update u_hat - u is below tol_u.
    """
    if space.n_dofs == 0:
        msg = "the space has no interior dofs"
        raise EigenError("empty-space", msg)
    K = assemble_stiffness_potential(space, W)
    M = assemble_mass(space)

    if zeta == 0:
        lam, x = smallest_eigpair(K, M)
        return Eigenpair(eigenvalue=lam, coeffs=CoeffVec(values=x, space=space)), 1

    if init is not None and init.space is not space:
        msg = "initial guess lives on another space"
        raise EigenError("dimension-mismatch", msg)

    def density(v: np.ndarray):
        return assemble_weighted_mass(space, CoeffVec(values=v, space=space), zeta)

    u = (init.coeffs if init is not None else bubble_guess(space, seed)).values
    u = u / m_norm(M, u)
    G = density(u)
    energy = gp_energy(K, G, u)
    step = cfg.damping
    lam_prev = None
    for iteration in range(1, cfg.max_iters + 1):
        lam, u_hat = smallest_eigpair((K + G).tocsr(), M, v0=u)
        if u_hat @ (M @ u) < 0:
            u_hat = -u_hat
        du = m_norm(M, u_hat - u)
        gpe_logger.debug(f"scf {iteration}: lambda = {lam:.12f}, |u_hat - u|_M = {du:.3e}, step {step:.3g}")
        if lam_prev is not None and abs(lam - lam_prev) <= cfg.tol_lambda and du <= cfg.tol_u:
            if (M @ u_hat).sum() < 0:
                u_hat = -u_hat
            return Eigenpair(eigenvalue=lam, coeffs=CoeffVec(values=u_hat, space=space)), iteration

        while True:
            mixed = (1.0 - step) * u + step * u_hat
            trial = mixed / m_norm(M, mixed)
            G_trial = density(trial)
            e_trial = gp_energy(K, G_trial, trial)
            if accept_step(e_trial, energy) or step <= MIN_STEP:
                break
            step *= 0.5
            gpe_logger.debug(f"scf {iteration}: energy rose to {e_trial:.12e}, step halved to {step:.3g}")
        u, G, energy = trial, G_trial, e_trial
        lam_prev = lam

    msg = f"SCF did not converge in {cfg.max_iters} iterations (damping {cfg.damping})"
    gpe_logger.error(msg)
    raise EigenError("scf-not-converged", msg)


def scf_residual(space: FeSpace, W: Potential, zeta: float, pair: Eigenpair) -> float:
    """Relative residual ||A(u) u - lambda M u|| / ||A(u) u|| of a computed pair."""
    u = pair.values
    A = assemble_stiffness_potential(space, W) + assemble_weighted_mass(space, pair.coeffs, zeta)
    Au = A @ u
    return float(np.linalg.norm(Au - pair.eigenvalue * (assemble_mass(space) @ u)) / np.linalg.norm(Au))
