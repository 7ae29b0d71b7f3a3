"""
augmented.py

Nonlinear iteration on the augmented space V_H + span{u_tilde}.

Every iteration rebuilds the bordered pair from BorderStatics and two tensor
contractions, so nothing inside the loop has the length of a fine-grid vector. The
fine mesh is touched again only in `reconstruct`.

Author: Nathan Swanson
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from gpe_multigrid.errors import AssemblyError, SolverError
from gpe_multigrid.fem.assemble import assemble_mass, assemble_weighted_mass
from gpe_multigrid.fem.border import BlockMass, BorderedSystem, BorderStatics
from gpe_multigrid.fem.fespace import CoeffVec, prolongation
from gpe_multigrid.fem.tensor import tensor_contract_double, tensor_contract_mode3
from gpe_multigrid.logger import gpe_logger
from gpe_multigrid.models import ScfConfig
from gpe_multigrid.solvers.eigcore import MIN_STEP, Eigenpair, accept_step, smallest_eigpair
from gpe_multigrid.util import settings

DENSE_BORDER_THRESHOLD = 2000
SCHUR_PIVOT_TOL = 1e-12
ALPHA_SIGN_TOL = 1e-14
IDENTITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AugmentedSolution:
    eigenvalue: float
    u_H: np.ndarray
    alpha: float
    iters: int


def _check_identities(st: BorderStatics, u_H: np.ndarray, b21: np.ndarray, b22: np.ndarray) -> None:
    direct = tensor_contract_double(st.T_H, u_H)
    scale = max(np.abs(direct).max(initial=0.0), np.abs(b21).max(initial=0.0), 1.0)
    if np.abs(direct - b21).max(initial=0.0) > IDENTITY_TOL * scale:
        msg = "(T u) u disagrees with the double contraction"
        gpe_logger.error(msg)
        raise AssemblyError("identity-mismatch", msg)
    if not np.array_equal(b22, st.A_H23 @ u_H):
        msg = "A_H23 u is not reproducible"
        raise AssemblyError("identity-mismatch", msg)


def update_dynamic(st: BorderStatics, u_H: np.ndarray, alpha: float) -> BorderedSystem:
    """Bordered pair for the density u_H + alpha * u_tilde from statics and tensor contractions."""
    if u_H.shape != (st.n,):
        msg = f"u_H has shape {u_H.shape}, the coarse space has {st.n} dofs"
        raise AssemblyError("dimension-mismatch", msg)
    if st.T_H is None:
        msg = "statics were assembled without the tensor"
        raise AssemblyError("missing-tensor", msg)

    A21 = assemble_weighted_mass(st.coarse_space, CoeffVec(values=u_H, space=st.coarse_space), st.zeta)
    A22 = tensor_contract_mode3(st.T_H, u_H)
    A_H = (st.A_H1 + A21 + 2.0 * alpha * A22 + alpha**2 * st.A_H23).tocsr()

    b21 = A22 @ u_H
    b22 = st.A_H23 @ u_H
    b_Hh = st.b_Hh1 + b21 + 2.0 * alpha * b22 + alpha**2 * st.b_Hh23

    d2 = float(u_H @ b22) + 2.0 * alpha * float(u_H @ st.b_Hh23) + alpha**2 * st.xi_h
    if settings.check_identities():
        _check_identities(st, u_H, b21, b22)
    return BorderedSystem(A_H=A_H, b_Hh=b_Hh, xi=st.d1 + d2, M_H=st.M_H, c_Hh=st.c_Hh, gamma=st.gamma)


def _fix_sign(u_H: np.ndarray, alpha: float, sys: BorderedSystem) -> tuple[np.ndarray, float]:
    if abs(alpha) > ALPHA_SIGN_TOL:
        flip = alpha < 0
    else:
        flip = (sys.M_H @ u_H).sum() + alpha * sys.c_Hh.sum() < 0
    return (-u_H, -alpha) if flip else (u_H, alpha)


def solve_bordered(sys: BorderedSystem, mass: BlockMass | None = None) -> tuple[float, np.ndarray, float]:
    """
    Smallest eigenpair of the bordered pair, normalised in the block mass inner product.

    Pass the iteration's BlockMass to reuse its factored M_H; otherwise it is factored here.
    """
    pivot = (mass or sys.mass).schur_pivot
    if pivot <= SCHUR_PIVOT_TOL * sys.gamma:
        msg = f"bordered mass matrix is singular (Schur pivot {pivot:.3e}), u_tilde lies in V_H"
        gpe_logger.error(msg)
        raise SolverError("mass-block-singular", msg)
    lam, x = smallest_eigpair(sys.stiffness_block(), sys.mass_block(), dense_threshold=DENSE_BORDER_THRESHOLD + 1)
    u_H, alpha = _fix_sign(x[:-1], float(x[-1]), sys)
    return lam, u_H, alpha


def _normalise(mass: BlockMass, u: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    norm = mass.norm(u, alpha)
    return u / norm, alpha / norm


def bordered_scf(
    update: Callable[[np.ndarray, float], BorderedSystem],
    mass: BlockMass,
    init: tuple[np.ndarray, float],
    cfg: ScfConfig,
    zeta: float,
) -> AugmentedSolution:
    """
    Damped SCF on the bordered problem; `update` produces the pair for a frozen density.

    Steps are safeguarded like `scf_solve`: the energy 1/4 (z'A(z)z + z'A(0)z) may not rise,
    otherwise the mixing step is halved for good.
    """
    u, alpha = _normalise(mass, *init)
    sys = update(u, alpha)
    if zeta == 0:
        lam, u_hat, alpha_hat = solve_bordered(sys, mass)
        return AugmentedSolution(eigenvalue=lam, u_H=u_hat, alpha=alpha_hat, iters=1)

    linear = update(np.zeros_like(u), 0.0)

    def energy_of(system: BorderedSystem, v: np.ndarray, beta: float) -> float:
        return 0.25 * (system.form(v, beta) + linear.form(v, beta))

    energy = energy_of(sys, u, alpha)
    step = cfg.damping
    lam_prev = None
    for iteration in range(1, cfg.max_iters + 1):
        lam, u_hat, alpha_hat = solve_bordered(sys, mass)
        if mass.inner(u_hat, alpha_hat, u, alpha) < 0:
            u_hat, alpha_hat = -u_hat, -alpha_hat
        du = mass.norm(u_hat - u, alpha_hat - alpha)
        gpe_logger.debug(
            f"augmented scf {iteration}: lambda = {lam:.12f}, alpha = {alpha_hat:.6f}, du = {du:.3e}, step {step:.3g}"
        )
        if lam_prev is not None and abs(lam - lam_prev) <= cfg.tol_lambda and du <= cfg.tol_u:
            u_hat, alpha_hat = _fix_sign(u_hat, alpha_hat, sys)
            return AugmentedSolution(eigenvalue=lam, u_H=u_hat, alpha=alpha_hat, iters=iteration)

        while True:
            trial = _normalise(mass, (1.0 - step) * u + step * u_hat, (1.0 - step) * alpha + step * alpha_hat)
            sys_trial = update(*trial)
            e_trial = energy_of(sys_trial, *trial)
            if accept_step(e_trial, energy) or step <= MIN_STEP:
                break
            step *= 0.5
            gpe_logger.debug(f"augmented scf {iteration}: energy rose to {e_trial:.12e}, step halved to {step:.3g}")
        (u, alpha), sys, energy = trial, sys_trial, e_trial
        lam_prev = lam

    msg = f"augmented SCF did not converge in {cfg.max_iters} iterations (damping {cfg.damping})"
    gpe_logger.error(msg)
    raise SolverError("scf-not-converged", msg)


def _initial(st: BorderStatics, init: tuple[np.ndarray, float] | None) -> tuple[np.ndarray, float]:
    if init is None:
        return np.zeros(st.n), 1.0
    u_H, alpha = init
    u_H = np.asarray(u_H, dtype=float)
    if u_H.shape != (st.n,):
        msg = f"initial u_H has shape {u_H.shape}, the coarse space has {st.n} dofs"
        raise AssemblyError("dimension-mismatch", msg)
    if not np.any(u_H) and alpha == 0:
        return np.zeros(st.n), 1.0
    return u_H, float(alpha)


def augmented_scf(
    st: BorderStatics, init: tuple[np.ndarray, float] | None, cfg: ScfConfig
) -> AugmentedSolution:
    """Nonlinear iteration on V_H + span{u_tilde} driven by the statics and T_H."""
    return bordered_scf(lambda u, a: update_dynamic(st, u, a), st.mass, _initial(st, init), cfg, st.zeta)


def reconstruct(
    sol: AugmentedSolution, st: BorderStatics, *, mass_fine: sp.csr_matrix | None = None
) -> Eigenpair:
    """u_h = P u_H + alpha * u_tilde on the fine space, renormalised if the fine mass norm drifted."""
    fine = st.fine_space
    values = prolongation(st.coarse_space, fine) @ sol.u_H + sol.alpha * st.u_tilde.values
    M = mass_fine if mass_fine is not None else assemble_mass(fine)
    norm_sq = float(values @ (M @ values))
    if abs(norm_sq - 1.0) > 1e-10:
        gpe_logger.warning(f"reconstructed eigenfunction has mass norm^2 {norm_sq:.12f}, renormalising")
        values = values / np.sqrt(norm_sq)
    return Eigenpair(eigenvalue=sol.eigenvalue, coeffs=CoeffVec(values=values, space=fine))
