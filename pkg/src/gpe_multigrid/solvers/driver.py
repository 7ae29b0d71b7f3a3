"""
driver.py

End-to-end runs: the multilevel correction scheme (tensor or baseline nonlinear
iteration), the direct fine-grid SCF, and the plain multigrid timing of the linear
problem used as the reference series in benchmarks.

Author: Nathan Swanson
"""

from __future__ import annotations

import time
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from gpe_multigrid.errors import SolverError
from gpe_multigrid.fem.assemble import assemble_mass
from gpe_multigrid.fem.border import assemble_border_statics, assemble_bordered_fine
from gpe_multigrid.fem.fespace import CoeffVec, FeSpace, prolongation
from gpe_multigrid.fem.mesh import Mesh, build_initial_mesh, refine_uniform
from gpe_multigrid.logger import gpe_logger
from gpe_multigrid.models import LevelRecord, Method, SolveReport, SolverConfig
from gpe_multigrid.solvers.augmented import augmented_scf, bordered_scf, reconstruct
from gpe_multigrid.solvers.eigcore import Eigenpair, scf_solve
from gpe_multigrid.solvers.mglinear import build_hierarchy, solve_aux, solve_mg

DIVERGENCE_GUARD = 0.10


@dataclass(frozen=True, eq=False)
class CorrectionResult:
    pair: Eigenpair
    alpha: float
    mg_cycles: int
    scf_iters: int
    t_linear: float
    t_nonlinear: float


def build_spaces(cfg: SolverConfig) -> list[FeSpace]:
    """Nested spaces V_{h_1} (= V_H) ... V_{h_n} by uniform refinement."""
    mesh: Mesh = build_initial_mesh(cfg.domain)
    for _ in range(cfg.h1_refinements):
        mesh = refine_uniform(mesh)
    spaces = [FeSpace(mesh)]
    for _ in range(cfg.n_levels - 1):
        mesh = refine_uniform(mesh)
        spaces.append(FeSpace(mesh))
    return spaces


def restrict_to_coarse(pair: Eigenpair, coarse: FeSpace) -> np.ndarray:
    """Nodal values of u_k at the interior vertices of V_H (vertex numbering survives refinement)."""
    return pair.coeffs.nodal()[coarse.interior_dofs]


def one_correction_step(
    coarse: FeSpace,
    pair: Eigenpair,
    fine: FeSpace,
    tol: float,
    cfg: SolverConfig,
    *,
    spaces: Sequence[FeSpace] | None = None,
    alpha: float | None = None,
) -> CorrectionResult:
    """One correction step: multigrid solve of the linear problem, then the nonlinear
    iteration on V_H + span{u_tilde}.

    `spaces` is the multigrid chain from V_H up to `fine`; by default it is
    [V_H, V_{h_k}, V_{h_k+1}] without duplicates.
    """
    W = cfg.potential
    zeta = cfg.zeta
    if spaces is None:
        spaces = [coarse] if pair.space is coarse else [coarse, pair.space]
        spaces.append(fine)

    start = time.perf_counter()
    u_k_fine = prolongation(pair.space, fine) @ pair.values
    hierarchy = build_hierarchy(list(spaces), W, zeta, density=CoeffVec(values=u_k_fine, space=fine))
    mass_fine = assemble_mass(fine)
    u_tilde_values, cycles = solve_aux(hierarchy, pair.eigenvalue, u_k_fine, mass_fine, tol)
    u_tilde = CoeffVec(values=u_tilde_values, space=fine)
    baseline = cfg.method == Method.BASELINE
    statics = assemble_border_statics(coarse, fine, u_tilde, W, zeta, with_tensor=not baseline)
    t_linear = time.perf_counter() - start

    start = time.perf_counter()
    init = (restrict_to_coarse(pair, coarse), 1.0 if alpha is None else alpha)
    if baseline:
        sol = bordered_scf(
            lambda u, a: assemble_bordered_fine(statics.coupling, u_tilde, u, a, W, zeta, statics=statics),
            statics.mass,
            init,
            cfg.scf,
            zeta,
        )
    else:
        sol = augmented_scf(statics, init, cfg.scf)
    t_nonlinear = time.perf_counter() - start

    new_pair = reconstruct(sol, statics, mass_fine=mass_fine)
    if new_pair.eigenvalue > (1.0 + DIVERGENCE_GUARD) * pair.eigenvalue:
        msg = (
            f"correction raised lambda from {pair.eigenvalue:.8f} to {new_pair.eigenvalue:.8f}, "
            "the coarse space is probably too coarse"
        )
        gpe_logger.error(msg)
        raise SolverError("correction-diverged", msg)
    return CorrectionResult(
        pair=new_pair,
        alpha=sol.alpha,
        mg_cycles=cycles,
        scf_iters=sol.iters,
        t_linear=t_linear,
        t_nonlinear=t_nonlinear,
    )


def lambda_error(cfg: SolverConfig, eigenvalue: float) -> float | None:
    if cfg.reference_lambda is None:
        return None
    return abs(eigenvalue - cfg.reference_lambda)


def log_level_record(record: LevelRecord, method: str) -> None:
    gpe_logger.log_group(
        f"{method} level {record.level}: lambda = {record.eigenvalue:.12f}",
        [
            f"dofs: {record.n_dofs}",
            f"scf iterations: {record.scf_iters}, V-cycles: {record.mg_cycles}",
            f"t_linear {record.t_linear:.3f}s, t_nonlinear {record.t_nonlinear:.3f}s, t_total {record.t_total:.3f}s",
        ],
    )


def build_report(cfg: SolverConfig, levels: list[LevelRecord], pair: Eigenpair, started: float) -> SolveReport:
    return SolveReport(
        config=cfg,
        levels=levels,
        eigenvalue=pair.eigenvalue,
        n_dofs=pair.space.n_dofs,
        coefficients=pair.values.tolist(),
        wall_clock=time.perf_counter() - started,
        eigenpair=pair,
    )


def _initial_level(cfg: SolverConfig, space: FeSpace, level: int) -> tuple[Eigenpair, LevelRecord]:
    start = time.perf_counter()
    pair, iters = scf_solve(space, cfg.potential, cfg.zeta, cfg.scf, seed=cfg.seed)
    elapsed = time.perf_counter() - start
    record = LevelRecord(
        level=level,
        n_dofs=space.n_dofs,
        eigenvalue=pair.eigenvalue,
        scf_iters=iters,
        t_nonlinear=elapsed,
        t_total=elapsed,
        err_lambda=lambda_error(cfg, pair.eigenvalue),
    )
    return pair, record


def _multilevel(cfg: SolverConfig) -> SolveReport:
    started = time.perf_counter()
    spaces = build_spaces(cfg)
    coarse = spaces[0]
    pair, record = _initial_level(cfg, coarse, 1)
    log_level_record(record, cfg.method)
    levels = [record]

    alpha = None
    for k in range(1, len(spaces)):
        fine = spaces[k]
        tol = cfg.c_sigma * fine.mesh.max_diameter**2
        start = time.perf_counter()
        step = one_correction_step(coarse, pair, fine, tol, cfg, spaces=spaces[: k + 1], alpha=alpha)
        pair, alpha = step.pair, step.alpha
        record = LevelRecord(
            level=k + 1,
            n_dofs=fine.n_dofs,
            eigenvalue=pair.eigenvalue,
            scf_iters=step.scf_iters,
            mg_cycles=step.mg_cycles,
            alpha=step.alpha,
            t_linear=step.t_linear,
            t_nonlinear=step.t_nonlinear,
            t_total=time.perf_counter() - start,
            err_lambda=lambda_error(cfg, pair.eigenvalue),
        )
        log_level_record(record, cfg.method)
        levels.append(record)
    return build_report(cfg, levels, pair, started)


def multigrid_gpe(cfg: SolverConfig) -> SolveReport:
    """Multilevel correction with the tensor-based nonlinear iteration."""
    if cfg.method != Method.TENSOR:
        cfg = cfg.model_copy(update={"method": Method.TENSOR})
    return _multilevel(cfg)


def baseline_multilevel(cfg: SolverConfig) -> SolveReport:
    """Same scheme, but every nonlinear iteration reassembles the density term on the fine grid."""
    if cfg.method != Method.BASELINE:
        cfg = cfg.model_copy(update={"method": Method.BASELINE})
    return _multilevel(cfg)


def direct_fine_solve(cfg: SolverConfig) -> SolveReport:
    """SCF directly on V_{h_n}."""
    started = time.perf_counter()
    space = build_spaces(cfg)[-1]
    pair, record = _initial_level(cfg, space, cfg.n_levels)
    log_level_record(record, Method.DIRECT)
    return build_report(cfg, [record], pair, started)


def solve(cfg: SolverConfig) -> SolveReport:
    match cfg.method:
        case Method.TENSOR:
            return multigrid_gpe(cfg)
        case Method.BASELINE:
            return baseline_multilevel(cfg)
        case Method.DIRECT:
            return direct_fine_solve(cfg)


def linear_reference_solve(cfg: SolverConfig) -> list[LevelRecord]:
    """Times the multigrid solve of (-Laplace + W) u = 1 on every level, to accuracy c_sigma h^2."""
    spaces = build_spaces(cfg)
    records = []
    for k, space in enumerate(spaces):
        start = time.perf_counter()
        hierarchy = build_hierarchy(spaces[: k + 1], cfg.potential, 0.0)
        rhs = assemble_mass(space) @ np.ones(space.n_dofs)
        _, cycles = solve_mg(hierarchy, rhs, np.zeros(space.n_dofs), cfg.c_sigma * space.mesh.max_diameter**2)
        elapsed = time.perf_counter() - start
        records.append(
            LevelRecord(
                level=k + 1,
                n_dofs=space.n_dofs,
                eigenvalue=0.0,
                mg_cycles=cycles,
                t_linear=elapsed,
                t_total=elapsed,
            )
        )
    return records
