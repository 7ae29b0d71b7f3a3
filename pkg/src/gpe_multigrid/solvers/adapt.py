"""
adapt.py

Residual a posteriori estimator, Dorfler marking and the adaptive multilevel loop.

The coarse space V_H stays the initial mesh for the whole run; every adaptive mesh is a
bisection descendant of it, so V_H is always a subspace of the current space.

Author: Nathan Swanson
"""

from __future__ import annotations

import time
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from gpe_multigrid.fem.assemble import Potential, map_cell_chunks
from gpe_multigrid.fem.fespace import FeSpace
from gpe_multigrid.fem.mesh import build_initial_mesh, refine_adaptive, refine_uniform
from gpe_multigrid.fem.quadrature import quad_rule
from gpe_multigrid.logger import gpe_logger
from gpe_multigrid.models import AdaptConfig, LevelRecord, SolveReport, SolverConfig
from gpe_multigrid.solvers.driver import build_report, lambda_error, log_level_record, one_correction_step
from gpe_multigrid.solvers.eigcore import Eigenpair, scf_solve

RESIDUAL_DEGREE = 6
MG_COARSENING = 0.5


@dataclass(frozen=True, eq=False)
class EstimatorField:
    eta_sq: np.ndarray

    @property
    def total_eta(self) -> float:
        return float(np.sqrt(self.eta_sq.sum()))


@dataclass(frozen=True, eq=False)
class AdaptStep:
    iteration: int
    pair: Eigenpair
    estimator: EstimatorField
    marked: np.ndarray
    record: LevelRecord


def _volume_residual(space: FeSpace, pair: Eigenpair, W: Potential, zeta: float) -> np.ndarray:
    mesh = space.mesh
    rule = quad_rule(RESIDUAL_DEGREE)
    nodal = pair.coeffs.nodal()
    areas = np.abs(mesh.cell_areas)
    h_sq = mesh.cell_diameters**2

    def chunk(cells: slice) -> np.ndarray:
        corners = mesh.vertices[mesh.cells[cells]]
        u = nodal[mesh.cells[cells]] @ rule.points.T
        residual = pair.eigenvalue * u - zeta * u**3
        if W is not None:
            points = np.einsum("qa,nad->nqd", rule.points, corners)
            residual -= np.asarray(W(points.reshape(-1, 2)), dtype=float).reshape(u.shape) * u
        return h_sq[cells] * areas[cells] * (residual**2 @ rule.weights)

    return np.concatenate(map_cell_chunks(chunk, mesh.n_cells))


def jump_residual(space: FeSpace, nodal: np.ndarray) -> np.ndarray:
    """Per-cell sum of h_e ||[grad u . n]||_e^2 over interior edges for u given at every vertex."""
    mesh = space.mesh
    grad = np.einsum("nad,na->nd", space.gradients, nodal[mesh.cells])

    edge_cells = mesh.edge_cells
    interior = edge_cells[:, 1] >= 0
    edges = mesh.edges[interior]
    left, right = edge_cells[interior, 0], edge_cells[interior, 1]
    tangent = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    length = mesh.edge_lengths[interior]
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / length[:, None]

    jump = np.einsum("ed,ed->e", grad[left] - grad[right], normal)
    # h_e * ||J_e||^2_e with J_e constant along the edge
    contribution = length**2 * jump**2
    return np.bincount(left, contribution, mesh.n_cells) + np.bincount(right, contribution, mesh.n_cells)


def estimate(space: FeSpace, pair: Eigenpair, W: Potential, zeta: float) -> EstimatorField:
    """eta_K^2 = h_K^2 ||lambda u - W u - zeta u^3||_K^2 + sum over interior edges of h_e ||[grad u . n]||_e^2."""
    eta_sq = _volume_residual(space, pair, W, zeta) + jump_residual(space, pair.coeffs.nodal())
    return EstimatorField(eta_sq=np.maximum(eta_sq, 0.0))


def mark_dorfler(est: EstimatorField, theta_mark: float) -> np.ndarray:
    """Smallest set of largest indicators carrying theta_mark of the total; ties go to the lower cell index."""
    eta_sq = est.eta_sq
    total = eta_sq.sum()
    if total <= 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-eta_sq, kind="stable")
    cumulative = np.cumsum(eta_sq[order])
    count = int(np.searchsorted(cumulative, theta_mark * total * (1.0 - 1e-14))) + 1
    return np.sort(order[: min(count, order.size)])


def _mg_chain(history: list[FeSpace]) -> list[FeSpace]:
    """V_H plus a subsequence of the adaptive spaces whose dof counts roughly halve towards V_H."""
    chain = [history[-1]]
    for space in reversed(history[1:-1]):
        if space.n_dofs <= MG_COARSENING * chain[0].n_dofs:
            chain.insert(0, space)
    return [history[0], *chain]


def _coarse_space(cfg: SolverConfig) -> FeSpace:
    mesh = build_initial_mesh(cfg.domain)
    for _ in range(cfg.h1_refinements):
        mesh = refine_uniform(mesh)
    return FeSpace(mesh)


def adaptive_steps(cfg: SolverConfig, adapt_cfg: AdaptConfig) -> Iterator[AdaptStep]:
    """Correction step, estimate, mark, refine; one AdaptStep per iteration until max_dofs is reached."""
    coarse = _coarse_space(cfg)
    history = [coarse]

    start = time.perf_counter()
    pair, iters = scf_solve(coarse, cfg.potential, cfg.zeta, cfg.scf, seed=cfg.seed)
    scf_iters, mg_cycles, alpha, t_linear = iters, 0, None, 0.0
    t_nonlinear = time.perf_counter() - start

    iteration = 1
    while True:
        space = history[-1]
        space.mesh.validate()
        est = estimate(space, pair, cfg.potential, cfg.zeta)
        record = LevelRecord(
            level=iteration,
            n_dofs=space.n_dofs,
            eigenvalue=pair.eigenvalue,
            scf_iters=scf_iters,
            mg_cycles=mg_cycles,
            alpha=alpha,
            t_linear=t_linear,
            t_nonlinear=t_nonlinear,
            t_total=time.perf_counter() - start,
            err_lambda=lambda_error(cfg, pair.eigenvalue),
            total_eta=est.total_eta,
        )
        log_level_record(record, "adaptive")
        if space.n_dofs >= adapt_cfg.max_dofs:
            yield AdaptStep(iteration, pair, est, np.zeros(0, dtype=np.int64), record)
            return
        marked = mark_dorfler(est, adapt_cfg.theta_mark)
        yield AdaptStep(iteration, pair, est, marked, record)
        if marked.size == 0:
            gpe_logger.warning("no cells marked, the estimator vanished; stopping the adaptive loop")
            return

        start = time.perf_counter()
        fine = FeSpace(refine_adaptive(space.mesh, marked))
        to_split = marked
        while fine.n_dofs == space.n_dofs:
            # only boundary midpoints appeared, bisect the children once more
            to_split = np.flatnonzero(np.isin(fine.mesh.parent_cell, to_split))
            fine = FeSpace(refine_adaptive(fine.mesh, to_split))
        history.append(fine)
        step = one_correction_step(
            coarse, pair, fine, cfg.c_sigma / fine.n_dofs, cfg, spaces=_mg_chain(history), alpha=alpha
        )
        pair, alpha = step.pair, step.alpha
        scf_iters, mg_cycles = step.scf_iters, step.mg_cycles
        t_linear, t_nonlinear = step.t_linear, step.t_nonlinear
        iteration += 1


def adaptive_loop(cfg: SolverConfig, adapt_cfg: AdaptConfig | None = None) -> SolveReport:
    started = time.perf_counter()
    steps = list(adaptive_steps(cfg, adapt_cfg or AdaptConfig()))
    return build_report(cfg, [s.record for s in steps], steps[-1].pair, started)
