"""
models.py

Validated run configuration (domain, SCF, bench and adaptive settings) and the
per-level records and reports the solvers hand to the CLI.

Author: Nathan Swanson
"""

from enum import StrEnum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

## generic


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


## Domains


class DomainKind(StrEnum):
    UNIT_SQUARE = "unit_square"
    L_SHAPE = "l_shape"
    UNIT_CUBE = "unit_cube"


class DomainSpec(StrictModel):
    kind: DomainKind = DomainKind.UNIT_SQUARE
    initial_subdivision: int = Field(default=1, ge=1)

    @property
    def area(self) -> float:
        if self.kind == DomainKind.L_SHAPE:
            return 3.0
        return 1.0


class HarmonicPotential(StrictModel):
    """W(x) = sum_i gamma_i x_i^2."""

    gammas: tuple[float, ...] = (1.0, 1.0)

    @field_validator("gammas")
    @classmethod
    def _non_negative(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if len(value) not in (2, 3):
            msg = "potential needs one coefficient per space dimension"
            raise ValueError(msg)
        if any(g < 0 for g in value):
            msg = "potential coefficients must be non-negative"
            raise ValueError(msg)
        return value

    @property
    def is_zero(self) -> bool:
        return all(g == 0 for g in self.gammas)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        gammas = np.asarray(self.gammas[: points.shape[-1]], dtype=float)
        return (points**2) @ gammas


## Solver


class Method(StrEnum):
    TENSOR = "tensor"
    BASELINE = "baseline"
    DIRECT = "direct"


class ScfConfig(StrictModel):
    damping: float = Field(default=0.5, gt=0.0, le=1.0)
    tol_lambda: float = Field(default=1e-10, gt=0.0)
    tol_u: float = Field(default=1e-8, gt=0.0)
    max_iters: int = Field(default=2000, ge=1)


class SolverConfig(StrictModel):
    domain: DomainSpec = DomainSpec(initial_subdivision=4)
    n_levels: int = Field(default=4, ge=1)
    zeta: float = Field(default=0.0, ge=0.0)
    potential: HarmonicPotential = HarmonicPotential()
    scf: ScfConfig = ScfConfig()
    c_sigma: float = Field(default=0.1, gt=0.0)
    method: Method = Method.TENSOR
    h1_refinements: int = Field(default=0, ge=0)
    reference_lambda: float | None = None
    seed: int | None = None
    dump_mesh: bool = False

    @model_validator(mode="after")
    def _levels_for_method(self):
        if self.method != Method.DIRECT and self.n_levels < 2:
            msg = f"n_levels must be >= 2 for the {self.method} method"
            raise ValueError(msg)
        return self


class BenchMethod(StrEnum):
    TENSOR = "tensor"
    BASELINE = "baseline"
    DIRECT_LINEAR = "direct-linear"


class BenchConfig(StrictModel):
    zeta_values: list[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0, 1000.0], min_length=1)
    methods: list[BenchMethod] = Field(
        default_factory=lambda: [BenchMethod.TENSOR, BenchMethod.BASELINE, BenchMethod.DIRECT_LINEAR], min_length=1
    )

    @field_validator("zeta_values")
    @classmethod
    def _non_negative(cls, value: list[float]) -> list[float]:
        if any(z < 0 for z in value):
            msg = "zeta values must be non-negative"
            raise ValueError(msg)
        return value


class AdaptConfig(StrictModel):
    theta_mark: float = Field(default=0.5, gt=0.0, lt=1.0)
    max_dofs: int = Field(default=5000, ge=1)


class RunConfig(StrictModel):
    solver: SolverConfig = SolverConfig()
    bench: BenchConfig = BenchConfig()
    adapt: AdaptConfig = AdaptConfig()


## Runs


class Command(StrEnum):
    SOLVE = "solve"
    BENCH = "bench"
    ADAPT = "adapt"


class RunManifest(StrictModel):
    command: Command
    config_path: str
    out_dir: str
    repetitions: int = Field(default=3, ge=1)


## Reports


class LevelRecord(BaseModel):
    level: int
    n_dofs: int
    eigenvalue: float
    scf_iters: int = 0
    mg_cycles: int = 0
    alpha: float | None = None
    t_linear: float = Field(default=0.0, ge=0.0)
    t_nonlinear: float = Field(default=0.0, ge=0.0)
    t_total: float = Field(default=0.0, ge=0.0)
    err_lambda: float | None = None
    total_eta: float | None = None


class SolveReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: SolverConfig
    levels: list[LevelRecord]
    eigenvalue: float
    n_dofs: int
    coefficients: list[float]
    wall_clock: float = Field(default=0.0, ge=0.0)
    # in-process handle on the final Eigenpair, never serialised
    eigenpair: Any = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def _final_level_matches(self):
        if self.levels and self.levels[-1].eigenvalue != self.eigenvalue:
            msg = "final level record does not match the reported eigenvalue"
            raise ValueError(msg)
        return self
