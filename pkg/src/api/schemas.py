import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SQRT3_2 = math.sqrt(3.0) / 2.0


class RunConfig(BaseModel):
    """Every parameter of a design/simulation run. Defaults follow the benchmark experiment."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    system: str = "benchmark"
    controller: Literal["fbl", "clf-qp", "clf-qcqp"] = "clf-qcqp"
    h: float = Field(0.2, gt=0)
    T: float = Field(20.0, gt=0)
    x0: List[float] = [1.0, 0.0, 1.0]
    K: List[List[float]] = [[0.5, SQRT3_2]]
    Q_eta: List[List[float]] = [[1.0, 0.0], [0.0, 1.0]]
    c: float = Field(0.5, gt=0, lt=1)
    d: float = Field(0.5, gt=0, lt=1)
    Q_z: List[List[float]] = [[1.0]]
    # None (or "auto") estimates L_q by sampling q over the certification ball
    L_q: Optional[float] = Field(4.0, gt=0)
    h2_star: float = Field(0.2, gt=0)
    substeps: int = Field(64, ge=1)
    R_target: float = Field(0.25, gt=0)
    output_path: str = "out"

    @field_validator("x0")
    @classmethod
    def _finite_vector(cls, v: List[float]) -> List[float]:
        if not v or not all(math.isfinite(x) for x in v):
            raise ValueError("must be a non-empty vector of finite numbers")
        return v

    @field_validator("L_q", mode="before")
    @classmethod
    def _auto_lipschitz(cls, v):
        return None if isinstance(v, str) and v.strip().lower() == "auto" else v

    @field_validator("K", "Q_eta", "Q_z")
    @classmethod
    def _finite_matrix(cls, v: List[List[float]]) -> List[List[float]]:
        if not v or any(len(row) != len(v[0]) for row in v):
            raise ValueError("must be a non-empty rectangular matrix")
        if not all(math.isfinite(x) for row in v for x in row):
            raise ValueError("entries must be finite")
        return v

    @model_validator(mode="after")
    def _horizon_covers_one_period(self) -> "RunConfig":
        if self.T < self.h:
            raise ValueError(f"T = {self.T} must be at least one sample period h = {self.h}")
        return self


class SweepRequest(BaseModel):
    config: RunConfig = Field(default_factory=RunConfig)
    hs: List[float] = Field([0.2, 0.1, 0.05, 0.025], min_length=1)

    @field_validator("hs")
    @classmethod
    def _positive_periods(cls, v: List[float]) -> List[float]:
        if not all(math.isfinite(h) and h > 0 for h in v):
            raise ValueError("sample periods must be positive and finite")
        return v


class ConsistencyRequest(BaseModel):
    config: RunConfig = Field(default_factory=RunConfig)
    h0: float = Field(0.2, gt=0)
    levels: int = Field(4, ge=2)
    lattice_points: Optional[int] = Field(None, ge=2)


class SimulationSummary(BaseModel):
    settled: bool
    terminal_norm: float
    peak_norm: float
    h_star_eta: float
    settled_time: Optional[float] = None
    R_target: float
    steps: int
    terminated_early: bool = False
    reason: Optional[str] = None


class ConsistencySummary(BaseModel):
    slope: float
    hs: List[float]
    errors_per_level: List[float]
    dropped_levels: List[float] = []
    passed: bool


class HealthCheckResponse(BaseModel):
    status: str
    version: str
