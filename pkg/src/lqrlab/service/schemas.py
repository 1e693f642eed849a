"""Request and response models for the HTTP service.

Matrices travel as row-major nested lists, the same layout as instance
files.  JSON cannot carry inf, so summary statistics use null for the
failure sentinel; the CSV artifact keeps the `inf` spelling and is the
canonical record of a bench run.
"""

from __future__ import annotations

import math

from pydantic import BaseModel, Field

Matrix = list[list[float]]
Vector = list[float]


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


class InstancePayload(BaseModel):
    """Mirror of the instance-file document."""

    A: Matrix
    B: Matrix
    Q: Matrix
    R: Matrix
    S: Matrix | None = None
    noise_cov: Matrix | None = None
    x0: Vector
    episode_len: int = Field(gt=0)

    def to_document(self):
        doc = self.model_dump()
        if doc["S"] is None:
            doc.pop("S")
        if doc["noise_cov"] is None:
            doc.pop("noise_cov")
        return doc


class SolveRequest(BaseModel):
    instance: InstancePayload


class SolveResponse(BaseModel):
    M: Matrix
    K: Matrix
    spectral_radius: float
    noise_cost: float
    residual: float
    iterations: int


class IdentifyRequest(BaseModel):
    instance: InstancePayload
    episodes: int = Field(default=1, gt=0)
    excitation_std: float = Field(default=1.0, gt=0)
    seed: int = 0
    ridge: float = Field(default=0.0, ge=0)


class IdentifyResponse(BaseModel):
    A_hat: Matrix
    B_hat: Matrix
    residual_cov: Matrix
    n_transitions: int
    gain: Matrix | None
    synthesis_error: str | None
    samples_used: int


class BenchRequest(BaseModel):
    spec: dict
    seed_base: int = 0


class SummaryRow(BaseModel):
    method: str
    samples: int
    median: float | None
    min: float | None
    max: float | None
    n_seeds: int
    stabilization_fraction: float


class BenchResponse(BaseModel):
    csv: str
    summaries: list[SummaryRow]


class PlotRequest(BaseModel):
    csv: str
    metric: str = "cost"


class PlotResponse(BaseModel):
    svg: str


class DiagVarianceRequest(BaseModel):
    dims: list[int]
    sigma: float = Field(default=1.0, gt=0)
    n_samples: int = Field(default=10_000, gt=0)
    seed: int = 0


class DiagVarianceResponse(BaseModel):
    dims: list[int]
    mean_norms: list[float]
    expected_norms: list[float]
    slope: float | None


class HealthResponse(BaseModel):
    status: str
    version: str
