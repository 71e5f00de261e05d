from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class TestOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(..., description="Seed for every random draw; required")
    alpha: float = Field(0.05, gt=0, lt=1)
    kernel: Literal["rect", "rectangular", "recovery", "truncated-recovery"] = "rect"
    beta: Optional[float] = Field(None, gt=0, le=1)
    K: Optional[float] = Field(None, gt=0)
    kmax: Optional[int] = Field(None, ge=1)
    perms: int = Field(999, ge=1)
    threads: int = Field(1, ge=1)
    one_sided: bool = False
    emit_perm_stats: bool = False


class TwoSampleRequest(BaseModel):
    first: List[List[float]]
    second: List[List[float]]
    options: TestOptions


class ClassifyRequest(BaseModel):
    points: List[List[float]]
    y: List[int]
    lam: float = Field(..., gt=0, lt=1)
    options: TestOptions


class VerifyRequest(BaseModel):
    suite: Literal["coupling", "decoupling", "bernstein", "all"] = "all"
    seed: int = 0
    count: int = Field(100, ge=1)
    nmax: Optional[int] = Field(None, ge=2, le=20)
    details: bool = False


class SimulateRequest(BaseModel):
    scenario: dict
    options: TestOptions
    reps: Optional[int] = Field(None, ge=1)


class Region(BaseModel):
    center: Optional[List[float]] = None
    interval: Optional[List[float]] = None
    radius: Optional[float] = None
    j: int
    k: int
    t_stat: Optional[float] = None
    u_stat: Optional[float] = None
    correction: float
    sign: int


class TestReportModel(BaseModel):
    __test__ = False  # keep pytest from collecting it

    schema_version: str
    kind: str
    config: dict
    sample: dict
    t_n: Optional[float]
    kappa_alpha: Optional[float]
    p_value: float
    reject: bool
    regions: List[Region]
    perm_stats: Optional[List[Optional[float]]] = None
    timings: dict


class VerifyReportModel(BaseModel):
    schema_version: str
    kind: str
    config: dict
    violations: int
    suites: List[dict]


class SimulateReportModel(BaseModel):
    schema_version: str
    kind: str
    scenario: dict
    config: dict
    warnings: List[str]
    summary: dict
    timings: dict


class Health(BaseModel):
    status: str
    version: str
