"""Request and response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from .baselines import METHODS

Method = Literal["vanilla", "pointwise", "random", "swiss", "caps", "caps_r"]
assert set(Method.__args__) == set(METHODS)


class CandidateIn(BaseModel):
    id: int = Field(ge=0)
    raw_text: str
    ground_truth: Optional[bool] = None


class CapsParams(BaseModel):
    finalist_count: int = Field(4, ge=1)
    rescue_margin: float = Field(0.15, ge=0)
    confidence_floor: float = Field(0.05, gt=0, le=1)
    dedup_enabled: bool = True
    e1_enabled: bool = True
    confidence_weighting: bool = True
    slaughter_pairing: bool = True


class SwissParams(BaseModel):
    budget_multiplier: float = Field(3.0, ge=1)
    min_degree: int = Field(2, ge=1)
    window: int = Field(3, ge=1)


class SimJudgeParams(BaseModel):
    preset: Optional[str] = None
    accuracy_e1: Optional[float] = Field(None, ge=0, le=1)
    accuracy_e2: Optional[float] = Field(None, ge=0, le=1)
    p_high_when_correct: Optional[float] = Field(None, ge=0, le=1)
    p_high_when_wrong: Optional[float] = Field(None, ge=0, le=1)
    p_high_when_equal: Optional[float] = Field(None, ge=0, le=1)
    p_tie_when_equal: Optional[float] = Field(None, ge=0, le=1)


class LLMJudgeParams(BaseModel):
    endpoint: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    pairwise_format: Literal["verdict", "rating"] = "verdict"
    max_in_flight: int = Field(16, ge=1)


class SelectRequest(BaseModel):
    problem_text: str
    domain: Literal["code", "math"] = "code"
    candidates: list[CandidateIn] = Field(min_length=1)
    method: Method = "caps_r"
    seed: int = 0
    caps: CapsParams = CapsParams()
    swiss: SwissParams = SwissParams()
    random_count: Optional[int] = Field(None, ge=0)
    judge: Literal["simulated", "llm", "counting"] = "simulated"
    sim: SimJudgeParams = SimJudgeParams()
    llm: Optional[LLMJudgeParams] = None
    include_transcript: bool = False


class SelectResponse(BaseModel):
    method: str
    winner: int
    finalists: list[int]
    calls: dict[str, int]
    tokens_e1: int
    tokens_e2: int
    total_tokens: int
    rescued: bool
    rescued_id: Optional[int] = None
    transcript_digest: str
    transcript: Optional[list[dict]] = None


class PoolSpecParams(BaseModel):
    N: int = Field(16, ge=1)
    p_correct: float = Field(0.3, ge=0, le=1)
    dup_profile: str = "distinct"
    seed: int = 0
    domain: Literal["code", "math"] = "code"


class SimulateRequest(BaseModel):
    methods: list[Method] = ["vanilla", "pointwise", "random", "swiss", "caps", "caps_r"]
    pool: PoolSpecParams = PoolSpecParams()
    sim: SimJudgeParams = SimJudgeParams()
    caps: CapsParams = CapsParams()
    swiss: SwissParams = SwissParams()
    random_count: Optional[int] = Field(None, ge=0)
    trials: int = Field(100, ge=1)
    include_records: bool = False


class SimulateResponse(BaseModel):
    trials: int
    pass_at_n: float
    trivial_fraction: float
    delta_pp: Optional[float] = None
    p_r: Optional[float] = None
    master_seed: Optional[int] = None
    trial_seeds: list[int]
    methods: dict[str, dict]
    records: Optional[list[dict]] = None


class CostRequest(BaseModel):
    n: list[int] = Field(min_length=1)
    f: int = Field(4, ge=1)
    T1: float = Field(1000.0, gt=0)
    T2: float = Field(8500.0, gt=0)
    T_ovhd: float = Field(500.0, ge=0)
    k: float = Field(3.0, ge=1)
    p_r: Optional[float] = Field(None, ge=0, le=1)


class CostResponse(BaseModel):
    rows: list[dict]
