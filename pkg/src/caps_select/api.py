"""Request handlers shared by the HTTP service and the in-process CLI."""

from __future__ import annotations

from dataclasses import replace

from .core import CapsConfig, SwissConfig
from .cost import CostModel, closed_form_record, expected_cost_with_rescue
from .evidence import EvidenceExtractor, make_candidate
from .gateway import ChatClient
from .harness import PoolSpec, run_experiment, run_method
from .judge import SIM_PRESETS, CountingJudge, Judge, LLMJudge, SimJudgeConfig, SimulatedJudge
from .schemas import (
    CapsParams,
    CostRequest,
    CostResponse,
    SelectRequest,
    SelectResponse,
    SimJudgeParams,
    SimulateRequest,
    SimulateResponse,
    SwissParams,
)


def sim_config(params: SimJudgeParams, seed: int = 0) -> SimJudgeConfig:
    base = SIM_PRESETS[params.preset] if params.preset else SimJudgeConfig()
    overrides = {k: v for k, v in params.model_dump(exclude={"preset"}).items() if v is not None}
    return replace(base, seed=seed, **overrides)


def caps_config(params: CapsParams, seed: int = 0) -> CapsConfig:
    return CapsConfig(seed=seed, **params.model_dump())


def swiss_config(params: SwissParams, seed: int = 0) -> SwissConfig:
    return SwissConfig(seed=seed, **params.model_dump())


def build_judge(req: SelectRequest) -> Judge:
    if req.judge == "counting":
        return CountingJudge(tau_w=req.caps.confidence_floor)
    if req.judge == "llm":
        if req.llm is None:
            raise ValueError("judge 'llm' needs llm settings")
        client = ChatClient(req.llm.endpoint, api_key_env=req.llm.api_key_env, max_in_flight=req.llm.max_in_flight)
        return LLMJudge(client, req.llm.model, req.domain, tau_w=req.caps.confidence_floor,
                        pairwise_format=req.llm.pairwise_format)
    return SimulatedJudge(sim_config(req.sim, req.seed), tau_w=req.caps.confidence_floor)


def handle_select(req: SelectRequest) -> SelectResponse:
    pool = [make_candidate(c.id, c.raw_text, req.domain, c.ground_truth) for c in req.candidates]
    judge = build_judge(req)
    try:
        result = run_method(req.method, req.problem_text, pool, judge, req.seed, caps_config(req.caps),
                            swiss_config(req.swiss), req.random_count, EvidenceExtractor(req.domain), req.domain)
    finally:
        client = getattr(judge, "client", None)
        if client is not None:
            client.close()
    return SelectResponse(**result.as_record(include_transcript=req.include_transcript))


def handle_simulate(req: SimulateRequest) -> SimulateResponse:
    spec = PoolSpec(**req.pool.model_dump())
    report = run_experiment(req.methods, spec, sim_config(req.sim), req.trials, caps_config(req.caps),
                            swiss_config(req.swiss), req.random_count, keep_records=req.include_records)
    body = report.as_dict(include_records=req.include_records)
    if not req.include_records:
        body["records"] = None
    return SimulateResponse(**body)


def handle_cost(req: CostRequest) -> CostResponse:
    cm = CostModel(req.T1, req.T2, req.T_ovhd)
    rows = []
    for n in req.n:
        row = closed_form_record(n, req.f, cm, req.k)
        if req.p_r is not None:
            mean, var = expected_cost_with_rescue(n, req.f, cm, req.p_r)
            row.update({"expected_with_rescue": mean, "rescue_std": var ** 0.5})
        rows.append(row)
    return CostResponse(rows=rows)
