"""Closed-form verifier-token cost of the cascade and of the baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

from .core import InvalidConfig, Level, SelectionResult

Number = Union[int, float]


@dataclass(frozen=True)
class CostModel:
    """Average input tokens per judge call at each evidence level."""

    T1: Number
    T2: Number
    T_ovhd: Number = 0

    def __post_init__(self):
        if not 0 < self.T1 <= self.T2:
            raise InvalidConfig(f"need 0 < T1 <= T2, got T1={self.T1}, T2={self.T2}")
        if self.T_ovhd < 0:
            raise InvalidConfig("T_ovhd must be non-negative")

    @property
    def rho(self) -> float:
        return self.T1 / self.T2

    @classmethod
    def from_view_sizes(cls, avg_e1: Number, avg_e2: Number, T_ovhd: Number = 0) -> "CostModel":
        return cls(per_call_cost(Level.E1, avg_e1, T_ovhd), per_call_cost(Level.E2, avg_e2, T_ovhd), T_ovhd)

    @classmethod
    def from_rho(cls, rho: float, T2: Number = 1.0) -> "CostModel":
        return cls(rho * T2, T2)

    def per_call(self, level: Level) -> Number:
        return self.T1 if level is Level.E1 else self.T2


# Token figures reported for the standard configuration.
REFERENCE_COST_MODEL = CostModel(1000, 8500, 500)


def per_call_cost(level: Level, avg_view_tokens: Number, T_ovhd: Number) -> Number:
    """Two candidate views plus the fixed prompt; ``level`` does not change the formula."""
    if avg_view_tokens < 0 or T_ovhd < 0:
        raise ValueError("token counts must be non-negative")
    return 2 * avg_view_tokens + T_ovhd


@dataclass(frozen=True)
class Schedule:
    """Call counts of one cascade run with dedup and rescue off."""

    n: int
    f: int
    calls_a: int
    calls_b: tuple[int, ...]  # per Stage-B round
    finalists: int

    @property
    def rounds_b(self) -> int:
        return len(self.calls_b)

    @property
    def calls_c(self) -> int:
        return math.comb(self.finalists, 2)

    @property
    def calls_e1(self) -> int:
        return self.calls_a

    @property
    def calls_e2(self) -> int:
        return sum(self.calls_b) + self.calls_c


def stage_b_schedule(n: int, f: int) -> Schedule:
    """Halving recurrence: N1 = ceil(n/2), N_{r+1} = ceil(N_r/2) while N_r > f.

    Halving can overshoot below ``f`` (e.g. 5 -> 3 with f=4), in which case
    the round-robin runs over fewer than ``f`` finalists.
    """
    if n < 1 or f < 1:
        raise ValueError("need n >= 1 and f >= 1")
    if n == 1:
        return Schedule(1, f, 0, (), 1)
    size = math.ceil(n / 2)
    rounds = []
    while size > f and size > 1:
        rounds.append(size // 2)
        size = math.ceil(size / 2)
    return Schedule(n, f, n // 2, tuple(rounds), size)


def r_b(n: int, f: int) -> int:
    """Number of Stage-B halving rounds; 0 when one halving already leaves at most f."""
    n1 = math.ceil(n / 2)
    if n1 <= f:
        return 0
    return math.ceil(math.log2(n1 / f))


def caps_cost_closed_form(n: int, f: int, cm: CostModel) -> Number:
    s = stage_b_schedule(n, f)
    return s.calls_a * cm.T1 + (sum(s.calls_b) + s.calls_c) * cm.T2


def caps_cost_asymptotic(n: int, f: int, cm: CostModel) -> float:
    return (n / 2) * (cm.T1 + cm.T2) - f * cm.T2 + math.comb(f, 2) * cm.T2


def rescue_overhead(f: int, cm: CostModel, p_r: float) -> tuple[float, float]:
    """Mean and variance of the extra round-robin cost from rescue.

    A readmitted candidate plays each of the ``f`` finalists once at E2.
    """
    if not 0 <= p_r <= 1:
        raise ValueError(f"p_R must lie in [0, 1], got {p_r}")
    extra = f * cm.T2
    return p_r * extra, p_r * (1 - p_r) * extra ** 2


def expected_cost_with_rescue(n: int, f: int, cm: CostModel, p_r: float) -> tuple[float, float]:
    """(expected cost, variance) of the cascade with rescue enabled."""
    mean, var = rescue_overhead(f, cm, p_r)
    return caps_cost_closed_form(n, f, cm) + mean, var


def swiss_budget(n: int, k: float = 3.0) -> int:
    return round(k * n)


def swiss_cost(n: int, cm: CostModel, k: float = 3.0) -> Number:
    return swiss_budget(n, k) * cm.T2


def pointwise_cost(n: int, avg_e2_view: Number, T_ovhd: Number = 0) -> Number:
    return n * (avg_e2_view + T_ovhd)


def t_percent(caps_tokens: Number, baseline_tokens: Number) -> float:
    if baseline_tokens <= 0:
        raise ValueError("baseline_tokens must be positive")
    return 100.0 * caps_tokens / baseline_tokens


def asymptotic_t_fraction(rho: float, k: float = 3.0) -> float:
    """Limit of cascade cost over a k*N-call all-E2 budget as N grows."""
    return (1 + rho) / (2 * k)


def cost_record(method: str, calls_e1: int, calls_e2: int, tokens_e1: Number, tokens_e2: Number,
                baseline_tokens: Optional[Number] = None) -> dict:
    total = tokens_e1 + tokens_e2
    return {
        "method": method,
        "calls_e1": calls_e1,
        "calls_e2": calls_e2,
        "tokens_e1": tokens_e1,
        "tokens_e2": tokens_e2,
        "total": total,
        "t_percent": t_percent(total, baseline_tokens) if baseline_tokens else None,
    }


def closed_form_record(n: int, f: int, cm: CostModel, k: float = 3.0) -> dict:
    s = stage_b_schedule(n, f)
    rec = cost_record("caps", s.calls_e1, s.calls_e2, s.calls_e1 * cm.T1, s.calls_e2 * cm.T2, swiss_cost(n, cm, k))
    rec.update({"n": n, "f": f, "rounds_b": s.rounds_b, "finalists": s.finalists,
                "asymptotic": caps_cost_asymptotic(n, f, cm)})
    return rec


def result_record(result: SelectionResult, baseline_tokens: Optional[Number] = None) -> dict:
    """Cost record of an executed selection from its token ledger."""
    tokens_e2 = result.tokens(Level.E2) + result.extra_tokens
    calls_e2 = result.calls_e2 + result.calls.get("pointwise", 0)
    return cost_record(result.method, result.calls_e1, calls_e2, result.tokens(Level.E1), tokens_e2, baseline_tokens)
