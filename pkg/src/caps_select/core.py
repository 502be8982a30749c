"""Domain types and configuration shared by the selection pipeline."""

from __future__ import annotations

import enum
import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional


class CapsError(Exception):
    """Base class for errors raised by this package."""


class InvalidConfig(CapsError, ValueError):
    pass


class Level(str, enum.Enum):
    """Evidence level: signature only, partial view, full solution."""

    E0 = "E0"
    E1 = "E1"
    E2 = "E2"


class Winner(str, enum.Enum):
    A = "A"
    B = "B"
    TIE = "TIE"


class Confidence(str, enum.Enum):
    HIGH = "HIGH"
    LOW = "LOW"


@dataclass(frozen=True)
class RawVerdict:
    winner: Winner
    confidence: Confidence

    def __str__(self) -> str:
        return f"{self.winner.value}+{self.confidence.value}"


@dataclass(frozen=True)
class Candidate:
    """One sampled solution.

    ``ground_truth`` is only known in simulation and offline evaluation; the
    selection methods never read it.
    """

    id: int
    raw_text: str
    solution_span: str
    reasoning_span: Optional[str] = None
    ground_truth: Optional[bool] = None

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"candidate id must be non-negative, got {self.id}")
        if self.solution_span not in self.raw_text:
            raise ValueError(f"candidate {self.id}: solution_span is not a substring of raw_text")


def check_pool(pool: Iterable[Candidate]) -> list[Candidate]:
    pool = list(pool)
    ids = [c.id for c in pool]
    if len(set(ids)) != len(ids):
        raise ValueError("candidate ids must be unique within a pool")
    return pool


# Rescue margin from the main-text configuration, and the value listed in the
# verification hyperparameter table.
RESCUE_MARGIN = 0.15
RESCUE_MARGIN_TABLE = 0.20


@dataclass(frozen=True)
class CapsConfig:
    finalist_count: int = 4
    rescue_margin: float = RESCUE_MARGIN
    confidence_floor: float = 0.05
    rescue_enabled: bool = True
    dedup_enabled: bool = True
    # False runs Stage A at full evidence (the "all stages at E2" ablation).
    e1_enabled: bool = True
    # Ablation switches: w == 1 for every call, and random Stage-A pairing.
    confidence_weighting: bool = True
    slaughter_pairing: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.finalist_count < 1:
            raise InvalidConfig(f"finalist_count must be >= 1, got {self.finalist_count}")
        if not 0 < self.confidence_floor <= 1:
            raise InvalidConfig(f"confidence_floor must lie in (0, 1], got {self.confidence_floor}")
        if self.rescue_margin < 0:
            raise InvalidConfig(f"rescue_margin must be >= 0, got {self.rescue_margin}")

    @classmethod
    def table_preset(cls, **overrides) -> "CapsConfig":
        """Configuration with the hyperparameter-table rescue margin (0.20)."""
        overrides.setdefault("rescue_margin", RESCUE_MARGIN_TABLE)
        return cls(**overrides)


@dataclass(frozen=True)
class SwissConfig:
    budget_multiplier: float = 3.0
    min_degree: int = 2
    window: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.budget_multiplier < 1:
            raise InvalidConfig("budget_multiplier must be >= 1")
        if self.min_degree < 1:
            raise InvalidConfig("min_degree must be >= 1")
        if self.window < 1:
            raise InvalidConfig("window must be >= 1")


def validate_config(cfg: CapsConfig, pool_size: int) -> CapsConfig:
    """Check that ``cfg`` can produce its finalist pool from ``pool_size`` candidates.

    One E1 halving leaves ``ceil(pool_size / 2)`` candidates, so a larger
    finalist count is unreachable.
    """
    if pool_size < 1:
        raise InvalidConfig("pool must contain at least one candidate")
    if not 0 < cfg.confidence_floor <= 1:
        raise InvalidConfig(f"confidence_floor out of range: {cfg.confidence_floor}")
    after_stage_a = math.ceil(pool_size / 2)
    if cfg.finalist_count > after_stage_a:
        raise InvalidConfig(
            f"finalist_count={cfg.finalist_count} exceeds the {after_stage_a} candidates "
            f"left after one halving of {pool_size}"
        )
    return cfg


@dataclass(frozen=True)
class JudgeOutcome:
    """One pairwise judgment, ``v`` from ``i``'s perspective."""

    i: int
    j: int
    v: float
    w: float
    level: Level
    raw_verdict: RawVerdict
    token_cost: int = 0
    stage: str = ""

    def __post_init__(self):
        if self.v not in (0.0, 0.5, 1.0):
            raise ValueError(f"outcome v must be 0, 1/2 or 1, got {self.v}")
        if not 0 < self.w <= 1:
            raise ValueError(f"weight must lie in (0, 1], got {self.w}")
        if (self.v == 0.5) != (self.raw_verdict.winner is Winner.TIE):
            raise ValueError("v == 1/2 exactly when the verdict is a tie")
        if self.token_cost < 0:
            raise ValueError("token_cost must be non-negative")

    def winner_id(self) -> Optional[int]:
        if self.v == 1.0:
            return self.i
        if self.v == 0.0:
            return self.j
        return None

    def as_record(self) -> dict:
        return {
            "i": self.i,
            "j": self.j,
            "v": self.v,
            "w": self.w,
            "level": self.level.value,
            "verdict": str(self.raw_verdict),
            "token_cost": self.token_cost,
            "stage": self.stage,
        }


@dataclass
class TournamentState:
    """Cumulative scores, cluster sizes and the comparison transcript."""

    cluster_sizes: dict[int, int]
    seed: int = 0
    scores: dict[int, float] = field(default_factory=dict)
    transcript: list[JudgeOutcome] = field(default_factory=list)

    def __post_init__(self):
        for cid in self.cluster_sizes:
            self.scores.setdefault(cid, 0.0)
        self.rng = random.Random(self.seed)

    def apply(self, outcome: JudgeOutcome) -> None:
        self.scores[outcome.i] += outcome.w * outcome.v
        self.scores[outcome.j] += outcome.w * (1.0 - outcome.v)
        self.transcript.append(outcome)

    def nu(self, cid: int) -> int:
        return self.cluster_sizes.get(cid, 1)

    @classmethod
    def replay(cls, transcript: Iterable[JudgeOutcome], cluster_sizes: dict[int, int]) -> "TournamentState":
        state = cls(dict(cluster_sizes))
        for outcome in transcript:
            state.apply(outcome)
        return state


def transcript_digest(transcript: Iterable[JudgeOutcome]) -> str:
    """64-bit hex digest of the canonical transcript encoding."""
    h = hashlib.blake2b(digest_size=8)
    for outcome in transcript:
        h.update(json.dumps(outcome.as_record(), sort_keys=True).encode())
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class SelectionResult:
    method: str
    winner: int
    finalists: list[int] = field(default_factory=list)
    calls: dict[str, int] = field(default_factory=dict)
    transcript: list[JudgeOutcome] = field(default_factory=list)
    rescued: bool = False
    rescued_id: Optional[int] = None
    stage_c_scores: dict[int, float] = field(default_factory=dict)
    cluster_sizes: dict[int, int] = field(default_factory=dict)
    extra_tokens: int = 0  # pointwise ratings: not part of the pairwise transcript

    def tokens(self, level: Level) -> int:
        return sum(o.token_cost for o in self.transcript if o.level is level)

    @property
    def calls_e1(self) -> int:
        return sum(1 for o in self.transcript if o.level is Level.E1)

    @property
    def calls_e2(self) -> int:
        return sum(1 for o in self.transcript if o.level is Level.E2)

    @property
    def total_calls(self) -> int:
        return sum(self.calls.values())

    @property
    def total_tokens(self) -> int:
        return sum(o.token_cost for o in self.transcript) + self.extra_tokens

    @property
    def digest(self) -> str:
        return transcript_digest(self.transcript)

    def as_record(self, include_transcript: bool = False) -> dict:
        record = {
            "method": self.method,
            "winner": self.winner,
            "finalists": list(self.finalists),
            "calls": dict(self.calls),
            "tokens_e1": self.tokens(Level.E1),
            "tokens_e2": self.tokens(Level.E2),
            "total_tokens": self.total_tokens,
            "rescued": self.rescued,
            "rescued_id": self.rescued_id,
            "transcript_digest": self.digest,
        }
        if include_transcript:
            record["transcript"] = [o.as_record() for o in self.transcript]
        return record
