"""Pairwise judges: verdict parsing, verdict conversion and judge backends.

Every backend honours the same contract: ``compare(problem, view_a, view_b)``
returns a :class:`JudgeOutcome` whose ``v`` is from ``view_a``'s perspective
and whose weight is floored at ``tau_w``.
"""

from __future__ import annotations

import hashlib
import logging
import re
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from statistics import NormalDist
from typing import Iterable, Mapping, Optional, Sequence

from .core import CapsError, Confidence, JudgeOutcome, Level, RawVerdict, Winner
from .evidence import DEFAULT_COUNTER, EvidenceView, TokenCounter
from .gateway import ChatClient, GatewayError, JUDGE_SAMPLING, judge_template_id, render_prompt

log = logging.getLogger(__name__)

DEFAULT_TAU_W = 0.05
DEFAULT_OVERHEAD = {Level.E1: 500, Level.E2: 500}
PARSE_RETRIES = 2
POINTWISE_FALLBACK_RATING = 5


class JudgeUnavailable(CapsError):
    pass


class ParseFailure(CapsError, ValueError):
    pass


# -- parsing -------------------------------------------------------------------

_WINNER_TAG = re.compile(r"<winner>\s*(A|B|TIE)\s*</winner>", re.IGNORECASE)
_CONF_TAG = re.compile(r"<confidence>\s*(HIGH|LOW)\s*</confidence>", re.IGNORECASE)
_WINNER_LOOSE = re.compile(
    r"(?i:winner)\W{0,6}(?:(?i:is)\s+)?(?:(?i:solution|submission)\s+)?(A|B|TIE|Tie|tie)\b"
)
_CONF_LOOSE = re.compile(r"confidence\W{0,6}(?:is\s+)?(HIGH|LOW)\b", re.IGNORECASE)
_RATING_TAG = re.compile(r"<rating>\s*(\d{1,2})\s*</rating>", re.IGNORECASE)
_RATING_LOOSE = re.compile(r"rating[^\d]*(\d{1,2})", re.IGNORECASE)
_PAIR_RATING_TAG = {
    side: re.compile(rf"<rating_{side}>\s*(\d{{1,2}})\s*</rating_{side}>", re.IGNORECASE) for side in "AB"
}
_PAIR_RATING_LOOSE = {
    side: re.compile(rf"rating[\s_]*{side}\b[^\d]*(\d{{1,2}})", re.IGNORECASE) for side in "AB"
}


def _last(pattern: re.Pattern, text: str) -> Optional[str]:
    matches = pattern.findall(text)
    return matches[-1] if matches else None


def match_verdict(text: str) -> tuple[Optional[Winner], Optional[Confidence]]:
    winner = _last(_WINNER_TAG, text) or _last(_WINNER_LOOSE, text)
    conf = _last(_CONF_TAG, text) or _last(_CONF_LOOSE, text)
    return (
        Winner(winner.upper()) if winner else None,
        Confidence(conf.upper()) if conf else None,
    )


def parse_verdict(text: str) -> RawVerdict:
    """Total parser: no winner is a failed parse, (TIE, LOW); a missing confidence is LOW."""
    winner, conf = match_verdict(text)
    if winner is None:
        return RawVerdict(Winner.TIE, Confidence.LOW)
    return RawVerdict(winner, conf or Confidence.LOW)


def _clamp_rating(value: int) -> int:
    return min(10, max(1, value))


def parse_rating(text: str) -> int:
    raw = _last(_RATING_TAG, text) or _last(_RATING_LOOSE, text)
    if raw is None:
        raise ParseFailure("no rating found")
    return _clamp_rating(int(raw))


def parse_pair_ratings(text: str) -> tuple[int, int]:
    ratings = []
    for side in "AB":
        raw = _last(_PAIR_RATING_TAG[side], text) or _last(_PAIR_RATING_LOOSE[side], text)
        if raw is None:
            raise ParseFailure(f"no rating for solution {side}")
        ratings.append(_clamp_rating(int(raw)))
    return ratings[0], ratings[1]


# -- verdict conversion ----------------------------------------------------------

# verdict -> (rating A, rating B, margin); margins as published, TIE floored later.
VERDICT_TABLE: dict[tuple[Winner, Confidence], tuple[int, int, float]] = {
    (Winner.A, Confidence.HIGH): (9, 3, 0.67),
    (Winner.A, Confidence.LOW): (7, 5, 0.22),
    (Winner.B, Confidence.HIGH): (3, 9, 0.67),
    (Winner.B, Confidence.LOW): (5, 7, 0.22),
    (Winner.TIE, Confidence.HIGH): (5, 5, 0.0),
    (Winner.TIE, Confidence.LOW): (5, 5, 0.0),
}
_V = {Winner.A: 1.0, Winner.B: 0.0, Winner.TIE: 0.5}


def verdict_to_outcome(verdict: RawVerdict, tau_w: float = DEFAULT_TAU_W) -> tuple[float, float]:
    margin = VERDICT_TABLE[(verdict.winner, verdict.confidence)][2]
    return _V[verdict.winner], max(margin, tau_w)


def verdict_to_ratings(verdict: RawVerdict) -> tuple[int, int]:
    r_a, r_b, _ = VERDICT_TABLE[(verdict.winner, verdict.confidence)]
    return r_a, r_b


def ratings_to_outcome(r_a: int, r_b: int, tau_w: float = DEFAULT_TAU_W) -> tuple[RawVerdict, float, float]:
    """V1 rating interface: equal ratings tie, margin |r_a - r_b| / 9."""
    margin = abs(r_a - r_b) / 9
    winner = Winner.A if r_a > r_b else Winner.B if r_b > r_a else Winner.TIE
    conf = Confidence.HIGH if margin >= 0.5 else Confidence.LOW
    return RawVerdict(winner, conf), _V[winner], max(margin, tau_w)


def make_outcome(a: EvidenceView, b: EvidenceView, verdict: RawVerdict, tau_w: float, token_cost: int) -> JudgeOutcome:
    v, w = verdict_to_outcome(verdict, tau_w)
    return JudgeOutcome(a.candidate.id, b.candidate.id, v, w, a.level, verdict, token_cost)


# -- backends ----------------------------------------------------------------------

class Judge:
    """Base class; subclasses implement ``compare`` and ``rate``."""

    tau_w: float = DEFAULT_TAU_W

    def compare(self, problem: str, a: EvidenceView, b: EvidenceView) -> JudgeOutcome:
        raise NotImplementedError

    def compare_many(self, problem: str, pairs: Sequence[tuple[EvidenceView, EvidenceView]]) -> list[JudgeOutcome]:
        """Judge independent pairs; results come back in input order."""
        return [self.compare(problem, a, b) for a, b in pairs]

    def rate(self, problem: str, view: EvidenceView) -> tuple[int, int]:
        """Pointwise 1-10 rating of one full view; returns (rating, token_cost)."""
        raise NotImplementedError


def _check_levels(a: EvidenceView, b: EvidenceView) -> None:
    if a.level != b.level or a.level not in (Level.E1, Level.E2):
        raise ValueError(f"judge needs two views at E1 or E2, got {a.level} and {b.level}")


@dataclass(frozen=True)
class SimJudgeConfig:
    """Parameters of the stochastic judge.

    When the two candidates differ in correctness the judge picks the correct
    one with the accuracy of the evidence level, and reports HIGH confidence
    with ``p_high_when_correct`` if right (``p_high_when_wrong`` if wrong,
    defaulting to ``1 - p_high_when_correct``). Equal-correctness pairs tie
    with ``p_tie_when_equal`` and otherwise get a uniform winner, reported
    HIGH with ``p_high_when_equal`` (LOW by default).
    """

    accuracy_e1: float = 0.8
    accuracy_e2: float = 0.85
    p_high_when_correct: float = 0.7
    p_tie_when_equal: float = 0.3
    seed: int = 0
    p_high_when_wrong: Optional[float] = None
    pointwise_mean_correct: float = 7.0
    pointwise_mean_incorrect: float = 5.0
    pointwise_sd: float = 1.5
    p_high_when_equal: float = 0.0

    def __post_init__(self):
        for name in ("accuracy_e1", "accuracy_e2", "p_high_when_correct", "p_tie_when_equal", "p_high_when_equal"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.p_high_when_wrong is not None and not 0 <= self.p_high_when_wrong <= 1:
            raise ValueError("p_high_when_wrong must lie in [0, 1]")
        if self.pointwise_sd < 0:
            raise ValueError("pointwise_sd must be non-negative")

    @property
    def high_when_wrong(self) -> float:
        if self.p_high_when_wrong is None:
            return 1.0 - self.p_high_when_correct
        return self.p_high_when_wrong

    def accuracy(self, level: Level) -> float:
        return self.accuracy_e1 if level is Level.E1 else self.accuracy_e2

    def with_seed(self, seed: int) -> "SimJudgeConfig":
        return replace(self, seed=seed)


SIM_PRESETS: dict[str, SimJudgeConfig] = {
    "perfect": SimJudgeConfig(1.0, 1.0, 1.0, 1.0, pointwise_mean_correct=9, pointwise_mean_incorrect=3, pointwise_sd=0),
    "null": SimJudgeConfig(0.5, 0.5, 0.0, 0.0, p_high_when_wrong=0.0, pointwise_mean_correct=5,
                           pointwise_mean_incorrect=5, pointwise_sd=0),
    "default": SimJudgeConfig(),
    # Confident judge that hedges on a quarter of its mistakes. With the
    # default pool (N=16, p_correct=0.3, distinct signatures) the rescue step
    # fires on about 12.5% of problems.
    "rescue_band": SimJudgeConfig(0.8, 0.85, 1.0, 0.0, p_high_when_wrong=0.75, p_high_when_equal=1.0),
}

_NORMAL = NormalDist()


class SimulatedJudge(Judge):
    """Stochastic judge driven by ground-truth correctness.

    Randomness for each call is derived from (seed, unordered pair, level,
    occurrence), so results do not depend on evaluation order and swapping
    the two views mirrors the outcome exactly.
    """

    def __init__(
        self,
        cfg: SimJudgeConfig,
        tau_w: float = DEFAULT_TAU_W,
        overhead: Optional[Mapping[Level, int]] = None,
    ):
        self.cfg = cfg
        self.tau_w = tau_w
        self.overhead = dict(DEFAULT_OVERHEAD if overhead is None else overhead)
        self._seen: dict[tuple, int] = defaultdict(int)

    def _uniforms(self, *key) -> tuple[float, float]:
        occurrence = self._seen[key]
        self._seen[key] = occurrence + 1
        digest = hashlib.blake2b(repr((self.cfg.seed, key, occurrence)).encode(), digest_size=16).digest()
        u1 = (int.from_bytes(digest[:8], "little") >> 11) * 2.0 ** -53
        u2 = (int.from_bytes(digest[8:], "little") >> 11) * 2.0 ** -53
        return u1, u2

    def compare(self, problem: str, a: EvidenceView, b: EvidenceView) -> JudgeOutcome:
        _check_levels(a, b)
        ca, cb = a.candidate, b.candidate
        if ca.ground_truth is None or cb.ground_truth is None:
            raise ValueError("simulated judge needs ground-truth labels")
        lo, hi = (ca, cb) if ca.id < cb.id else (cb, ca)
        u1, u2 = self._uniforms(lo.id, hi.id, a.level.value)
        if ca.ground_truth != cb.ground_truth:
            right = u1 < self.cfg.accuracy(a.level)
            correct = ca if ca.ground_truth else cb
            picked = correct if right else (cb if correct is ca else ca)
            p_high = self.cfg.p_high_when_correct if right else self.cfg.high_when_wrong
            conf = Confidence.HIGH if u2 < p_high else Confidence.LOW
        elif u1 < self.cfg.p_tie_when_equal:
            picked, conf = None, Confidence.LOW
        else:
            # u1 is uniform on [p_tie, 1) here; rescale it for the confidence draw.
            u3 = (u1 - self.cfg.p_tie_when_equal) / (1.0 - self.cfg.p_tie_when_equal)
            picked = lo if u2 < 0.5 else hi
            conf = Confidence.HIGH if u3 < self.cfg.p_high_when_equal else Confidence.LOW
        if picked is None:
            winner = Winner.TIE
        else:
            winner = Winner.A if picked is ca else Winner.B
        cost = a.size_tokens + b.size_tokens + self.overhead[a.level]
        return make_outcome(a, b, RawVerdict(winner, conf), self.tau_w, cost)

    def rate(self, problem: str, view: EvidenceView) -> tuple[int, int]:
        c = view.candidate
        if c.ground_truth is None:
            raise ValueError("simulated judge needs ground-truth labels")
        u, _ = self._uniforms("pointwise", c.id)
        mean = self.cfg.pointwise_mean_correct if c.ground_truth else self.cfg.pointwise_mean_incorrect
        z = _NORMAL.inv_cdf(min(max(u, 1e-12), 1 - 1e-12))
        rating = _clamp_rating(round(mean + self.cfg.pointwise_sd * z))
        return rating, view.size_tokens + self.overhead[Level.E2]


class CountingJudge(Judge):
    """Always prefers view A at HIGH confidence; charges view sizes plus overhead."""

    def __init__(self, tau_w: float = DEFAULT_TAU_W, overhead: Optional[Mapping[Level, int]] = None):
        self.tau_w = tau_w
        self.overhead = dict(DEFAULT_OVERHEAD if overhead is None else overhead)
        self.calls = {Level.E1: 0, Level.E2: 0}

    def compare(self, problem: str, a: EvidenceView, b: EvidenceView) -> JudgeOutcome:
        _check_levels(a, b)
        self.calls[a.level] += 1
        cost = a.size_tokens + b.size_tokens + self.overhead[a.level]
        return make_outcome(a, b, RawVerdict(Winner.A, Confidence.HIGH), self.tau_w, cost)

    def rate(self, problem: str, view: EvidenceView) -> tuple[int, int]:
        return 5, view.size_tokens + self.overhead[Level.E2]


def _judge_prompt(problem: str, a: EvidenceView, b: EvidenceView, domain: str, fmt: str) -> str:
    if fmt == "rating":
        template = judge_template_id("v1_pair", domain)
    else:
        template = judge_template_id("caps", domain, a.level.value)
    if a.level is Level.E1 and fmt != "rating":
        slots = {"evidence_A": a.text, "evidence_B": b.text}
    elif domain == "code":
        slots = {"code_A": a.text, "code_B": b.text}
    else:
        slots = {"sol_A": a.text, "sol_B": b.text}
    slots["problem"] = problem
    return render_prompt(template, slots)


def _pointwise_prompt(problem: str, view: EvidenceView, domain: str) -> str:
    slot = "code" if domain == "code" else "solution"
    return render_prompt(judge_template_id("pointwise", domain), {"problem": problem, slot: view.text})


class _TextJudge(Judge):
    """Shared decoding for backends that turn raw judge text into outcomes."""

    def __init__(self, domain: str, tau_w: float, counter: TokenCounter, pairwise_format: str):
        if pairwise_format not in ("verdict", "rating"):
            raise ValueError("pairwise_format must be 'verdict' or 'rating'")
        self.domain = domain
        self.tau_w = tau_w
        self.counter = counter
        self.pairwise_format = pairwise_format

    def _decode_pair(self, text: str) -> Optional[tuple[RawVerdict, float, float]]:
        if self.pairwise_format == "rating":
            try:
                r_a, r_b = parse_pair_ratings(text)
            except ParseFailure:
                return None
            return ratings_to_outcome(r_a, r_b, self.tau_w)
        winner, _ = match_verdict(text)
        if winner is None:
            return None
        verdict = parse_verdict(text)
        v, w = verdict_to_outcome(verdict, self.tau_w)
        return verdict, v, w

    def _fallback(self) -> tuple[RawVerdict, float, float]:
        return RawVerdict(Winner.TIE, Confidence.LOW), 0.5, self.tau_w


class LLMJudge(_TextJudge):
    """Live judge over a chat-completions endpoint, greedy decoding.

    Malformed outputs are retried up to ``parse_retries`` times; persistent
    failures become a tie at the weight floor. Every attempt's prompt is
    charged to the token ledger.
    """

    def __init__(
        self,
        client: ChatClient,
        model: str,
        domain: str,
        tau_w: float = DEFAULT_TAU_W,
        counter: TokenCounter = DEFAULT_COUNTER,
        pairwise_format: str = "verdict",
        parse_retries: int = PARSE_RETRIES,
        max_in_flight: Optional[int] = None,
    ):
        super().__init__(domain, tau_w, counter, pairwise_format)
        self.client = client
        self.model = model
        self.parse_retries = parse_retries
        self.max_in_flight = max_in_flight or client.max_in_flight

    def _ask(self, prompt: str) -> str:
        try:
            return self.client.complete(self.model, prompt, JUDGE_SAMPLING)
        except GatewayError as exc:
            raise JudgeUnavailable(str(exc)) from exc

    def compare(self, problem: str, a: EvidenceView, b: EvidenceView) -> JudgeOutcome:
        _check_levels(a, b)
        prompt = _judge_prompt(problem, a, b, self.domain, self.pairwise_format)
        prompt_tokens = self.counter.count(prompt)
        decoded = None
        attempts = 0
        while decoded is None and attempts <= self.parse_retries:
            attempts += 1
            decoded = self._decode_pair(self._ask(prompt))
            if decoded is None:
                log.info("malformed verdict for pair (%d, %d), attempt %d", a.candidate.id, b.candidate.id, attempts)
        verdict, v, w = decoded or self._fallback()
        return JudgeOutcome(a.candidate.id, b.candidate.id, v, w, a.level, verdict, prompt_tokens * attempts)

    def compare_many(self, problem, pairs):
        if len(pairs) <= 1 or self.max_in_flight <= 1:
            return super().compare_many(problem, pairs)
        with ThreadPoolExecutor(max_workers=min(self.max_in_flight, len(pairs))) as pool:
            return list(pool.map(lambda p: self.compare(problem, *p), pairs))

    def rate(self, problem: str, view: EvidenceView) -> tuple[int, int]:
        prompt = _pointwise_prompt(problem, view, self.domain)
        prompt_tokens = self.counter.count(prompt)
        for attempt in range(1, self.parse_retries + 2):
            try:
                return parse_rating(self._ask(prompt)), prompt_tokens * attempt
            except ParseFailure:
                log.info("malformed rating for candidate %d, attempt %d", view.candidate.id, attempt)
        return POINTWISE_FALLBACK_RATING, prompt_tokens * (self.parse_retries + 1)


@dataclass(frozen=True)
class FixtureRecord:
    """One recorded judge response: a pair judgment or a pointwise rating."""

    raw_text: str
    pair: Optional[tuple[int, int]] = None
    level: Optional[Level] = None
    candidate: Optional[int] = None

    @classmethod
    def from_dict(cls, d: Mapping) -> "FixtureRecord":
        pair = tuple(d["pair"]) if d.get("pair") is not None else None
        level = Level(d["level"]) if d.get("level") else None
        return cls(d["raw_text"], pair, level, d.get("candidate"))

    def to_dict(self) -> dict:
        out: dict = {"raw_text": self.raw_text}
        if self.pair is not None:
            out["pair"] = list(self.pair)
            out["level"] = self.level.value
        if self.candidate is not None:
            out["candidate"] = self.candidate
        return out


class ReplayJudge(_TextJudge):
    """Replays recorded judge responses keyed by (pair, level) or candidate.

    Decoding, retries and token accounting match :class:`LLMJudge`, so a
    recorded session (one record per endpoint response) replays to the same
    transcript. Repeated keys are consumed in recording order.
    """

    def __init__(
        self,
        records: Iterable[FixtureRecord | Mapping],
        domain: str,
        tau_w: float = DEFAULT_TAU_W,
        counter: TokenCounter = DEFAULT_COUNTER,
        pairwise_format: str = "verdict",
        parse_retries: int = PARSE_RETRIES,
    ):
        super().__init__(domain, tau_w, counter, pairwise_format)
        self.parse_retries = parse_retries
        self._pairs: dict[tuple, deque[str]] = defaultdict(deque)
        self._ratings: dict[int, deque[str]] = defaultdict(deque)
        for rec in records:
            if not isinstance(rec, FixtureRecord):
                rec = FixtureRecord.from_dict(rec)
            if rec.pair is not None:
                self._pairs[(rec.pair, rec.level)].append(rec.raw_text)
            elif rec.candidate is not None:
                self._ratings[rec.candidate].append(rec.raw_text)

    def compare(self, problem: str, a: EvidenceView, b: EvidenceView) -> JudgeOutcome:
        _check_levels(a, b)
        queue = self._pairs.get(((a.candidate.id, b.candidate.id), a.level))
        if not queue:
            raise JudgeUnavailable(f"no recorded judgment for pair ({a.candidate.id}, {b.candidate.id}) at {a.level.value}")
        prompt_tokens = self.counter.count(_judge_prompt(problem, a, b, self.domain, self.pairwise_format))
        decoded, attempts = None, 0
        while decoded is None and queue and attempts <= self.parse_retries:
            attempts += 1
            decoded = self._decode_pair(queue.popleft())
        verdict, v, w = decoded or self._fallback()
        return JudgeOutcome(a.candidate.id, b.candidate.id, v, w, a.level, verdict, prompt_tokens * attempts)

    def rate(self, problem: str, view: EvidenceView) -> tuple[int, int]:
        queue = self._ratings.get(view.candidate.id)
        if not queue:
            raise JudgeUnavailable(f"no recorded rating for candidate {view.candidate.id}")
        prompt_tokens = self.counter.count(_pointwise_prompt(problem, view, self.domain))
        attempts = 0
        while queue and attempts <= self.parse_retries:
            attempts += 1
            try:
                return parse_rating(queue.popleft()), prompt_tokens * attempts
            except ParseFailure:
                continue
        return POINTWISE_FALLBACK_RATING, prompt_tokens * attempts


def pointwise_rate(judge: Judge, problem: str, view: EvidenceView) -> tuple[int, int]:
    return judge.rate(problem, view)
