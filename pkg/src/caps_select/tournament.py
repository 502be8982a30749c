"""The cascaded selection pipeline: dedup, two elimination stages, rescue, round-robin."""

from __future__ import annotations

import random
from dataclasses import replace
from itertools import combinations
from typing import Callable, Optional, Sequence

from .core import (
    Candidate,
    CapsConfig,
    JudgeOutcome,
    Level,
    SelectionResult,
    TournamentState,
    check_pool,
    validate_config,
)
from .evidence import DEFAULT_COUNTER, EvidenceExtractor, TokenCounter
from .judge import Judge

_EPS = 1e-9


def dedup(
    pool: Sequence[Candidate],
    signature_fn: Callable[[Candidate], str],
    counter: TokenCounter = DEFAULT_COUNTER,
) -> tuple[list[Candidate], dict[int, int]]:
    """One representative per signature class, plus cluster sizes.

    The representative is the longest member by token count; equal lengths go
    to the first-sampled member. Representatives keep their original ids.
    """
    if not pool:
        raise ValueError("dedup needs a non-empty pool")
    clusters: dict[str, list[Candidate]] = {}
    for c in pool:
        clusters.setdefault(signature_fn(c), []).append(c)
    reps, sizes = [], {}
    for members in clusters.values():
        rep = max(members, key=lambda c: counter.count(c.raw_text))  # max keeps the first of equals
        reps.append(rep)
        sizes[rep.id] = len(members)
    return reps, sizes


def slaughter_pair(
    pool: Sequence[Candidate],
    key_fn: Callable[[Candidate], float],
    rng: random.Random,
) -> tuple[list[tuple[Candidate, Candidate]], Optional[Candidate]]:
    """Pair the i-th seed with the (n+1-i)-th; an odd pool gives the middle seed a bye."""
    ranked = sorted(pool, key=lambda c: (-key_fn(c), rng.random()))
    n = len(ranked)
    pairs = [(ranked[i], ranked[n - 1 - i]) for i in range(n // 2)]
    bye = ranked[n // 2] if n % 2 else None
    return pairs, bye


def random_pair(pool: Sequence[Candidate], rng: random.Random):
    shuffled = list(pool)
    rng.shuffle(shuffled)
    n = len(shuffled)
    pairs = [(shuffled[2 * i], shuffled[2 * i + 1]) for i in range(n // 2)]
    return pairs, (shuffled[-1] if n % 2 else None)


class JudgeRun:
    """Judge calls for one selection: views, ledger and canonical application order."""

    def __init__(self, problem: str, judge: Judge, extractor: EvidenceExtractor, state: TournamentState,
                 unit_weights: bool = False):
        self.problem = problem
        self.judge = judge
        self.extractor = extractor
        self.state = state
        self.unit_weights = unit_weights
        self.calls: dict[str, int] = {}

    def judge_pairs(self, pairs: Sequence[tuple[Candidate, Candidate]], level: Level, stage: str) -> list[JudgeOutcome]:
        """Judge independent pairs and apply them ascending by the lower id.

        The lower id is always shown as solution A.
        """
        ordered = sorted(((a, b) if a.id < b.id else (b, a) for a, b in pairs), key=lambda p: p[0].id)
        views = [(self.extractor.view(a, level), self.extractor.view(b, level)) for a, b in ordered]
        outcomes = self.judge.compare_many(self.problem, views)
        applied = []
        for outcome in outcomes:
            outcome = replace(outcome, stage=stage, w=1.0) if self.unit_weights else replace(outcome, stage=stage)
            self.state.apply(outcome)
            applied.append(outcome)
        self.calls[stage] = self.calls.get(stage, 0) + len(applied)
        return applied


def _pair_winner(a: Candidate, b: Candidate, state: TournamentState) -> Candidate:
    sa, sb = state.scores[a.id], state.scores[b.id]
    if abs(sa - sb) > _EPS:
        return a if sa > sb else b
    na, nb = state.nu(a.id), state.nu(b.id)
    if na != nb:
        return a if na > nb else b
    return a if state.rng.random() < 0.5 else b


def eliminate(
    pool: Sequence[Candidate],
    run: JudgeRun,
    level: Level,
    key_fn: Callable[[Candidate], float],
    stop_at: Optional[int] = None,
    stage: str = "",
    pairing: str = "slaughter",
) -> list[Candidate]:
    """Halving rounds: pair, judge, update scores, keep each pair's winner.

    Without ``stop_at`` exactly one round runs; with it, rounds repeat while
    more than ``stop_at`` candidates remain. The per-pair winner is the higher
    score after the update, then the larger cluster, then a coin flip. A bye
    advances with its score unchanged.
    """
    if not pool:
        raise ValueError("eliminate needs a non-empty pool")
    if stop_at is not None and stop_at < 1:
        raise ValueError("stop_at must be >= 1")
    current = list(pool)
    state = run.state
    while len(current) > 1 and (stop_at is None or len(current) > stop_at):
        if pairing == "slaughter":
            pairs, bye = slaughter_pair(current, key_fn, state.rng)
        else:
            pairs, bye = random_pair(current, state.rng)
        run.judge_pairs(pairs, level, stage)
        winners = [_pair_winner(a, b, state) for a, b in pairs]
        if bye is not None:
            winners.append(bye)
        current = winners
        if stop_at is None:
            break
    return current


def rescue_check(
    finalists: Sequence[Candidate],
    eliminated: Sequence[Candidate],
    margin: float,
    state: TournamentState,
) -> Optional[Candidate]:
    """The eliminated candidate to readmit, or None.

    Only the best-scoring eliminated candidate is considered. It is admitted
    when within ``margin`` of the weakest finalist, or within ``2 * margin``
    when it is a singleton cluster.
    """
    if not eliminated or not finalists:
        return None
    rng = state.rng
    best = max(eliminated, key=lambda c: (state.scores[c.id], state.nu(c.id), rng.random()))
    weakest = min(finalists, key=lambda c: (state.scores[c.id], rng.random()))
    gap = abs(state.scores[best.id] - state.scores[weakest.id])
    if gap <= margin + _EPS:
        return best
    if state.nu(best.id) == 1 and gap <= 2 * margin + _EPS:
        return best
    return None


def rescue(finalists, eliminated, margin, state) -> list[Candidate]:
    admitted = rescue_check(finalists, eliminated, margin, state)
    return list(finalists) + ([admitted] if admitted is not None else [])


def stage_c_scores(outcomes: Sequence[JudgeOutcome], finalist_ids: Sequence[int]) -> dict[int, float]:
    """Confidence-normalized win rate of each finalist over its round-robin calls."""
    num = {cid: 0.0 for cid in finalist_ids}
    den = {cid: 0.0 for cid in finalist_ids}
    for o in outcomes:
        num[o.i] += o.w * o.v
        num[o.j] += o.w * (1.0 - o.v)
        den[o.i] += o.w
        den[o.j] += o.w
    scores = {}
    for cid in finalist_ids:
        assert den[cid] > 0, "weight floor keeps every denominator positive"
        scores[cid] = num[cid] / den[cid]
    return scores


def round_robin(finalists: Sequence[Candidate], run: JudgeRun, stage: str = "C") -> tuple[Candidate, dict[int, float]]:
    """Judge every unordered finalist pair once at E2 and pick the winner.

    Ties on the round-robin score fall back to the pre-round-robin cumulative
    score, then cluster size, then a coin flip.
    """
    state = run.state
    if len(finalists) == 1:
        return finalists[0], {finalists[0].id: 1.0}
    pre_scores = {c.id: state.scores[c.id] for c in finalists}
    ordered = sorted(finalists, key=lambda c: c.id)
    outcomes = run.judge_pairs(list(combinations(ordered, 2)), Level.E2, stage)
    s_c = stage_c_scores(outcomes, [c.id for c in ordered])
    rng = state.rng
    winner = max(
        ordered,
        key=lambda c: (round(s_c[c.id], 9), round(pre_scores[c.id], 9), state.nu(c.id), rng.random()),
    )
    return winner, s_c


def select_caps(
    problem: str,
    pool: Sequence[Candidate],
    judge: Judge,
    cfg: CapsConfig = CapsConfig(),
    extractor: Optional[EvidenceExtractor] = None,
    domain: str = "code",
) -> SelectionResult:
    pool = check_pool(pool)
    method = "caps_r" if cfg.rescue_enabled else "caps"
    if not pool:
        raise ValueError("pool must not be empty")
    if len(pool) == 1:
        return SelectionResult(method, pool[0].id, [pool[0].id], {"A": 0, "B": 0, "C": 0}, cluster_sizes={pool[0].id: 1})
    validate_config(cfg, len(pool))
    extractor = extractor or EvidenceExtractor(domain)

    if cfg.dedup_enabled:
        reps, sizes = dedup(pool, extractor.signature, extractor.counter)
    else:
        reps, sizes = list(pool), {c.id: 1 for c in pool}
    state = TournamentState(sizes, seed=cfg.seed)
    run = JudgeRun(problem, judge, extractor, state, unit_weights=not cfg.confidence_weighting)
    run.calls.update({"A": 0, "B": 0, "C": 0})

    level_a = Level.E1 if cfg.e1_enabled else Level.E2
    pairing = "slaughter" if cfg.slaughter_pairing else "random"
    stage_a = eliminate(reps, run, level_a, lambda c: state.nu(c.id), stage="A", pairing=pairing)
    finalists = eliminate(stage_a, run, Level.E2, lambda c: state.scores[c.id], stop_at=cfg.finalist_count, stage="B")

    rescued = None
    if cfg.rescue_enabled:
        finalist_ids = {c.id for c in finalists}
        eliminated = [c for c in reps if c.id not in finalist_ids]
        rescued = rescue_check(finalists, eliminated, cfg.rescue_margin, state)
        if rescued is not None:
            finalists = finalists + [rescued]

    winner, s_c = round_robin(finalists, run)
    return SelectionResult(
        method=method,
        winner=winner.id,
        finalists=sorted(c.id for c in finalists),
        calls=dict(run.calls),
        transcript=list(state.transcript),
        rescued=rescued is not None,
        rescued_id=rescued.id if rescued is not None else None,
        stage_c_scores=s_c,
        cluster_sizes=dict(sizes),
    )
