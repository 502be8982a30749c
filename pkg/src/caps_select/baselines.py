"""Comparison methods: vanilla, pointwise rating, random pairs and a V1-style Swiss tournament."""

from __future__ import annotations

import random
from typing import Optional, Sequence

from .core import Candidate, Level, SelectionResult, SwissConfig, TournamentState, check_pool
from .evidence import EvidenceExtractor
from .judge import Judge, pointwise_rate
from .tournament import JudgeRun

METHODS = ("vanilla", "pointwise", "random", "swiss", "caps", "caps_r")


def _argmax_score(pool: Sequence[Candidate], state: TournamentState) -> Candidate:
    rng = state.rng
    return max(pool, key=lambda c: (round(state.scores[c.id], 9), rng.random()))


def select_vanilla(pool: Sequence[Candidate]) -> SelectionResult:
    """The first-sampled candidate (id 0, or the smallest id), no judge calls."""
    pool = check_pool(pool)
    if not pool:
        raise ValueError("pool must not be empty")
    first = min(pool, key=lambda c: c.id)
    return SelectionResult("vanilla", first.id, [first.id], {})


def select_pointwise(
    problem: str,
    pool: Sequence[Candidate],
    judge: Judge,
    seed: int = 0,
    extractor: Optional[EvidenceExtractor] = None,
    domain: str = "code",
) -> SelectionResult:
    pool = check_pool(pool)
    if not pool:
        raise ValueError("pool must not be empty")
    extractor = extractor or EvidenceExtractor(domain)
    ratings, tokens = {}, 0
    for c in pool:
        rating, cost = pointwise_rate(judge, problem, extractor.view(c, Level.E2))
        ratings[c.id] = rating
        tokens += cost
    rng = random.Random(seed)
    best = max(ratings.values())
    tied = sorted(cid for cid, r in ratings.items() if r == best)
    winner = rng.choice(tied)
    return SelectionResult("pointwise", winner, [winner], {"pointwise": len(pool)}, extra_tokens=tokens)


def select_random_pairs(
    problem: str,
    pool: Sequence[Candidate],
    judge: Judge,
    count: int = 48,
    seed: int = 0,
    with_replacement: bool = True,
    extractor: Optional[EvidenceExtractor] = None,
    domain: str = "code",
) -> SelectionResult:
    """``count`` uniformly random unordered pairs at full evidence; highest cumulative score wins.

    Without replacement the count is capped at the number of distinct pairs.
    """
    pool = check_pool(pool)
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0 or len(pool) < 2:
        vanilla = select_vanilla(pool)
        vanilla.method = "random"
        return vanilla
    extractor = extractor or EvidenceExtractor(domain)
    rng = random.Random(seed)
    n = len(pool)
    if with_replacement:
        pairs = [tuple(rng.sample(pool, 2)) for _ in range(count)]
    else:
        all_pairs = [(pool[a], pool[b]) for a in range(n) for b in range(a + 1, n)]
        pairs = rng.sample(all_pairs, min(count, len(all_pairs)))
    state = TournamentState({c.id: 1 for c in pool}, seed=seed)
    run = JudgeRun(problem, judge, extractor, state)
    run.judge_pairs(pairs, Level.E2, "random")
    winner = _argmax_score(pool, state)
    return SelectionResult("random", winner.id, [winner.id], dict(run.calls), list(state.transcript))


def _swiss_round(ranked: list[Candidate], played: set, window: int) -> list[tuple[Candidate, Candidate]]:
    """Pair neighbours in score order, preferring unplayed opponents within ``window`` ranks."""
    unpaired = list(ranked)
    pairs = []
    while len(unpaired) >= 2:
        x = unpaired.pop(0)
        key = lambda c: frozenset((x.id, c.id)) in played
        near = unpaired[:window]
        fresh = [c for c in near if not key(c)]
        if not fresh:
            fresh = [c for c in unpaired if not key(c)]
        partner = fresh[0] if fresh else unpaired[0]
        unpaired.remove(partner)
        pairs.append((x, partner))
    return pairs


def swiss_schedule_round(
    pool: Sequence[Candidate],
    state: TournamentState,
    played: set,
    degree: dict[int, int],
    byes: dict[int, int],
    cfg: SwissConfig,
    remaining: int,
    first: bool,
) -> list[tuple[Candidate, Candidate]]:
    rng = state.rng
    if first:
        ranked = list(pool)
        rng.shuffle(ranked)
    else:
        ranked = sorted(pool, key=lambda c: (-state.scores[c.id], rng.random()))
    if len(ranked) % 2:
        # Rotating bye: fewest byes so far, then lowest rank.
        bye = min(reversed(ranked), key=lambda c: byes[c.id])
        byes[bye.id] += 1
        ranked.remove(bye)
    if first:
        pairs = [(ranked[2 * i], ranked[2 * i + 1]) for i in range(len(ranked) // 2)]
    else:
        pairs = _swiss_round(ranked, played, cfg.window)
    if len(pairs) > remaining:
        # Budget is short: pairs that lift an under-degree candidate go first.
        need = lambda p: sum(degree[c.id] < cfg.min_degree for c in p)
        pairs = sorted(pairs, key=lambda p: -need(p))[:remaining]
    return pairs


def select_swiss_v1(
    problem: str,
    pool: Sequence[Candidate],
    judge: Judge,
    cfg: SwissConfig = SwissConfig(),
    extractor: Optional[EvidenceExtractor] = None,
    domain: str = "code",
) -> SelectionResult:
    """Uncertainty-free approximation of the V1 Swiss tournament.

    round(k * N) full-evidence comparisons in rounds: a random perfect matching
    first, then score-adjacent pairing within a window of ``h`` ranks.
    """
    pool = check_pool(pool)
    if len(pool) < 2:
        raise ValueError("swiss needs at least two candidates")
    extractor = extractor or EvidenceExtractor(domain)
    state = TournamentState({c.id: 1 for c in pool}, seed=cfg.seed)
    run = JudgeRun(problem, judge, extractor, state)
    budget = round(cfg.budget_multiplier * len(pool))
    played: set = set()
    degree = {c.id: 0 for c in pool}
    byes = {c.id: 0 for c in pool}
    used, first = 0, True
    while used < budget:
        pairs = swiss_schedule_round(pool, state, played, degree, byes, cfg, budget - used, first)
        first = False
        run.judge_pairs(pairs, Level.E2, "swiss")
        for a, b in pairs:
            played.add(frozenset((a.id, b.id)))
            degree[a.id] += 1
            degree[b.id] += 1
        used += len(pairs)
    winner = _argmax_score(pool, state)
    return SelectionResult("swiss", winner.id, [winner.id], dict(run.calls), list(state.transcript))
