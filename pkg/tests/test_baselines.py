import copy
from collections import Counter
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from caps_select.baselines import (
    METHODS,
    select_pointwise,
    select_random_pairs,
    select_swiss_v1,
    select_vanilla,
)
from caps_select.core import SwissConfig
from caps_select.evidence import EvidenceExtractor
from caps_select.harness import PoolSpec, gen_pool
from caps_select.judge import SIM_PRESETS, CountingJudge, SimulatedJudge

EX = EvidenceExtractor("code")


def pool_of(n=16, p=0.3, seed=0):
    return gen_pool(PoolSpec(N=n, p_correct=p, seed=seed, reasoning_words=10))


def test_method_enum():
    assert METHODS == ("vanilla", "pointwise", "random", "swiss", "caps", "caps_r")


def test_vanilla():
    pool = pool_of()
    result = select_vanilla(pool[::-1])
    assert result.winner == 0 and result.total_calls == 0 and result.total_tokens == 0
    with pytest.raises(ValueError):
        select_vanilla([])


def test_pointwise_calls_and_oracle():
    pool = pool_of(seed=3)
    judge = SimulatedJudge(SIM_PRESETS["perfect"])
    result = select_pointwise("q", pool, judge, extractor=EX)
    assert result.calls == {"pointwise": 16} and result.total_tokens > 0
    for seed in range(200):
        pool = pool_of(p=0.2, seed=seed)
        if any(c.ground_truth for c in pool):
            assert pool[select_pointwise("q", pool, judge, seed=seed, extractor=EX).winner].ground_truth


def test_pointwise_equal_ratings_uniform():
    pool = pool_of(n=8)
    judge = CountingJudge()  # always rates 5
    counts = Counter(select_pointwise("q", pool, judge, seed=s, extractor=EX).winner for s in range(10_000))
    assert len(counts) == 8
    assert chisquare(list(counts.values())).pvalue > 0.001


def test_random_pairs_budget_and_fallback():
    pool = pool_of()
    result = select_random_pairs("q", pool, CountingJudge(), count=48, extractor=EX)
    assert result.calls == {"random": 48} and result.calls_e2 == 48
    fallback = select_random_pairs("q", pool, CountingJudge(), count=0)
    assert (fallback.winner, fallback.total_calls, fallback.method) == (0, 0, "random")
    unique = select_random_pairs("q", pool[:4], CountingJudge(), count=48, with_replacement=False, extractor=EX)
    assert unique.calls["random"] == 6
    with pytest.raises(ValueError):
        select_random_pairs("q", pool, CountingJudge(), count=-1)


def test_random_pairs_null_judge_near_uniform():
    pool = pool_of(n=8, p=0.5, seed=1)
    counts = Counter()
    for s in range(10_000):
        judge = SimulatedJudge(replace(SIM_PRESETS["null"], seed=s))
        counts[select_random_pairs("q", pool, judge, count=24, seed=s, extractor=EX).winner] += 1
    assert len(counts) == 8
    assert chisquare([counts[i] for i in range(8)]).pvalue > 0.001


def degrees(result):
    deg = Counter()
    for o in result.transcript:
        deg[o.i] += 1
        deg[o.j] += 1
    return deg


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 33), st.sampled_from([1.0, 2.0, 3.0]), st.integers(0, 2**31))
def test_swiss_budget_exact(n, k, seed):
    pool = pool_of(n=n, seed=seed)
    cfg = SwissConfig(budget_multiplier=k, seed=seed)
    result = select_swiss_v1("q", pool, SimulatedJudge(replace(SIM_PRESETS["default"], seed=seed)), cfg, extractor=EX)
    assert result.calls == {"swiss": round(k * n)}


def test_swiss_min_degree_at_sixteen():
    for seed in range(50):
        pool = pool_of(seed=seed)
        result = select_swiss_v1("q", pool, SimulatedJudge(replace(SIM_PRESETS["default"], seed=seed)),
                                 SwissConfig(seed=seed), extractor=EX)
        assert result.calls_e2 == 48
        deg = degrees(result)
        assert min(deg[c.id] for c in pool) >= 2


def test_swiss_first_round_is_perfect_matching():
    pool = pool_of()
    result = select_swiss_v1("q", pool, CountingJudge(), SwissConfig(seed=9), extractor=EX)
    first = result.transcript[:8]
    ids = [x for o in first for x in (o.i, o.j)]
    assert sorted(ids) == list(range(16))


def test_swiss_oracle():
    judge = SimulatedJudge(SIM_PRESETS["perfect"])
    for seed in range(200):
        pool = pool_of(p=0.2, seed=seed)
        if any(c.ground_truth for c in pool):
            result = select_swiss_v1("q", pool, judge, SwissConfig(seed=seed), extractor=EX)
            assert pool[result.winner].ground_truth


def test_swiss_needs_two():
    with pytest.raises(ValueError):
        select_swiss_v1("q", pool_of(n=1), CountingJudge())


def test_baselines_do_not_mutate_pool():
    pool = pool_of(seed=5)
    before = copy.deepcopy(pool)
    judge = SimulatedJudge(SIM_PRESETS["default"])
    select_pointwise("q", pool, judge, extractor=EX)
    select_random_pairs("q", pool, judge, extractor=EX)
    select_swiss_v1("q", pool, judge, extractor=EX)
    assert pool == before
