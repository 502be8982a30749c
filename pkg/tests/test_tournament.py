import random
from dataclasses import replace
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from caps_select.core import CapsConfig, Confidence, Level, RawVerdict, TournamentState, Winner
from caps_select.cost import r_b
from caps_select.evidence import EvidenceExtractor, make_candidate
from caps_select.harness import PoolSpec, gen_pool
from caps_select.judge import SIM_PRESETS, CountingJudge, Judge, SimJudgeConfig, SimulatedJudge, make_outcome
from caps_select.tournament import (
    JudgeRun,
    dedup,
    eliminate,
    rescue,
    rescue_check,
    round_robin,
    select_caps,
    slaughter_pair,
    stage_c_scores,
)


class ScriptedJudge(Judge):
    """Verdicts from a function of the two candidate ids (A first)."""

    def __init__(self, fn):
        self.fn = fn

    def compare(self, problem, a, b):
        return make_outcome(a, b, self.fn(a.candidate.id, b.candidate.id), self.tau_w, 0)


def code(cid, body, correct=None, reasoning="r"):
    return make_candidate(cid, f"{reasoning}\n```python\n{body}\n```", "code", correct)


def distinct_pool(n, correct=lambda i: None):
    return [code(i, f"x = {i}", correct(i)) for i in range(n)]


def run_for(pool, judge, sizes=None, seed=0):
    state = TournamentState(sizes or {c.id: 1 for c in pool}, seed=seed)
    return JudgeRun("q", judge, EvidenceExtractor("code"), state)


def test_dedup_examples():
    pool = distinct_pool(16)
    reps, nu = dedup(pool, EvidenceExtractor("code").signature)
    assert len(reps) == 16 and set(nu.values()) == {1}
    same = [code(i, "x = 1", reasoning="r" * (4 * i)) for i in range(16)]
    reps, nu = dedup(same, EvidenceExtractor("code").signature)
    assert [c.id for c in reps] == [15] and nu == {15: 16}


def test_dedup_eleven_plus_five():
    pool = gen_pool(PoolSpec(N=16, dup_profile="11+5", seed=4, reasoning_words=20))
    reps, nu = dedup(pool, EvidenceExtractor("code").signature)
    assert len(reps) == 6 and sorted(nu.values()) == [1, 1, 1, 1, 1, 11]


def test_dedup_representative_is_longest_then_first():
    pool = [code(0, "y = 2", reasoning="ab"), code(1, "y = 2", reasoning="abcdefgh"), code(2, "y = 2", reasoning="abcdefgh")]
    reps, nu = dedup(pool, EvidenceExtractor("code").signature)
    assert [c.id for c in reps] == [1] and nu == {1: 3}


def test_slaughter_pairs_by_seed():
    pool = distinct_pool(8)
    pairs, bye = slaughter_pair(pool, lambda c: -c.id, random.Random(0))
    assert [(a.id, b.id) for a, b in pairs] == [(0, 7), (1, 6), (2, 5), (3, 4)] and bye is None
    pairs, bye = slaughter_pair(pool[:5], lambda c: -c.id, random.Random(0))
    assert len(pairs) == 2 and bye.id == 2
    pairs, bye = slaughter_pair(pool[:1], lambda c: 0, random.Random(0))
    assert pairs == [] and bye.id == 0


def test_slaughter_equal_keys_uniform_matching():
    pool = distinct_pool(4)
    counts = Counter()
    for seed in range(10_000):
        pairs, _ = slaughter_pair(pool, lambda c: 0.0, random.Random(seed))
        partner = {a.id: b.id for a, b in pairs} | {b.id: a.id for a, b in pairs}
        counts[partner[0]] += 1
    assert set(counts) == {1, 2, 3}
    assert chisquare(list(counts.values())).pvalue > 0.001


def test_eliminate_stage_a_and_b():
    pool = distinct_pool(16)
    judge = CountingJudge()
    run = run_for(pool, judge)
    survivors = eliminate(pool, run, Level.E1, lambda c: 1, stage="A")
    assert len(survivors) == 8 and run.calls["A"] == 8
    finalists = eliminate(survivors, run, Level.E2, lambda c: run.state.scores[c.id], stop_at=4, stage="B")
    assert len(finalists) == 4 and run.calls["B"] == 4
    assert judge.calls == {Level.E1: 8, Level.E2: 4}
    assert eliminate(finalists, run, Level.E2, lambda c: 0, stop_at=4, stage="B") == finalists
    assert run.calls["B"] == 4


def test_bye_keeps_score():
    pool = distinct_pool(5)
    run = run_for(pool, CountingJudge())
    survivors = eliminate(pool, run, Level.E1, lambda c: -c.id, stage="A")
    assert 2 in {c.id for c in survivors} and run.state.scores[2] == 0.0


def test_pair_winner_ties_go_to_larger_cluster():
    pool = distinct_pool(2)
    tie = ScriptedJudge(lambda i, j: RawVerdict(Winner.TIE, Confidence.LOW))
    run = run_for(pool, tie, sizes={0: 1, 1: 3})
    assert [c.id for c in eliminate(pool, run, Level.E1, lambda c: 0, stage="A")] == [1]


def make_state(scores, nu=None):
    state = TournamentState({cid: (nu or {}).get(cid, 1) for cid in scores})
    state.scores.update(scores)
    return state


@pytest.mark.parametrize(
    "gap,nu,admitted",
    [(0.0, 1, True), (0.0, 3, True), (0.15, 3, True), (0.225, 3, False), (0.225, 1, True), (0.31, 1, False)],
)
def test_rescue_examples(gap, nu, admitted):
    delta = 0.15
    finalists = distinct_pool(4)
    eliminated = [code(10, "z = 0"), code(11, "z = 1")]
    scores = {0: 2.0, 1: 1.5, 2: 1.2, 3: 1.0, 10: 1.0 - gap, 11: 0.1}
    state = make_state(scores, {10: nu})
    expanded = rescue(finalists, eliminated, delta, state)
    assert len(expanded) == 4 + admitted
    if admitted:
        assert expanded[-1].id == 10
    assert rescue(finalists, [], delta, state) == finalists


def test_rescue_gap_is_absolute():
    state = make_state({0: 1.0, 10: 1.5})
    assert rescue_check([code(0, "a")], [code(10, "b")], 0.15, state) is None


def test_stage_c_score_example():
    A_HIGH = RawVerdict(Winner.A, Confidence.HIGH)
    pool = distinct_pool(4)
    verdicts = {(0, 1): A_HIGH, (0, 2): RawVerdict(Winner.B, Confidence.LOW), (0, 3): RawVerdict(Winner.TIE, Confidence.LOW)}
    judge = ScriptedJudge(lambda i, j: verdicts.get((i, j), A_HIGH))
    run = run_for(pool, judge)
    winner, s_c = round_robin(pool, run)
    assert s_c[0] == pytest.approx((0.67 + 0.025) / 0.94) and round(s_c[0], 4) == 0.7394
    assert run.calls["C"] == 6


def test_round_robin_sweep_and_pair_counts():
    pool = distinct_pool(5)
    run = run_for(pool, CountingJudge())
    winner, s_c = round_robin(pool, run)
    # Lower id is always solution A, so id 0 wins every call.
    assert winner.id == 0 and s_c[0] == 1.0
    assert run.calls["C"] == 10
    run4 = run_for(pool[:4], CountingJudge())
    round_robin(pool[:4], run4)
    assert run4.calls["C"] == 6


def test_round_robin_tie_uses_pre_stage_score():
    pool = distinct_pool(3)
    tie = ScriptedJudge(lambda i, j: RawVerdict(Winner.TIE, Confidence.LOW))
    run = run_for(pool, tie)
    run.state.scores.update({0: 0.1, 1: 0.9, 2: 0.5})
    winner, s_c = round_robin(pool, run)
    assert set(s_c.values()) == {0.5} and winner.id == 1


def test_select_caps_trace():
    pool = distinct_pool(16)
    result = select_caps("q", pool, CountingJudge(), CapsConfig(dedup_enabled=False, rescue_enabled=False))
    assert result.calls == {"A": 8, "B": 4, "C": 6} and result.total_calls == 18
    assert result.calls_e1 == 8 and result.calls_e2 == 10
    assert len(result.finalists) == 4 and not result.rescued


def test_single_candidate_short_circuit():
    result = select_caps("q", distinct_pool(1), CountingJudge(), CapsConfig())
    assert result.winner == 0 and result.total_calls == 0 and result.total_tokens == 0


def test_heavy_dedup_gives_fewer_finalists():
    pool = [code(i, "same = 1") for i in range(15)] + [code(15, "other = 2")]
    result = select_caps("q", pool, CountingJudge(), CapsConfig())
    assert result.calls == {"A": 1, "B": 0, "C": 0} and len(result.finalists) == 1
    assert result.cluster_sizes[sorted(result.cluster_sizes)[0]] == 15


def test_e1_switch_moves_stage_a_to_full_evidence():
    result = select_caps("q", distinct_pool(16), CountingJudge(), CapsConfig(e1_enabled=False))
    assert result.calls_e1 == 0 and result.calls_e2 == 18


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 64), st.sampled_from([1, 2, 3, 4, 8]))
def test_call_count_identity_and_round_count(n, f):
    if f > -(-n // 2):
        return
    result = select_caps("q", distinct_pool(n), CountingJudge(), CapsConfig(finalist_count=f, dedup_enabled=False, rescue_enabled=False))
    assert result.calls["A"] == n // 2
    sizes, m = [], -(-n // 2)
    while m > f:
        sizes.append(m)
        m = -(-m // 2)
    assert result.calls["B"] == sum(s // 2 for s in sizes)
    assert len(sizes) == r_b(n, f)
    k = len(result.finalists)
    assert result.calls["C"] == k * (k - 1) // 2


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 48), st.integers(0, 2**32), st.floats(0.02, 0.95),
       st.sampled_from(["distinct", "crp:2", "crp:8"]), st.integers(1, 4), st.booleans())
def test_oracle_judge_picks_correct(n, seed, p, profile, f, rescue_on):
    pool = gen_pool(PoolSpec(N=n, p_correct=p, dup_profile=profile, seed=seed, reasoning_words=10))
    if not any(c.ground_truth for c in pool):
        return
    cfg = CapsConfig(seed=seed, finalist_count=min(f, n), rescue_enabled=rescue_on)
    if n > 1 and cfg.finalist_count > -(-n // 2):
        cfg = CapsConfig(seed=seed, finalist_count=1, rescue_enabled=rescue_on)
    result = select_caps("q", pool, SimulatedJudge(SIM_PRESETS["perfect"]), cfg)
    assert pool[result.winner].ground_truth


@given(st.integers(0, 2**32), st.booleans())
@settings(max_examples=25, deadline=None)
def test_determinism(seed, rescue_on):
    pool = gen_pool(PoolSpec(N=16, dup_profile="crp:3", seed=seed, reasoning_words=10))
    cfg = CapsConfig(seed=seed, rescue_enabled=rescue_on)
    runs = [select_caps("q", pool, SimulatedJudge(SimJudgeConfig(seed=seed)), cfg) for _ in range(2)]
    assert runs[0].digest == runs[1].digest and runs[0].winner == runs[1].winner


@given(st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_rescue_cardinality(seed):
    pool = gen_pool(PoolSpec(N=16, seed=seed, reasoning_words=10))
    result = select_caps("q", pool, SimulatedJudge(replace(SIM_PRESETS["rescue_band"], seed=seed)), CapsConfig(seed=seed))
    assert len(result.finalists) in (4, 5)
    assert result.rescued == (len(result.finalists) == 5)
    assert result.calls["C"] == (10 if result.rescued else 6)


def test_stage_c_scores_only_counts_given_outcomes():
    pool = distinct_pool(2)
    run = run_for(pool, CountingJudge())
    out = run.judge_pairs([(pool[1], pool[0])], Level.E2, "C")
    assert (out[0].i, out[0].j) == (0, 1)
    assert stage_c_scores(out, [0, 1]) == {0: 1.0, 1: 0.0}
