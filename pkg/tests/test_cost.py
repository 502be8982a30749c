import math

import pytest
from hypothesis import given, strategies as st

from caps_select.core import Level
from caps_select.cost import (
    REFERENCE_COST_MODEL,
    CostModel,
    asymptotic_t_fraction,
    caps_cost_asymptotic,
    caps_cost_closed_form,
    closed_form_record,
    expected_cost_with_rescue,
    per_call_cost,
    r_b,
    rescue_overhead,
    stage_b_schedule,
    swiss_cost,
    t_percent,
)


def oracle_calls(n, f):
    """Hand-rolled halving: (E1 calls, E2 calls) with byes, no library code."""
    if n == 1:
        return 0, 0
    e1 = n // 2
    alive = n - e1
    e2 = 0
    while alive > f:
        e2 += alive // 2
        alive -= alive // 2
    e2 += alive * (alive - 1) // 2
    return e1, e2


def test_per_call_cost_examples():
    assert per_call_cost(Level.E1, 250, 500) == 1000
    assert per_call_cost(Level.E2, 4000, 500) == 8500
    assert per_call_cost(Level.E2, 0, 0) == 0
    with pytest.raises(ValueError):
        per_call_cost(Level.E1, -1, 0)


def test_cost_model_validation():
    with pytest.raises(ValueError):
        CostModel(0, 10)
    with pytest.raises(ValueError):
        CostModel(20, 10)
    with pytest.raises(ValueError):
        CostModel(1, 10, -1)
    assert CostModel(1000, 8500).rho == pytest.approx(1000 / 8500)
    cm = CostModel.from_view_sizes(250, 4000, 500)
    assert (cm.T1, cm.T2) == (1000, 8500)


def test_standard_configuration():
    cm = CostModel(1, 100)
    s = stage_b_schedule(16, 4)
    assert (s.calls_a, s.calls_b, s.finalists, s.calls_c) == (8, (4,), 4, 6)
    assert caps_cost_closed_form(16, 4, REFERENCE_COST_MODEL) == 8 * 1000 + 10 * 8500 == 93000
    assert caps_cost_closed_form(16, 4, cm) == 8 + 1000


def test_rho_example():
    cm = CostModel.from_rho(0.12, 1.0)
    assert caps_cost_closed_form(16, 4, cm) == pytest.approx(10.96)


def test_minimal_pool():
    cm = CostModel(3, 7)
    assert caps_cost_closed_form(2, 1, cm) == 3
    assert caps_cost_closed_form(1, 1, cm) == 0


def test_r_b_values():
    assert r_b(16, 4) == 1
    assert r_b(64, 4) == 3
    assert r_b(8, 4) == 0
    for n in range(2, 300):
        for f in (1, 2, 3, 4, 8):
            assert stage_b_schedule(n, f).rounds_b == r_b(n, f), (n, f)


@given(st.integers(1, 2000), st.integers(1, 16))
def test_schedule_matches_oracle(n, f):
    s = stage_b_schedule(n, f)
    assert (s.calls_e1, s.calls_e2) == oracle_calls(n, f)
    assert 1 <= s.finalists <= max(f, 1)


@given(st.integers(1, 2000), st.integers(1, 16))
def test_finalists_equal_f_when_halving_lands(n, f):
    s = stage_b_schedule(n, f)
    if math.ceil(n / 2) >= f and s.finalists == f:
        assert s.calls_c == math.comb(f, 2)


def test_monotone_where_halving_lands_on_f():
    cm = REFERENCE_COST_MODEL
    for f in (1, 2, 4, 8):
        ns = [n for n in range(2 * f - 1, 1025) if stage_b_schedule(n, f).finalists == f]
        costs = [caps_cost_closed_form(n, f, cm) for n in ns]
        assert costs == sorted(costs), f


def test_overshoot_breaks_global_monotonicity():
    # 9 -> 5 -> 3 finalists, so one fewer round-robin pair than at N'=8.
    cm = REFERENCE_COST_MODEL
    assert stage_b_schedule(9, 4).finalists == 3
    assert caps_cost_closed_form(9, 4, cm) < caps_cost_closed_form(8, 4, cm)


def test_asymptotic_bound_scan():
    cm = REFERENCE_COST_MODEL
    for n in range(2, 1025):
        gap = abs(caps_cost_closed_form(n, 4, cm) - caps_cost_asymptotic(n, 4, cm))
        assert gap <= (math.log2(n) + 2) * cm.T2, n


def test_asymptotic_marginal_slope():
    cm = CostModel(3, 11)
    for n in range(2, 200, 2):
        diff = caps_cost_asymptotic(n + 2, 4, cm) - caps_cost_asymptotic(n, 4, cm)
        assert diff / 2 == pytest.approx((cm.T1 + cm.T2) / 2)


def test_asymptotic_f_terms():
    cm = CostModel(1, 1)
    for f in range(1, 10):
        assert caps_cost_asymptotic(100, f, cm) == pytest.approx(50 * 2 - f + f * (f - 1) / 2)


def test_rescue_overhead():
    cm = CostModel(1, 1)
    lo, _ = rescue_overhead(4, cm, 0.10)
    hi, _ = rescue_overhead(4, cm, 0.15)
    assert lo == pytest.approx(0.4) and hi == pytest.approx(0.6)
    _, var = rescue_overhead(4, cm, 0.125)
    assert math.sqrt(var) == pytest.approx(1.32, abs=0.005)
    mean, var = expected_cost_with_rescue(16, 4, REFERENCE_COST_MODEL, 0.0)
    assert (mean, var) == (93000, 0)
    with pytest.raises(ValueError):
        rescue_overhead(4, cm, 1.5)


def test_t_percent():
    cm = CostModel.from_rho(0.12, 1.0)
    assert t_percent(caps_cost_closed_form(16, 4, cm), swiss_cost(16, cm)) == pytest.approx(22.83, abs=0.01)
    assert asymptotic_t_fraction(0.12, 3) == pytest.approx(0.1867, abs=1e-4)
    assert t_percent(5, 5) == 100
    with pytest.raises(ValueError):
        t_percent(1, 0)


def test_t_percent_tends_to_limit():
    cm = CostModel.from_rho(0.12, 1.0)
    n = 2 ** 16
    ratio = caps_cost_closed_form(n, 4, cm) / swiss_cost(n, cm)
    assert ratio == pytest.approx(asymptotic_t_fraction(0.12), abs=1e-3)


def test_closed_form_record_fields():
    rec = closed_form_record(16, 4, REFERENCE_COST_MODEL)
    for key in ("method", "calls_e1", "calls_e2", "tokens_e1", "tokens_e2", "total", "t_percent"):
        assert key in rec
    assert rec["calls_e1"] == 8 and rec["calls_e2"] == 10 and rec["total"] == 93000


def test_asymptotic_bound_fails_for_single_candidate():
    cm = REFERENCE_COST_MODEL
    gap = abs(caps_cost_closed_form(1, 4, cm) - caps_cost_asymptotic(1, 4, cm))
    assert gap > 2 * cm.T2
