import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from datamarket.baseline import welfare_opt
from datamarket.mechanism import (
    MechanismError,
    MechanismInputs,
    PaymentRule,
    allocate,
    buyer_price,
    contributor_payment,
    make_requests,
    profit_inputs,
    run_round,
    sample_mean,
    welfare_inputs,
)
from datamarket.pricing import profit_search

from conftest import S1_OPT, two_buyer_market


@pytest.fixture
def s1_inputs(s1):
    return welfare_inputs(s1, welfare_opt(s1))


def test_welfare_inputs(s1_inputs):
    assert s1_inputs.n_tilde == 2
    assert s1_inputs.sell == (2, 2)
    assert s1_inputs.opt_tilde == pytest.approx(S1_OPT, abs=1e-12)
    np.testing.assert_allclose(s1_inputs.exp_price, [math.sqrt(2 / 3)] * 2, atol=1e-12)
    assert s1_inputs.consistency_gap(0.1) == pytest.approx(0.0, abs=1e-12)


def test_profit_inputs(pricing_market):
    inp = profit_inputs(pricing_market, profit_search(pricing_market))
    assert inp.n_tilde == 2 and inp.sell == (2, 2)
    assert inp.exp_price == pytest.approx((0.6, 0.6))
    assert inp.opt_tilde == pytest.approx(1.0)


def test_small_totals_rejected():
    with pytest.raises(MechanismError):
        MechanismInputs(1.0, 1, (1,), (0.5,))
    with pytest.raises(MechanismError):
        make_requests(MechanismInputs(1.0, 3, (3,), (1.3,)), 1)


def test_requests_and_penalties(s2):
    inp = welfare_inputs(s2, welfare_opt(s2))
    rule = PaymentRule(inp, s2)
    assert rule.requests.amounts == (3, 1, 0)
    assert rule.requests.other(0) == 1 and rule.requests.other(1) == 3
    assert rule.d == pytest.approx((0.05 * 9, 0.2 * 1))
    for i in (0, 1):
        assert math.sqrt(rule.d[i] / s2.costs[i]) * s2.sigma == pytest.approx(rule.requests.amounts[i])


def test_hand_computed_round(s1, s1_inputs):
    # requests (1, 1, 0); d = (0.1, 0.2); variance terms 2 d_i
    subs = [np.array([0.3]), np.array([-0.2]), np.array([])]
    out = run_round(s1_inputs, subs, s1, 7)
    share = (S1_OPT + 0.1 - 0.2) / 2
    assert out.discrepancy == pytest.approx(0.5)
    assert out.payments[0] == pytest.approx(share + 0.1 + 0.2 - 0.1 * 0.25)
    assert out.payments[1] == pytest.approx(share + 0.2 + 0.4 - 0.2 * 0.25)
    assert out.payments[2] == 0.0
    p = math.sqrt(2 / 3) + (0.2 + 0.4) / 2 - 0.3 / 2 * 0.25
    assert out.prices == pytest.approx((p, p))
    assert abs(out.bb_residual) < 1e-12
    assert out.flags == ()
    assert [len(y) for y in out.buyer_datasets] == [2, 2]


def test_single_price_and_payment_agree_with_round(s1, s1_inputs):
    subs = [np.array([1.0]), np.array([0.0]), np.array([])]
    out = run_round(s1_inputs, subs, s1, 0)
    assert buyer_price(0, s1_inputs, subs, s1) == pytest.approx(out.prices[0])
    assert contributor_payment(1, s1_inputs, subs, s1) == pytest.approx(out.payments[1])


def test_noncompliant_residual(s2):
    inp = welfare_inputs(s2, welfare_opt(s2))
    n = inp.n_tilde
    subs = [np.zeros(3), np.zeros(2), np.zeros(0)]
    out = run_round(inp, subs, s2, 0)
    assert out.compliant == (True, False, True)
    assert out.bb_residual == pytest.approx((0.05 - 0.2) * (n - 1) / n, abs=1e-12)
    assert "noncompliant" in out.flags and "unbalanced" in out.flags
    assert out.broker_net == -out.bb_residual


def test_empty_submission_flags(s1, s1_inputs):
    out = run_round(s1_inputs, [np.array([]), np.array([0.5]), np.array([])], s1, 0)
    assert "degenerate" in out.flags
    assert out.discrepancy == pytest.approx(-0.5)
    with pytest.raises(MechanismError):
        run_round(s1_inputs, [np.array([0.1])], s1, 0)


def test_sample_mean():
    assert sample_mean([]) == (0.0, True)
    assert sample_mean([1.0, 2.0]) == (1.5, False)


def test_allocate_draws_from_pool(s2):
    inp = MechanismInputs(1.0, 4, (2, 4, 3), (0.4, 0.5, 0.6))
    subs = [np.arange(2.0), np.array([10.0]), np.array([])]
    data, short = allocate(subs, inp, 3)
    assert short
    assert [len(y) for y in data] == [2, 3, 3]
    assert set(data[0]) <= {0.0, 1.0, 10.0}
    assert not allocate([np.arange(3.0), np.array([1.0])], inp, 0)[1]
    again, _ = allocate(subs, inp, 3)
    assert all(np.array_equal(a, b) for a, b in zip(data, again))


@settings(max_examples=150, deadline=None)
@given(
    costs=st.tuples(st.floats(0.01, 0.5), st.floats(0.0, 0.5), st.floats(0.0, 0.5)).map(
        lambda t: (t[0], t[0] + t[1], t[0] + t[1] + t[2])
    ),
    means=st.tuples(st.floats(-10, 10), st.floats(-10, 10)),
    split=st.floats(0.0, 1.0),
    seed=st.integers(0, 2**31),
)
def test_budget_balance_for_compliant_sizes(costs, means, split, seed):
    market = two_buyer_market(costs=costs)
    # any expected prices summing to OPT + c_1 N keep the books balanced
    total = 1.3 + costs[0] * 5
    inp = MechanismInputs(1.3, 5, (3, 5), (split * total, (1 - split) * total))
    rule = PaymentRule(inp, market)
    rng = np.random.default_rng(seed)
    subs = [rng.normal(m, 1.0, size=n) for m, n in zip(means, rule.requests.amounts[:2])] + [np.array([])]
    out = run_round(inp, subs, market, seed)
    assert abs(out.bb_residual) < 1e-9
