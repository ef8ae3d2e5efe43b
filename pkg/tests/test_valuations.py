import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from datamarket.valuations import (
    Buyer,
    DomainError,
    ExpQuadratic,
    IIDTable,
    MarketConfig,
    PiecewiseLinear,
    Tabulated,
    Threshold,
    closed_form_value,
    error_value,
    iid_value,
    iid_value_table,
    is_monotone,
    quadrature_value,
    valuation_from_dict,
)


def scipy_oracle(v, m, sigma2):
    """E[v(|X|)], X ~ N(0, sigma2/m), by adaptive quadrature on the half-normal density."""
    s = math.sqrt(sigma2 / m)
    pts = [p for p in getattr(v, "breakpoints", lambda: ())() if p < 40 * s]
    val, _ = integrate.quad(lambda e: float(v(e)) * 2 * stats.norm.pdf(e, scale=s), 0, 40 * s, points=pts or None, limit=200)
    return val


def test_exp_quadratic_values():
    v = ExpQuadratic(1.0)
    assert error_value(v, 0.0) == 1.0
    assert error_value(v, 1.0) == pytest.approx(math.exp(-0.5))
    assert iid_value(v, 1, 1.0) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert iid_value(v, 2, 1.0) == pytest.approx(math.sqrt(2 / 3), abs=1e-12)


def test_threshold_closed_form():
    # P(|X| <= 0.5) for X ~ N(0, 1)
    assert iid_value(Threshold(0.5), 1, 1.0) == pytest.approx(0.38292492254802624, abs=1e-12)
    assert error_value(Threshold(0.5), 0.5) == 1.0
    assert error_value(Threshold(0.5), 0.5000001) == 0.0


def test_zero_points_only_in_tables():
    with pytest.raises(DomainError):
        iid_value(ExpQuadratic(1.0), 0, 1.0)
    assert iid_value_table(ExpQuadratic(1.0), 3, 1.0)[0] == 0.0
    assert iid_value_table(Threshold(0.2), 0, 1.0) == [0.0]


def test_constant_valuation_is_worth_one():
    assert iid_value(Tabulated(1.0, (1.0,)), 3, 2.0) == pytest.approx(1.0, abs=1e-15)


def test_wide_threshold_table():
    table = iid_value_table(Threshold(10.0), 3, 1.0)
    assert all(x > 0.999 for x in table[1:]) and is_monotone(table)


def test_negative_error_rejected():
    with pytest.raises(DomainError):
        error_value(ExpQuadratic(1.0), -0.1)


@pytest.mark.parametrize(
    "v",
    [
        ExpQuadratic(0.7),
        Threshold(0.3),
        PiecewiseLinear(((0.0, 1.0), (0.4, 0.7), (1.2, 0.1), (2.0, 0.0))),
        Tabulated(0.25, (1.0, 0.9, 0.6, 0.2, 0.0)),
    ],
    ids=["exp", "threshold", "piecewise", "tabulated"],
)
@pytest.mark.parametrize("m", [1, 3, 10])
def test_closed_form_and_quadrature_match_scipy(v, m):
    ref = scipy_oracle(v, m, 2.0)
    assert closed_form_value(v, 2.0 / m) == pytest.approx(ref, abs=1e-8)
    assert quadrature_value(v, 2.0 / m) == pytest.approx(ref, abs=1e-7)


def test_monte_carlo_agrees_with_closed_form():
    rng = np.random.default_rng(11)
    for v in (ExpQuadratic(1.0), Threshold(0.5)):
        for m in (1, 4):
            x = np.abs(rng.normal(0.0, 1 / math.sqrt(m), size=200_000))
            vals = v(x)
            se = vals.std(ddof=1) / math.sqrt(vals.size)
            assert abs(vals.mean() - iid_value(v, m, 1.0)) <= 3 * se


def test_method_switch():
    v = ExpQuadratic(2.0)
    assert iid_value(v, 5, 1.0, method="closed") == pytest.approx(iid_value(v, 5, 1.0, method="quadrature"), abs=1e-10)
    with pytest.raises(ValueError):
        iid_value(v, 5, 1.0, method="bogus")


def test_iid_table_family():
    t = IIDTable((0.0, 0.4, 0.6))
    assert iid_value(t, 1, 1.0) == 0.4
    assert iid_value(t, 7, 1.0) == 0.6  # clamps past the end
    with pytest.raises(DomainError):
        IIDTable((0.1, 0.4))


@pytest.mark.parametrize(
    "data",
    [
        {"family": "exp_quadratic", "a": 1.5},
        {"family": "threshold", "t": 0.2},
        {"family": "piecewise_linear", "knots": [[0.0, 1.0], [1.0, 0.0]]},
        {"family": "tabulated", "step": 0.5, "values": [1.0, 0.5, 0.0]},
        {"family": "iid_table", "values": [0.0, 0.3, 0.5]},
    ],
)
def test_dict_round_trip(data):
    v = valuation_from_dict(data)
    assert valuation_from_dict(v.to_dict()) == v


@pytest.mark.parametrize(
    "data",
    [{"family": "nope"}, {"family": "exp_quadratic", "a": -1}, {"family": "threshold"}, {"family": "tabulated", "step": 1, "values": [2.0]}],
)
def test_bad_dicts_rejected(data):
    with pytest.raises(DomainError):
        valuation_from_dict(data)


def test_market_config_validation():
    b = (Buyer(0, ExpQuadratic(1.0)),)
    with pytest.raises(DomainError):
        MarketConfig(b, (0.1, 0.2), 0.0)
    with pytest.raises(DomainError):
        MarketConfig(b, (0.2, 0.1), 1.0)
    with pytest.raises(DomainError):
        MarketConfig(b, (0.1,), 1.0)
    with pytest.raises(DomainError):
        MarketConfig((b[0], Buyer(0, ExpQuadratic(2.0))), (0.1, 0.2), 1.0)
    tables = MarketConfig(b, (0.1, 0.2), 1.0).iid_tables(4)
    assert tables.shape == (1, 5)


decreasing_knots = st.lists(
    st.tuples(st.floats(0.01, 1.0), st.floats(0.0, 1.0)), min_size=1, max_size=5
).map(
    lambda steps: tuple(
        zip(np.concatenate([[0.0], np.cumsum([s for s, _ in steps])]).tolist(),
            np.concatenate([[1.0], np.cumprod([1 - 0.9 * f for _, f in steps])]).tolist())
    )
)


@settings(max_examples=60, deadline=None)
@given(knots=decreasing_knots, sigma2=st.floats(0.1, 5.0))
def test_value_grows_with_sample_size(knots, sigma2):
    v = PiecewiseLinear(knots)
    table = iid_value_table(v, 12, sigma2)
    assert is_monotone(table, tol=1e-12)
    assert all(0.0 <= x <= 1.0 + 1e-12 for x in table)


@settings(max_examples=60, deadline=None)
@given(a=st.floats(0.05, 20.0), m=st.integers(1, 200), sigma2=st.floats(0.01, 50.0))
def test_exp_quadratic_quadrature_tracks_closed_form(a, m, sigma2):
    v = ExpQuadratic(a)
    assert quadrature_value(v, sigma2 / m) == pytest.approx(closed_form_value(v, sigma2 / m), abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.01, 10.0), m=st.integers(1, 200), sigma2=st.floats(0.01, 50.0))
def test_threshold_quadrature_tracks_closed_form(t, m, sigma2):
    v = Threshold(t)
    assert quadrature_value(v, sigma2 / m) == pytest.approx(closed_form_value(v, sigma2 / m), abs=1e-6)
