import math
import warnings

import numpy as np
import pytest

from datamarket.baseline import ConfigError, SearchBoundaryWarning, search_limit, welfare_opt, welfare_upper_bound
from datamarket.valuations import Buyer, IIDTable, MarketConfig

from conftest import S1_OPT, two_buyer_market


def test_two_buyer_optimum(s1):
    base = welfare_opt(s1)
    # exhaustive search over the closed form 2 (1 + 1/N)^(-1/2) - 0.1 N
    ns = np.arange(1, 1001)
    oracle = 2 / np.sqrt(1 + 1 / ns) - 0.1 * ns
    assert base.n_opt == int(ns[np.argmax(oracle)]) == 2
    assert base.opt == pytest.approx(S1_OPT, abs=1e-12)
    assert base.opt == pytest.approx(oracle.max(), abs=1e-12)
    assert len(base.table) == search_limit(2, 0.1) == 20


def test_upper_bound_gap(s1):
    base = welfare_opt(s1)
    assert welfare_upper_bound(base, 0.1, 0.2) == pytest.approx(S1_OPT - 0.1, abs=1e-15)
    assert welfare_upper_bound(base, 0.1, 0.1) == base.opt
    with pytest.raises(ConfigError):
        welfare_upper_bound(base, 0.2, 0.1)


def test_cheaper_collection_buys_more():
    assert welfare_opt(two_buyer_market(costs=(0.05, 0.2, 0.5))).n_opt == 4


def test_ties_pick_smallest():
    # flat table: welfare strictly falls with N, but with zero value everywhere all N lose; N=1 is best
    market = MarketConfig((Buyer(0, IIDTable((0.0, 0.5, 0.5, 0.5))),), (0.25, 0.3), 1.0)
    assert welfare_opt(market).n_opt == 1
    tie = MarketConfig((Buyer(0, IIDTable((0.0, 0.5, 1.0))),), (0.5, 0.6), 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SearchBoundaryWarning)
        base = welfare_opt(tie)
    assert base.n_opt == 1 and base.opt == 0.0


def test_boundary_warning():
    market = MarketConfig((Buyer(0, IIDTable((0.0, 0.0, 1.0))),), (0.5, 0.6), 1.0)
    with pytest.warns(SearchBoundaryWarning):
        base = welfare_opt(market)
    assert base.n_opt == 2


def test_search_limit_validation():
    assert search_limit(3, 0.7) == math.ceil(3 / 0.7)
    with pytest.raises(ConfigError):
        search_limit(2, 0.0)
