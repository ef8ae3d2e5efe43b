"""Non-strategic welfare baseline and the strategic welfare ceiling."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .valuations import MarketConfig


class ConfigError(ValueError):
    pass


class SearchBoundaryWarning(UserWarning):
    """The maximizer sits on the upper end of the searched range."""


@dataclass(frozen=True)
class WelfareBaseline:
    n_opt: int
    opt: float
    table: tuple  # (N, sum_j v_iid_j(N) - c_1 N) for N = 1..n_max

    def to_dict(self) -> dict:
        return {
            "n_opt": self.n_opt,
            "opt": self.opt,
            "table": [{"N": n, "welfare": w} for n, w in self.table],
        }


def search_limit(n_buyers: int, c1: float) -> int:
    """Largest total amount worth considering: total buyer value is at most ``n_buyers``."""
    if not c1 > 0:
        raise ConfigError("c_1 must be > 0")
    return max(1, math.ceil(n_buyers / c1))


def welfare_opt(market: MarketConfig) -> WelfareBaseline:
    c1 = market.costs[0]
    n_max = search_limit(market.n_buyers, c1)
    tables = market.iid_tables(n_max)
    ns = np.arange(1, n_max + 1)
    welfare = tables[:, 1:].sum(axis=0) - c1 * ns
    best = int(np.argmax(welfare))  # first maximizer, i.e. smallest N
    if n_max > 1 and best == n_max - 1:
        warnings.warn(
            f"welfare maximizer N={n_max} is on the search boundary", SearchBoundaryWarning, stacklevel=2
        )
    return WelfareBaseline(
        n_opt=int(ns[best]),
        opt=float(welfare[best]),
        table=tuple((int(n), float(w)) for n, w in zip(ns, welfare)),
    )


def welfare_upper_bound(baseline: WelfareBaseline, c1: float, c2: float) -> float:
    """Ceiling on welfare at any equilibrium with truthful reporting."""
    if c2 < c1:
        raise ConfigError("c_2 must be >= c_1")
    return baseline.opt - (c2 - c1)
