"""Envy-free pricing schemes, posted quantity-price curves and the profit search.

Buyers are described here only through their clean-data value tables
``tables[j][m] = v_iid_j(m)`` for ``m = 0..N`` (``tables[j][0] == 0``).

The revenue-optimal envy-free scheme for a fixed allocation is a system of
difference constraints::

    p_j             <= v_j(m_j)                  (individual rationality)
    p_j - p_k       <= v_j(m_j) - v_j(m_k)       (no envy of buyer k)

whose componentwise-largest solution is the vector of shortest-path
distances from a virtual source. ``rev_opt`` enumerates every allocation
vector and solves these systems in vectorized batches, which is exact for
desk-scale instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .baseline import search_limit
from .valuations import MarketConfig

MONEY_TOL = 1e-9
CYCLE_TOL = 1e-12
MAX_ENUMERATION = 21**5
_CHUNK = 1 << 16


class InstanceTooLarge(ValueError):
    """Exact enumeration would exceed the configured size budget."""


class NotEnvyFree(ValueError):
    pass


@dataclass(frozen=True)
class PricingCurve:
    q: tuple

    def __post_init__(self):
        q = tuple(float(x) for x in self.q)
        if not q or q[0] != 0.0:
            raise ValueError("pricing curve must start with q(0) = 0")
        object.__setattr__(self, "q", q)

    @property
    def N(self) -> int:
        return len(self.q) - 1

    @property
    def monotone(self) -> bool:
        return all(b >= a for a, b in zip(self.q, self.q[1:]))

    def to_dict(self) -> dict:
        return {"N": self.N, "q": list(self.q)}


@dataclass(frozen=True)
class EnvyFreeScheme:
    allocations: tuple
    prices: tuple

    def __post_init__(self):
        object.__setattr__(self, "allocations", tuple(int(m) for m in self.allocations))
        object.__setattr__(self, "prices", tuple(float(p) for p in self.prices))
        if len(self.allocations) != len(self.prices):
            raise ValueError("one allocation and one price per buyer")

    @property
    def revenue(self) -> float:
        return float(sum(self.prices))

    def to_dict(self) -> dict:
        return {"alloc": list(self.allocations), "price": list(self.prices)}


@dataclass(frozen=True)
class ProfitSearchResult:
    n_plus: int
    allocations: tuple
    prices: tuple
    profit: float
    curve: PricingCurve
    revenue_by_n: tuple  # (N, revenue, profit)

    @property
    def unprofitable(self) -> bool:
        return self.profit <= 0.0

    def to_dict(self) -> dict:
        return {
            "n_plus": self.n_plus,
            "alloc": list(self.allocations),
            "price": list(self.prices),
            "profit": self.profit,
            "unprofitable": self.unprofitable,
            "curve": self.curve.to_dict(),
            "by_n": [{"N": n, "revenue": r, "profit": p} for n, r, p in self.revenue_by_n],
        }


def _as_tables(tables) -> np.ndarray:
    arr = np.asarray(tables, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def purchase(table: Sequence[float], curve: PricingCurve, tol: float = MONEY_TOL) -> int:
    """Quantity a utility-maximizing buyer takes from ``curve``; the largest one on ties.

    Utilities within ``tol`` of the maximum count as ties.
    """
    table = np.asarray(table, dtype=float)
    if len(table) != curve.N + 1:
        raise ValueError(f"table covers {len(table) - 1} points but curve covers {curve.N}")
    utility = table - np.asarray(curve.q)
    best = utility.max()
    return int(np.flatnonzero(utility >= best - tol)[-1])


def curve_revenue(tables, N: int, curve: PricingCurve) -> float:
    tables = _as_tables(tables)[:, : N + 1]
    return float(sum(curve.q[purchase(t, curve)] for t in tables))


def envy_violations(tables, scheme: EnvyFreeScheme, tol: float = MONEY_TOL) -> list:
    """List of human-readable IRB / EFB violations (empty when the scheme is envy-free)."""
    tables = _as_tables(tables)
    alloc, price = scheme.allocations, scheme.prices
    out = []
    for j, (mj, pj) in enumerate(zip(alloc, price)):
        own = tables[j, mj] - pj
        if own < -tol:
            out.append(f"IRB buyer {j}: utility {own:.3g} < 0")
        for k, (mk, pk) in enumerate(zip(alloc, price)):
            if k != j and tables[j, mk] - pk > own + tol:
                out.append(f"EFB buyer {j} envies buyer {k}")
    return out


def scheme_to_curve(scheme: EnvyFreeScheme, N: int, tables=None) -> PricingCurve:
    """Step curve charging each buyer's price on the quantity band ending at her allocation.

    With buyers sorted by allocation, ``q(m) = p_k`` for ``m`` in
    ``(m_{k-1}, m_k]`` and ``q = p_last`` up to ``N``; ``q(0) = 0``. When
    ``tables`` are given the scheme is validated first.
    """
    if scheme.allocations and max(scheme.allocations) > N:
        raise ValueError("allocation exceeds N")
    if tables is not None:
        problems = envy_violations(tables, scheme)
        if problems:
            raise NotEnvyFree("; ".join(problems))
    q = [0.0] * (N + 1)
    order = sorted(range(len(scheme.allocations)), key=lambda j: scheme.allocations[j])
    lo = 0
    for j in order:
        hi = scheme.allocations[j]
        for m in range(lo + 1, hi + 1):
            q[m] = scheme.prices[j]
        lo = max(lo, hi)
    if order:
        for m in range(lo + 1, N + 1):
            q[m] = scheme.prices[order[-1]]
    return PricingCurve(tuple(q))


def _batch_prices(tables: np.ndarray, alloc: np.ndarray):
    """Max envy-free prices for a batch of allocations, shape (K, B).

    Returns ``(prices, feasible)``; rows with a negative cycle are infeasible.
    """
    K, B = alloc.shape
    own = tables[np.arange(B)[None, :], alloc]  # v_j(m_j), (K, B)
    cross = tables[np.arange(B)[None, None, :], alloc[:, :, None]]  # [K, k, j] = v_j(m_k)
    D = np.full((K, B + 1, B + 1), np.inf)
    D[:, 0, 1:] = own
    D[:, 1:, 1:] = own[:, None, :] - cross
    idx = np.arange(B + 1)
    D[:, idx, idx] = 0.0
    for via in range(B + 1):
        np.minimum(D, D[:, :, via, None] + D[:, None, via, :], out=D)
    feasible = np.all(D[:, idx, idx] >= -CYCLE_TOL, axis=1)
    return D[:, 0, 1:], feasible


def optimal_ef_prices(tables, allocations: Sequence[int]) -> Optional[np.ndarray]:
    """Componentwise-largest envy-free, individually rational prices, or ``None`` if infeasible."""
    tables = _as_tables(tables)
    prices, feasible = _batch_prices(tables, np.asarray([allocations], dtype=int))
    return prices[0] if feasible[0] else None


def rev_opt(tables, N: int, max_enumeration: int = MAX_ENUMERATION):
    """Exact revenue-optimal envy-free scheme selling at most ``N`` points to each buyer."""
    tables = _as_tables(tables)
    B = tables.shape[0]
    if N < 0:
        raise ValueError("N must be >= 0")
    if tables.shape[1] < N + 1:
        raise ValueError("tables must cover quantities 0..N")
    tables = tables[:, : N + 1]
    total = (N + 1) ** B
    if total > max_enumeration:
        raise InstanceTooLarge(
            f"(N+1)^|B| = {total} exceeds the exact-solver budget {max_enumeration}; "
            "use an approximate ordered-item-pricing solver"
        )
    best_rev, best_alloc, best_price = -np.inf, None, None
    shape = (N + 1,) * B
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(total, start + _CHUNK))
        alloc = np.stack(np.unravel_index(flat, shape), axis=1)
        prices, feasible = _batch_prices(tables, alloc)
        revenue = np.where(feasible, prices.sum(axis=1), -np.inf)
        k = int(np.argmax(revenue))
        if revenue[k] > best_rev + CYCLE_TOL:
            best_rev, best_alloc, best_price = float(revenue[k]), alloc[k], prices[k]
    return EnvyFreeScheme(tuple(best_alloc), tuple(best_price)), best_rev


def poi_solve(tables, N: int, epsilon: float = 0.0) -> PricingCurve:
    """Ordered-item pricing curve for ``N`` points.

    The default solver is exact (``epsilon`` is accepted for interface
    compatibility with approximate solvers and ignored).
    """
    if N == 0:
        return PricingCurve((0.0,))
    scheme, _ = rev_opt(tables, N)
    return scheme_to_curve(scheme, N)


Solver = Callable[..., PricingCurve]


def profit_search(market: MarketConfig, epsilon: float = 0.0, solver: Solver = poi_solve) -> ProfitSearchResult:
    """Sweep the total collection amount and keep the most profitable posted curve."""
    c1 = market.costs[0]
    n_max = search_limit(market.n_buyers, c1)
    tables = market.iid_tables(n_max)
    best = None
    by_n = []
    for N in range(1, n_max + 1):
        sub = tables[:, : N + 1]
        curve = solver(sub, N, epsilon)
        alloc = tuple(purchase(t, curve) for t in sub)
        revenue = float(sum(curve.q[m] for m in alloc))
        profit = revenue - c1 * N
        by_n.append((N, revenue, profit))
        if best is None or profit > best[0] + CYCLE_TOL:
            best = (profit, N, alloc, curve)
    profit, N, alloc, curve = best
    return ProfitSearchResult(
        n_plus=N,
        allocations=alloc,
        prices=tuple(curve.q[m] for m in alloc),
        profit=profit,
        curve=curve,
        revenue_by_n=tuple(by_n),
    )
