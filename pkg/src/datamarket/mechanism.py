"""The broker mechanism: work delegation, data allocation, prices and payments.

Contributors and buyers are indexed from 0 here; contributor 0 is the
cheapest. Only contributors 0 and 1 are asked to collect data, and prices and
payments depend on their submissions only through the exact-count
indicators and the squared difference of their sample means.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baseline import WelfareBaseline
from .pricing import ProfitSearchResult
from .valuations import MarketConfig

BB_TOL = 1e-9


class MechanismError(ValueError):
    pass


@dataclass(frozen=True)
class MechanismInputs:
    """Target objective value, total collection, per-buyer amounts and expected prices."""

    opt_tilde: float
    n_tilde: int
    sell: tuple
    exp_price: tuple

    def __post_init__(self):
        object.__setattr__(self, "sell", tuple(int(m) for m in self.sell))
        object.__setattr__(self, "exp_price", tuple(float(p) for p in self.exp_price))
        if self.n_tilde < 2:
            raise MechanismError("the mechanism needs a total collection of at least 2 points")
        if len(self.sell) != len(self.exp_price):
            raise MechanismError("sell and exp_price must have one entry per buyer")
        if any(m < 0 or m > self.n_tilde for m in self.sell):
            raise MechanismError("every sell amount must lie in [0, n_tilde]")

    def consistency_gap(self, c1: float) -> float:
        """``sum(exp_price) - (opt_tilde + c1 * n_tilde)``; zero is needed for budget balance."""
        return sum(self.exp_price) - (self.opt_tilde + c1 * self.n_tilde)

    def to_dict(self) -> dict:
        return {
            "opt_tilde": self.opt_tilde,
            "n_tilde": self.n_tilde,
            "sell": list(self.sell),
            "exp_price": list(self.exp_price),
        }


def welfare_inputs(market: MarketConfig, baseline: WelfareBaseline) -> MechanismInputs:
    if baseline.n_opt < 2:
        raise MechanismError(f"N_opt = {baseline.n_opt}; the mechanism needs two collectors")
    tables = market.iid_tables(baseline.n_opt)
    n = baseline.n_opt
    return MechanismInputs(
        opt_tilde=baseline.opt,
        n_tilde=n,
        sell=(n,) * market.n_buyers,
        exp_price=tuple(float(t[n]) for t in tables),
    )


def profit_inputs(market: MarketConfig, search: ProfitSearchResult) -> MechanismInputs:
    if search.n_plus < 2:
        raise MechanismError(f"N+ = {search.n_plus}; the mechanism needs two collectors")
    c1 = market.costs[0]
    return MechanismInputs(
        opt_tilde=sum(search.prices) - c1 * search.n_plus,
        n_tilde=search.n_plus,
        sell=search.allocations,
        exp_price=search.prices,
    )


@dataclass(frozen=True)
class Requests:
    amounts: tuple

    def other(self, i: int) -> int:
        """Amount requested from the other collector of the pair (0, 1)."""
        return self.amounts[1 - i]


def make_requests(inputs: MechanismInputs, n_contributors: int) -> Requests:
    if n_contributors < 2:
        raise MechanismError("at least two contributors are required")
    amounts = [inputs.n_tilde - 1, 1] + [0] * (n_contributors - 2)
    return Requests(tuple(amounts))


@dataclass(frozen=True)
class PaymentRule:
    """Precomputed constants of the price and payment formulas.

    ``d_scale`` multiplies the penalty coefficients everywhere; it exists only
    to build deliberately mispriced mechanisms for negative controls.
    """

    inputs: MechanismInputs
    market: MarketConfig
    d_scale: float = 1.0
    requests: Requests = field(init=False)
    d: tuple = field(init=False)

    def __post_init__(self):
        req = make_requests(self.inputs, len(self.market.costs))
        object.__setattr__(self, "requests", req)
        s2 = self.market.sigma2
        d = tuple(self.d_scale * self.market.costs[i] * req.amounts[i] ** 2 / s2 for i in (0, 1))
        object.__setattr__(self, "d", d)

    def _variance_terms(self, i: int) -> float:
        s2 = self.market.sigma2
        req = self.requests
        return self.d[i] * s2 / req.other(i) + self.d[i] * s2 / req.amounts[i]

    def payment_base(self, i: int) -> float:
        """Contributor ``i``'s payment when compliant and the means agree exactly."""
        inp, c = self.inputs, self.market.costs
        n_i = self.requests.amounts[i]
        share = (inp.opt_tilde + c[0] - c[1]) * n_i / inp.n_tilde
        return share + c[i] * n_i + self._variance_terms(i)

    def price_base(self, j: int, i: int) -> float:
        inp = self.inputs
        n_i = self.requests.amounts[i]
        return inp.exp_price[j] * n_i / inp.n_tilde + self._variance_terms(i) / self.market.n_buyers

    def payment(self, i: int, compliant, delta):
        """Payment to contributor ``i``; vectorizes over arrays of indicators and discrepancies."""
        if i >= 2:
            return np.zeros_like(np.asarray(delta, dtype=float))
        return np.where(compliant, self.payment_base(i), 0.0) - self.d[i] * np.square(delta)

    def price(self, j: int, compliant0, compliant1, delta):
        penalty = (self.d[0] + self.d[1]) / self.market.n_buyers * np.square(delta)
        return (
            np.where(compliant0, self.price_base(j, 0), 0.0)
            + np.where(compliant1, self.price_base(j, 1), 0.0)
            - penalty
        )


def sample_mean(x) -> tuple:
    """``(mean, degenerate)``; the mean of an empty dataset is taken as 0."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0, True
    return float(x.mean()), False


def _summary(rule: PaymentRule, submissions):
    (mu0, deg0), (mu1, deg1) = sample_mean(submissions[0]), sample_mean(submissions[1])
    compliant = tuple(len(submissions[i]) == rule.requests.amounts[i] for i in range(len(submissions)))
    return compliant, mu0 - mu1, deg0 or deg1


def buyer_price(j: int, inputs: MechanismInputs, submissions, market: MarketConfig, d_scale: float = 1.0) -> float:
    rule = PaymentRule(inputs, market, d_scale)
    compliant, delta, _ = _summary(rule, submissions)
    return float(rule.price(j, compliant[0], compliant[1], delta))


def contributor_payment(
    i: int, inputs: MechanismInputs, submissions, market: MarketConfig, d_scale: float = 1.0
) -> float:
    rule = PaymentRule(inputs, market, d_scale)
    compliant, delta, _ = _summary(rule, submissions)
    return float(rule.payment(i, compliant[i], delta))


def allocate(submissions: Sequence, inputs: MechanismInputs, rng_seed) -> tuple:
    """Give each buyer a uniformly random subset of the pooled submissions.

    Returns ``(datasets, short)``; ``short`` is true when some buyer asked
    for more points than were pooled and received the whole pool instead.
    """
    pool = np.concatenate([np.asarray(x, dtype=float).ravel() for x in submissions]) if submissions else np.empty(0)
    rng = np.random.default_rng(rng_seed)
    datasets, short = [], False
    for m in inputs.sell:
        if m >= pool.size:
            short = short or m > pool.size
            datasets.append(pool.copy())
        else:
            datasets.append(pool[rng.choice(pool.size, size=m, replace=False)])
    return datasets, short


@dataclass(frozen=True)
class RoundOutcome:
    buyer_datasets: tuple
    prices: tuple
    payments: tuple
    discrepancy: float
    compliant: tuple
    bb_residual: float
    flags: tuple
    seed: object = None

    @property
    def broker_net(self) -> float:
        """What the broker keeps (or must cover) off the budget-balanced path."""
        return -self.bb_residual

    def to_dict(self, include_data: bool = True) -> dict:
        out = {
            "seed": self.seed,
            "prices": list(self.prices),
            "payments": list(self.payments),
            "discrepancy": self.discrepancy,
            "compliant": list(self.compliant),
            "bb_residual": self.bb_residual,
            "flags": list(self.flags),
        }
        if include_data:
            out["buyer_datasets"] = [list(map(float, y)) for y in self.buyer_datasets]
        return out


def run_round(
    inputs: MechanismInputs, submissions, market: MarketConfig, rng_seed, d_scale: float = 1.0
) -> RoundOutcome:
    n_c = len(market.costs)
    if len(submissions) != n_c:
        raise MechanismError(f"expected {n_c} submissions, got {len(submissions)}")
    submissions = [np.asarray(x, dtype=float).ravel() for x in submissions]
    rule = PaymentRule(inputs, market, d_scale)
    compliant, delta, degenerate = _summary(rule, submissions)
    datasets, short = allocate(submissions, inputs, rng_seed)
    prices = tuple(float(rule.price(j, compliant[0], compliant[1], delta)) for j in range(market.n_buyers))
    payments = tuple(float(rule.payment(i, compliant[i], delta)) for i in range(n_c))
    residual = sum(payments) - sum(prices)
    flags = []
    if short:
        flags.append("short")
    if degenerate:
        flags.append("degenerate")
    if not (compliant[0] and compliant[1]):
        flags.append("noncompliant")
    if abs(residual) > BB_TOL:
        flags.append("unbalanced")
    return RoundOutcome(
        buyer_datasets=tuple(datasets),
        prices=prices,
        payments=payments,
        discrepancy=delta,
        compliant=compliant,
        bb_residual=residual,
        flags=tuple(flags),
        seed=rng_seed,
    )
