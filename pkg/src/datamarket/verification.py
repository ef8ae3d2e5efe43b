"""Budget-balance, rationality and efficiency checks for one market.

Each check returns a ``Check`` whose ``name`` matches the operation it
exercises, so reports stay self-describing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baseline import welfare_opt, welfare_upper_bound
from .mechanism import BB_TOL, MechanismInputs, PaymentRule, profit_inputs, run_round, welfare_inputs
from .pricing import EnvyFreeScheme, envy_violations, profit_search
from .simulation import (
    STAT_SIGMAS,
    TRUTHFUL,
    mean_and_se,
    profit_at_truthful,
    simulate_rounds,
    simulate_utility,
    welfare_at_truthful,
)
from .valuations import MarketConfig

EXACT_TOL = 1e-9


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, **self.detail}


def build_inputs(market: MarketConfig, objective: str):
    """Mechanism inputs plus the baseline (welfare) or search result (profit) they came from."""
    if objective == "welfare":
        base = welfare_opt(market)
        return welfare_inputs(market, base), base
    if objective == "profit":
        search = profit_search(market)
        return profit_inputs(market, search), search
    raise ValueError(f"unknown objective {objective!r}")


def compliant_adversarial_submissions(inputs: MechanismInputs, market: MarketConfig, rng, spread: float = 10.0):
    """Right-sized submissions whose means are pushed anywhere in ``[-spread, spread]``."""
    amounts = PaymentRule(inputs, market).requests.amounts
    subs = []
    for n in amounts:
        offset = rng.uniform(-spread, spread)
        subs.append(rng.normal(offset, market.sigma, size=n))
    return subs


def check_budget_balance(inputs, market, rounds: int, seed: int) -> Check:
    worst = 0.0
    for r in range(rounds):
        rng = np.random.default_rng([seed, 2, r])
        subs = compliant_adversarial_submissions(inputs, market, rng)
        out = run_round(inputs, subs, market, [seed, 3, r])
        worst = max(worst, abs(out.bb_residual))
    return Check("run_round.budget_balance", worst < BB_TOL, {"rounds": rounds, "max_abs_residual": worst})


def check_consistency(inputs: MechanismInputs, market: MarketConfig) -> Check:
    gap = inputs.consistency_gap(market.costs[0])
    return Check("MechanismInputs.consistency", abs(gap) <= EXACT_TOL, {"gap": gap})


def check_penalty_coefficients(inputs, market) -> Check:
    rule = PaymentRule(inputs, market)
    errs = [
        abs(market.sigma * math.sqrt(rule.d[i] / market.costs[i]) - rule.requests.amounts[i]) for i in (0, 1)
    ]
    return Check("buyer_price.d_identity", max(errs) <= EXACT_TOL, {"max_error": max(errs)})


def check_irc(inputs, market, mu: float, reps: int, seed: int) -> list:
    rule = PaymentRule(inputs, market)
    c = market.costs
    out = []
    for i in (0, 1):
        share = (inputs.opt_tilde + c[0] - c[1]) * rule.requests.amounts[i] / inputs.n_tilde
        est = simulate_utility(inputs, market, i, TRUTHFUL, mu, reps, [seed, 1, i])
        ok = abs(est.mean - share) <= STAT_SIGMAS * est.std_err and share >= 0
        out.append(
            Check(
                f"simulate_utility.irc[{i}]",
                ok,
                {"expected": share, "estimate": est.mean, "std_err": est.std_err},
            )
        )
    return out


def check_irb(inputs, market, mu: float, reps: int, seed: int) -> list:
    batch = simulate_rounds(inputs, market, mu, reps, [seed, 4], buyer_values=True)
    out = []
    for j in range(market.n_buyers):
        p_mean, p_se = mean_and_se(batch.prices[:, j])
        u_mean, u_se = mean_and_se(batch.values[:, j] - batch.prices[:, j])
        ok = abs(p_mean - inputs.exp_price[j]) <= STAT_SIGMAS * p_se and u_mean >= -STAT_SIGMAS * u_se
        out.append(
            Check(
                f"buyer_price.irb[{j}]",
                ok,
                {
                    "expected_price": inputs.exp_price[j],
                    "mean_price": p_mean,
                    "price_std_err": p_se,
                    "mean_utility": u_mean,
                    "utility_std_err": u_se,
                },
            )
        )
    return out


def check_welfare(inputs, market, base) -> list:
    c = market.costs
    w = welfare_at_truthful(inputs, market)
    bound = welfare_upper_bound(base, c[0], c[1])
    return [
        Check("welfare_at_truthful.equality", abs(w - bound) <= EXACT_TOL, {"welfare": w, "expected": bound}),
        Check("welfare_upper_bound.respected", w <= bound + EXACT_TOL, {"welfare": w, "bound": bound}),
    ]


def check_profit(inputs, market, search) -> list:
    c = market.costs
    p = profit_at_truthful(inputs, market)
    expected = search.profit - (c[1] - c[0])
    tables = market.iid_tables(inputs.n_tilde)
    problems = envy_violations(tables, EnvyFreeScheme(inputs.sell, inputs.exp_price), tol=EXACT_TOL)
    return [
        Check("profit_at_truthful.equality", abs(p - expected) <= EXACT_TOL, {"profit": p, "expected": expected}),
        Check("profit_inputs.efb", not problems, {"violations": problems}),
    ]


def verify_market(
    market: MarketConfig, objective: str, seed: int, reps: int, bb_rounds: int, mu: float = 0.0
) -> list:
    inputs, source = build_inputs(market, objective)
    checks = [check_consistency(inputs, market), check_penalty_coefficients(inputs, market)]
    checks.append(check_budget_balance(inputs, market, bb_rounds, seed))
    checks += check_irc(inputs, market, mu, reps, seed)
    checks += check_irb(inputs, market, mu, reps, seed)
    if objective == "welfare":
        checks += check_welfare(inputs, market, source)
    else:
        checks += check_profit(inputs, market, source)
    return checks
