"""Expected utilities, deviation sweeps and truthful-play welfare/profit.

Utilities are those of a single contributor ``i`` (0-based) who deviates
while everybody else collects and reports as asked. The closed form uses::

    E[(A - B)^2] = (E A - E B)^2 + Var A + Var B

with ``A`` the deviator's submitted mean and ``B`` the other collector's
truthful sample mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mechanism import MechanismInputs, PaymentRule
from .strategies import (
    TRUTHFUL,
    CollectFixed,
    CollectFraction,
    FabricateNormal,
    RepeatSampleMean,
    ReplaceWithMeanCopies,
    ReportAsIs,
    ScaleAroundMean,
    ShiftMean,
    Strategy,
    TruncateTo,
)
from .valuations import IIDTable, MarketConfig

CLOSED_FORM_TOL = 1e-9
STAT_SIGMAS = 3.0
DEFAULT_REPS = 100_000

ICC_SCOPE = (
    "Unilateral deviations by contributors 0 and 1 from parametric collection/reporting "
    "families (collection counts; as-is, shifted, rescaled, repeated, truncated, mean-copy and "
    "fabricated reports), worst case over a finite mu-grid. Not a proof over all reporting rules."
)


@dataclass(frozen=True)
class UtilityEstimate:
    mean: float
    std_err: float
    mu: float
    closed_form: Optional[float] = None

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_err": self.std_err, "mu": self.mu, "closed_form": self.closed_form}


def mu_grid(sigma: float, half_width: float = 5.0, points: int = 21) -> np.ndarray:
    """Uniform grid on ``[-half_width * sigma, half_width * sigma]``."""
    return np.linspace(-half_width * sigma, half_width * sigma, points)


def utility_closed_form(
    inputs: MechanismInputs, market: MarketConfig, i: int, strategy: Strategy, mu: float, d_scale: float = 1.0
) -> Optional[float]:
    """Exact expected utility of contributor ``i`` at mean ``mu``, or ``None`` if unavailable."""
    rule = PaymentRule(inputs, market, d_scale)
    requested = rule.requests.amounts[i]
    n = strategy.collect.count(requested)
    cost = market.costs[i] * n
    if i >= 2:
        return -cost
    law = strategy.report.law(n, market.sigma2)
    if law is None:
        return None
    bias = (law.alpha - 1.0) * mu + law.beta
    sq_gap = bias * bias + law.var + market.sigma2 / rule.requests.other(i)
    paid = rule.payment_base(i) if law.count == requested else 0.0
    return paid - rule.d[i] * sq_gap - cost


@dataclass(frozen=True)
class RoundBatch:
    """Vectorized outcomes of ``reps`` independent rounds."""

    prices: np.ndarray  # (reps, n_buyers)
    payments: np.ndarray  # (reps, n_contributors)
    values: Optional[np.ndarray]  # (reps, n_buyers) realized buyer values
    collected: tuple
    cost: float  # total collection cost (deterministic given the strategies)


def simulate_rounds(
    inputs: MechanismInputs,
    market: MarketConfig,
    mu: float,
    reps: int,
    seed,
    profile: Optional[dict] = None,
    d_scale: float = 1.0,
    buyer_values: bool = False,
) -> RoundBatch:
    """Draw data, apply each contributor's strategy and evaluate prices and payments.

    ``profile`` maps contributor index to strategy; missing entries play truthfully.
    """
    profile = profile or {}
    rule = PaymentRule(inputs, market, d_scale)
    rng = np.random.default_rng(seed)
    sigma = market.sigma
    subs, collected = [], []
    for i, requested in enumerate(rule.requests.amounts):
        strat = profile.get(i, TRUTHFUL)
        n = strat.collect.count(requested)
        x = rng.normal(mu, sigma, size=(reps, n))
        subs.append(np.asarray(strat.report.apply(x, rng, sigma), dtype=float).reshape(reps, -1))
        collected.append(n)

    means = [s.mean(axis=1) if s.shape[1] else np.zeros(reps) for s in subs[:2]]
    delta = means[0] - means[1]
    compliant = [s.shape[1] == a for s, a in zip(subs, rule.requests.amounts)]
    prices = np.stack([rule.price(j, compliant[0], compliant[1], delta) for j in range(market.n_buyers)], axis=1)
    payments = np.stack([rule.payment(i, compliant[i], delta) for i in range(len(subs))], axis=1)
    cost = float(sum(c * n for c, n in zip(market.costs, collected)))

    values = None
    if buyer_values:
        pool = np.concatenate(subs, axis=1)
        size = pool.shape[1]
        cols = []
        for buyer, m in zip(market.buyers, inputs.sell):
            v = buyer.valuation
            take = min(m, size)
            if take == 0:
                cols.append(np.zeros(reps))
                continue
            if isinstance(v, IIDTable):
                cols.append(np.full(reps, v.values[min(take, len(v.values) - 1)]))
                continue
            if take == size:
                chosen = pool
            else:
                idx = np.argsort(rng.random((reps, size)), axis=1)[:, :take]
                chosen = np.take_along_axis(pool, idx, axis=1)
            cols.append(v(np.abs(chosen.mean(axis=1) - mu)))
        values = np.stack(cols, axis=1)
    return RoundBatch(prices, payments, values, tuple(collected), cost)


def simulate_utility(
    inputs: MechanismInputs,
    market: MarketConfig,
    i: int,
    strategy: Strategy,
    mu: float,
    reps: int,
    seed,
    d_scale: float = 1.0,
) -> UtilityEstimate:
    if reps < 1:
        raise ValueError("reps must be >= 1")
    batch = simulate_rounds(inputs, market, mu, reps, seed, {i: strategy}, d_scale)
    util = batch.payments[:, i] - market.costs[i] * batch.collected[i]
    se = float(util.std(ddof=1) / np.sqrt(reps)) if reps > 1 else float("nan")
    return UtilityEstimate(
        mean=float(util.mean()),
        std_err=se,
        mu=float(mu),
        closed_form=utility_closed_form(inputs, market, i, strategy, mu, d_scale),
    )


def worst_case_utility(
    inputs: MechanismInputs,
    market: MarketConfig,
    i: int,
    strategy: Strategy,
    grid,
    reps: int = DEFAULT_REPS,
    seed=0,
    d_scale: float = 1.0,
) -> UtilityEstimate:
    """Utility at the least favourable grid mean.

    Closed forms are used whenever available (``std_err`` is then 0);
    otherwise each grid point gets its own Monte Carlo run seeded by
    ``(seed, grid index)``.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("mu grid must not be empty")
    exact = [utility_closed_form(inputs, market, i, strategy, mu, d_scale) for mu in grid]
    if exact[0] is not None:
        k = int(np.argmin(exact))
        return UtilityEstimate(float(exact[k]), 0.0, float(grid[k]), float(exact[k]))
    estimates = [
        simulate_utility(inputs, market, i, strategy, mu, reps, [_seed_int(seed), k], d_scale)
        for k, mu in enumerate(grid)
    ]
    return min(estimates, key=lambda e: e.mean)


def _seed_int(seed) -> int:
    return int(seed) if np.isscalar(seed) else int(np.random.SeedSequence(seed).generate_state(1)[0])


@dataclass(frozen=True)
class DeviationGrid:
    """Parameter grid of the default deviation families.

    Shifts are in units of sigma; count offsets are relative to the requested
    amount.
    """

    fractions: tuple = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25)
    collect_offsets: tuple = (-2, -1, 0, 1, 2)
    shifts: tuple = (0.1, -0.1, 0.5, -0.5, 1.0, -1.0)
    scales: tuple = (0.0, 0.5, 2.0)
    count_offsets: tuple = (-2, -1, 0, 1, 2)
    fabricate_offsets: tuple = (-1, 0, 1)
    mu_half_width: float = 5.0
    mu_points: int = 21
    cap: int = 1000

    def mu_values(self, sigma: float) -> np.ndarray:
        return mu_grid(sigma, self.mu_half_width, self.mu_points)

    def strategies(self, requested: int, sigma: float) -> list:
        counts = sorted({requested + o for o in self.count_offsets if requested + o >= 0})
        collect = {}
        for rho in self.fractions:
            collect.setdefault(CollectFraction(rho).count(requested), CollectFraction(rho))
        for off in self.collect_offsets:
            n = requested + off
            if n >= 0:
                collect.setdefault(n, CollectFixed(n))

        reports = [ReportAsIs()]
        reports += [ShiftMean(b * sigma) for b in self.shifts if b != 0]
        reports += [ScaleAroundMean(g) for g in self.scales]
        reports += [RepeatSampleMean(c) for c in counts if c > 0]
        reports += [TruncateTo(c) for c in counts if c != requested]
        reports += [ReplaceWithMeanCopies(c) for c in counts]
        fab_counts = sorted({requested + o for o in self.fabricate_offsets if requested + o >= 0})
        reports += [FabricateNormal(float(m0), c) for m0 in self.mu_values(sigma) for c in fab_counts]

        out = []
        for n in sorted(collect):
            for rep in reports:
                s = Strategy(collect[n], rep)
                if not s.truthful and not (n == requested and isinstance(rep, ReportAsIs)):
                    out.append(s)
        return out[: self.cap]


@dataclass(frozen=True)
class DeviationEntry:
    contributor: int
    strategy: str
    worst_utility: float
    worst_mu: float
    truthful_utility: float
    margin: float
    std_err: float
    method: str
    verdict: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ConcavityCheck:
    contributor: int
    requested: int
    utilities: tuple  # utility for collected n = 1..2*requested
    argmax: int

    @property
    def passed(self) -> bool:
        return self.argmax == self.requested

    def to_dict(self) -> dict:
        return {
            "contributor": self.contributor,
            "requested": self.requested,
            "utilities": list(self.utilities),
            "argmax": self.argmax,
            "verdict": "pass" if self.passed else "fail",
        }


@dataclass(frozen=True)
class DeviationReport:
    entries: tuple
    concavity: tuple
    truthful: dict
    mu_grid: tuple
    scope: str = ICC_SCOPE
    d_scale: float = 1.0

    @property
    def failures(self) -> list:
        return [e for e in self.entries if e.verdict != "pass"]

    @property
    def all_pass(self) -> bool:
        return not self.failures and all(c.passed for c in self.concavity)

    def per_contributor(self) -> dict:
        out = {}
        for e in self.entries:
            out[e.contributor] = out.get(e.contributor, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "d_scale": self.d_scale,
            "mu_grid": list(self.mu_grid),
            "truthful_utility": {str(k): v for k, v in self.truthful.items()},
            "deviations_per_contributor": {str(k): v for k, v in self.per_contributor().items()},
            "n_failures": len(self.failures),
            "all_pass": self.all_pass,
            "concavity": [c.to_dict() for c in self.concavity],
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_table(self, limit: Optional[int] = None) -> str:
        rows = sorted(self.entries, key=lambda e: e.margin)
        if limit is not None:
            rows = rows[:limit]
        lines = [
            f"# {self.scope}",
            f"{'i':>2} {'margin':>12} {'worst':>12} {'mu':>6} verdict strategy",
        ]
        for e in rows:
            lines.append(
                f"{e.contributor:>2} {e.margin:>12.6f} {e.worst_utility:>12.6f} {e.worst_mu:>6.2f} "
                f"{e.verdict:<7} {e.strategy}"
            )
        for c in self.concavity:
            lines.append(
                f"concavity contributor {c.contributor}: argmax {c.argmax}, requested {c.requested} "
                f"-> {'pass' if c.passed else 'fail'}"
            )
        return "\n".join(lines) + "\n"


def concavity_check(inputs: MechanismInputs, market: MarketConfig, i: int, d_scale: float = 1.0) -> ConcavityCheck:
    """Utility of collecting ``n`` and submitting ``requested`` copies of the sample mean."""
    requested = PaymentRule(inputs, market, d_scale).requests.amounts[i]
    utils = [
        utility_closed_form(inputs, market, i, Strategy(CollectFixed(n), ReplaceWithMeanCopies(requested)), 0.0, d_scale)
        for n in range(1, 2 * requested + 1)
    ]
    return ConcavityCheck(i, requested, tuple(utils), int(np.argmax(utils)) + 1)


def icc_sweep(
    inputs: MechanismInputs,
    market: MarketConfig,
    grid_spec: Optional[DeviationGrid] = None,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    d_scale: float = 1.0,
    strategies: Optional[dict] = None,
) -> DeviationReport:
    """Check every deviation in the grid against truthful play.

    ``strategies`` optionally replaces the generated deviations with an
    explicit ``{contributor: [Strategy, ...]}`` mapping.
    """
    grid_spec = grid_spec or DeviationGrid()
    grid = grid_spec.mu_values(market.sigma)
    rule = PaymentRule(inputs, market, d_scale)
    entries, truthful = [], {}
    for i in (0, 1):
        honest = utility_closed_form(inputs, market, i, TRUTHFUL, 0.0, d_scale)
        truthful[i] = honest
        devs = (strategies or {}).get(i) if strategies else grid_spec.strategies(rule.requests.amounts[i], market.sigma)
        for k, strat in enumerate(devs or []):
            est = worst_case_utility(inputs, market, i, strat, grid, reps, [seed, i, k], d_scale)
            margin = honest - est.mean
            if est.closed_form is not None:
                method, ok = "closed_form", margin >= -CLOSED_FORM_TOL
            else:
                method, ok = "monte_carlo", margin >= -STAT_SIGMAS * est.std_err
            entries.append(
                DeviationEntry(i, strat.describe(), est.mean, est.mu, honest, margin, est.std_err, method,
                               "pass" if ok else "fail")
            )
    concavity = tuple(concavity_check(inputs, market, i, d_scale) for i in (0, 1))
    return DeviationReport(tuple(entries), concavity, truthful, tuple(float(m) for m in grid), d_scale=d_scale)


def welfare_at_truthful(inputs: MechanismInputs, market: MarketConfig) -> float:
    """Expected welfare when everyone collects and reports as asked."""
    n = inputs.n_tilde
    tables = market.iid_tables(n)
    value = sum(float(t[m]) for t, m in zip(tables, inputs.sell))
    c = market.costs
    return value - c[0] * (n - 1) - c[1]


def profit_at_truthful(inputs: MechanismInputs, market: MarketConfig) -> float:
    """Expected broker-side profit (buyer payments minus collection cost) under truthful play."""
    c = market.costs
    return sum(inputs.exp_price) - c[0] * (inputs.n_tilde - 1) - c[1]


def mean_and_se(x: np.ndarray) -> tuple:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def simulate_welfare(
    inputs: MechanismInputs,
    market: MarketConfig,
    mu: float,
    reps: int,
    seed,
    profile: Optional[dict] = None,
) -> tuple:
    """Monte Carlo welfare ``(mean, std_err)`` of a strategy profile at mean ``mu``."""
    batch = simulate_rounds(inputs, market, mu, reps, seed, profile, buyer_values=True)
    return mean_and_se(batch.values.sum(axis=1) - batch.cost)
