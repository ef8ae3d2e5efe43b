"""Contributor strategies: a collection rule and a reporting rule.

Every reporting rule can be applied to a batch of collected datasets (one
row per replication). Rules whose submitted sample mean is an affine
function of the collected points also expose its law, ``alpha * mu + beta``
with variance ``var``, which is what the closed-form utility needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class SubmittedLaw:
    count: int
    alpha: float  # submitted mean has expectation alpha * mu + beta
    beta: float
    var: float


_EMPTY = SubmittedLaw(0, 0.0, 0.0, 0.0)


def _row_means(x: np.ndarray) -> np.ndarray:
    if x.shape[1] == 0:
        return np.zeros(x.shape[0])
    return x.mean(axis=1)


# collection rules


@dataclass(frozen=True)
class CollectAsked:
    def count(self, requested: int) -> int:
        return requested

    def describe(self) -> str:
        return "collect=asked"


@dataclass(frozen=True)
class CollectFixed:
    n: int

    def count(self, requested: int) -> int:
        return self.n

    def describe(self) -> str:
        return f"collect={self.n}"


@dataclass(frozen=True)
class CollectFraction:
    rho: float

    def count(self, requested: int) -> int:
        return int(math.floor(self.rho * requested + 0.5))

    def describe(self) -> str:
        return f"collect={self.rho:g}x"


# reporting rules


@dataclass(frozen=True)
class ReportAsIs:
    def apply(self, x, rng, sigma):
        return x

    def law(self, n, sigma2):
        return SubmittedLaw(n, 1.0, 0.0, sigma2 / n) if n else _EMPTY

    def describe(self) -> str:
        return "report=as_is"


@dataclass(frozen=True)
class FabricateNormal:
    """Ignore the collected data and submit ``count`` draws from N(mu0, sigma2)."""

    mu0: float
    count: int

    def apply(self, x, rng, sigma):
        return rng.normal(self.mu0, sigma, size=(x.shape[0], self.count))

    def law(self, n, sigma2):
        return SubmittedLaw(self.count, 0.0, self.mu0, sigma2 / self.count) if self.count else _EMPTY

    def describe(self) -> str:
        return f"report=fabricate(mu0={self.mu0:g},count={self.count})"


@dataclass(frozen=True)
class ShiftMean:
    b: float

    def apply(self, x, rng, sigma):
        return x + self.b

    def law(self, n, sigma2):
        return SubmittedLaw(n, 1.0, self.b, sigma2 / n) if n else _EMPTY

    def describe(self) -> str:
        return f"report=shift({self.b:g})"


@dataclass(frozen=True)
class ScaleAroundMean:
    """Stretch the points around their mean by ``gamma``; the mean is kept."""

    gamma: float

    def apply(self, x, rng, sigma):
        m = _row_means(x)[:, None]
        return m + self.gamma * (x - m)

    def law(self, n, sigma2):
        return SubmittedLaw(n, 1.0, 0.0, sigma2 / n) if n else _EMPTY

    def describe(self) -> str:
        return f"report=scale({self.gamma:g})"


@dataclass(frozen=True)
class RepeatSampleMean:
    """Cycle through the collected points until ``count`` points are submitted.

    The submitted mean weights point ``r`` by how often it is repeated, so it
    keeps expectation ``mu`` but has variance ``sigma2 * sum(k_r^2) / count^2``.
    """

    count: int

    def _multiplicity(self, n):
        return np.bincount(np.arange(self.count) % n, minlength=n)

    def apply(self, x, rng, sigma):
        n = x.shape[1]
        if n == 0:
            return x
        return x[:, np.arange(self.count) % n]

    def law(self, n, sigma2):
        if n == 0 or self.count == 0:
            return _EMPTY
        k = self._multiplicity(n)
        return SubmittedLaw(self.count, 1.0, 0.0, sigma2 * float(np.sum(k * k)) / self.count**2)

    def describe(self) -> str:
        return f"report=repeat(count={self.count})"


@dataclass(frozen=True)
class TruncateTo:
    count: int

    def apply(self, x, rng, sigma):
        return x[:, : self.count]

    def law(self, n, sigma2):
        k = min(n, self.count)
        return SubmittedLaw(k, 1.0, 0.0, sigma2 / k) if k else _EMPTY

    def describe(self) -> str:
        return f"report=truncate({self.count})"


@dataclass(frozen=True)
class ReplaceWithMeanCopies:
    """Submit ``count`` copies of the collected sample mean (0 if nothing was collected)."""

    count: int

    def apply(self, x, rng, sigma):
        return np.repeat(_row_means(x)[:, None], self.count, axis=1)

    def law(self, n, sigma2):
        if self.count == 0:
            return _EMPTY
        if n == 0:
            return SubmittedLaw(self.count, 0.0, 0.0, 0.0)
        return SubmittedLaw(self.count, 1.0, 0.0, sigma2 / n)

    def describe(self) -> str:
        return f"report=mean_copies({self.count})"


@dataclass(frozen=True)
class CustomReport:
    """Arbitrary batch reporting rule; only Monte Carlo evaluation is possible."""

    fn: Callable
    name: str = "custom"

    def apply(self, x, rng, sigma):
        return self.fn(x, rng, sigma)

    def law(self, n, sigma2) -> Optional[SubmittedLaw]:
        return None

    def describe(self) -> str:
        return f"report={self.name}"


@dataclass(frozen=True)
class Strategy:
    collect: object = CollectAsked()
    report: object = ReportAsIs()

    def describe(self) -> str:
        return f"{self.collect.describe()} {self.report.describe()}"

    @property
    def truthful(self) -> bool:
        return isinstance(self.collect, CollectAsked) and isinstance(self.report, ReportAsIs)


TRUTHFUL = Strategy()
