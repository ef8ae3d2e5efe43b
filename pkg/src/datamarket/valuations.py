"""Buyer valuations: error-based value functions and the induced clean-data value.

A buyer's error valuation maps the absolute estimation error ``e >= 0`` to a
value in [0, 1]. Receiving ``m`` i.i.d. samples from N(mu, sigma2) and using the
sample mean gives an error ``|X|`` with ``X ~ N(0, sigma2 / m)``, independent of
``mu``, so the clean-data value ``v_iid(m) = E[v(|X|)]`` is a plain number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

DEFAULT_NODES = 64


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


def _check_values(values: Sequence[float], what: str) -> None:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise DomainError(f"{what}: empty")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{what}: values must lie in [0, 1]")
    if np.any(np.diff(arr) > 0.0):
        raise DomainError(f"{what}: values must be non-increasing in the error")


@dataclass(frozen=True)
class ExpQuadratic:
    """``v(e) = exp(-e^2 / (2 a^2))``."""

    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("exp_quadratic: a must be > 0")

    def __call__(self, e):
        return np.exp(-np.square(e) / (2.0 * self.a**2))

    def breakpoints(self) -> tuple:
        return ()

    @property
    def length_scale(self) -> float:
        return self.a

    def to_dict(self) -> dict:
        return {"family": "exp_quadratic", "a": self.a}


@dataclass(frozen=True)
class Threshold:
    """Value 1 while the error is at most ``t``, 0 beyond."""

    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError("threshold: t must be > 0")

    def __call__(self, e):
        return np.where(np.asarray(e) <= self.t, 1.0, 0.0)

    def breakpoints(self) -> tuple:
        return (self.t,)

    def to_dict(self) -> dict:
        return {"family": "threshold", "t": self.t}


@dataclass(frozen=True)
class PiecewiseLinear:
    """Linear interpolation between ``(error, value)`` knots, clamped outside."""

    knots: tuple

    def __post_init__(self):
        knots = tuple((float(e), float(v)) for e, v in self.knots)
        if not knots:
            raise DomainError("piecewise_linear: needs at least one knot")
        errors = [e for e, _ in knots]
        if errors[0] < 0 or any(b <= a for a, b in zip(errors, errors[1:])):
            raise DomainError("piecewise_linear: knot errors must be >= 0 and strictly increasing")
        _check_values([v for _, v in knots], "piecewise_linear")
        object.__setattr__(self, "knots", knots)

    @property
    def errors(self) -> np.ndarray:
        return np.array([e for e, _ in self.knots])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.knots])

    def __call__(self, e):
        return np.interp(e, self.errors, self.values)

    def breakpoints(self) -> tuple:
        return tuple(e for e, _ in self.knots if e > 0)

    def to_dict(self) -> dict:
        return {"family": "piecewise_linear", "knots": [list(k) for k in self.knots]}


@dataclass(frozen=True)
class Tabulated:
    """Values on the evenly spaced error grid ``0, step, 2*step, ...``.

    Interpolates linearly between grid points and clamps beyond the grid.
    """

    step: float
    values: tuple

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError("tabulated: step must be > 0")
        values = tuple(float(v) for v in self.values)
        _check_values(values, "tabulated")
        object.__setattr__(self, "values", values)

    @property
    def errors(self) -> np.ndarray:
        return self.step * np.arange(len(self.values))

    def __call__(self, e):
        return np.interp(e, self.errors, np.asarray(self.values))

    def breakpoints(self) -> tuple:
        return tuple(self.errors[1:])

    def to_dict(self) -> dict:
        return {"family": "tabulated", "step": self.step, "values": list(self.values)}


@dataclass(frozen=True)
class IIDTable:
    """A clean-data value given directly as ``v_iid(0..K)``, held at ``v_iid(K)`` beyond.

    Used when only quantity valuations are known (ordered item pricing
    instances); it has no error valuation behind it.
    """

    values: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if len(values) < 2:
            raise DomainError("iid_table: needs values for m = 0 and m = 1 at least")
        if values[0] != 0.0:
            raise DomainError("iid_table: value at m = 0 must be 0")
        arr = np.array(values)
        if np.any(arr < 0) or np.any(arr > 1) or np.any(np.diff(arr) < 0):
            raise DomainError("iid_table: values must be non-decreasing in [0, 1]")
        object.__setattr__(self, "values", values)

    def __call__(self, e):
        raise DomainError("iid_table valuations carry no error valuation")

    def to_dict(self) -> dict:
        return {"family": "iid_table", "values": list(self.values)}


ErrorValuation = Union[ExpQuadratic, Threshold, PiecewiseLinear, Tabulated]
Valuation = Union[ErrorValuation, IIDTable]


def valuation_from_dict(data: dict) -> Valuation:
    family = data.get("family")
    try:
        if family == "exp_quadratic":
            return ExpQuadratic(float(data["a"]))
        if family == "threshold":
            return Threshold(float(data["t"]))
        if family == "piecewise_linear":
            return PiecewiseLinear(tuple(tuple(k) for k in data["knots"]))
        if family == "tabulated":
            return Tabulated(float(data["step"]), tuple(data["values"]))
        if family == "iid_table":
            return IIDTable(tuple(data["values"]))
    except KeyError as exc:
        raise DomainError(f"{family}: missing field {exc.args[0]!r}") from None
    raise DomainError(f"unknown valuation family {family!r}")


@dataclass(frozen=True)
class Buyer:
    id: int
    valuation: Valuation


@dataclass(frozen=True)
class MarketConfig:
    """Buyers, per-point contributor costs (sorted, cheapest first) and noise variance."""

    buyers: tuple
    costs: tuple
    sigma2: float
    quadrature_nodes: int = field(default=DEFAULT_NODES, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buyers", tuple(self.buyers))
        object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))
        if not self.buyers:
            raise DomainError("buyers: at least one buyer is required")
        ids = [b.id for b in self.buyers]
        if len(set(ids)) != len(ids):
            raise DomainError("buyers: ids must be unique")
        if len(self.costs) < 2:
            raise DomainError("costs: at least two contributors are required")
        if any(c <= 0 for c in self.costs):
            raise DomainError("costs: every cost must be > 0")
        if any(b < a for a, b in zip(self.costs, self.costs[1:])):
            raise DomainError("costs: must be sorted non-decreasing")
        if not self.sigma2 > 0:
            raise DomainError("sigma2: must be > 0")

    @property
    def n_buyers(self) -> int:
        return len(self.buyers)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def iid_tables(self, n_max: int) -> np.ndarray:
        """Array of shape (n_buyers, n_max + 1) with ``v_iid_j(m)``."""
        return np.array(
            [buyer_iid_table(b.valuation, n_max, self.sigma2, self.quadrature_nodes) for b in self.buyers]
        )


def error_value(v: ErrorValuation, e: float) -> float:
    if e < 0:
        raise DomainError(f"error must be >= 0, got {e}")
    return float(v(e))


@lru_cache(maxsize=None)
def _hermgauss(n: int):
    return np.polynomial.hermite.hermgauss(n)


@lru_cache(maxsize=None)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _half_normal_mass(lo: float, hi: float, s: float) -> float:
    # P(lo <= |X| <= hi), X ~ N(0, s^2)
    r = s * math.sqrt(2.0)
    hi_term = 1.0 if math.isinf(hi) else math.erf(hi / r)
    return hi_term - math.erf(lo / r)


def _half_normal_first_moment(lo: float, hi: float, s: float) -> float:
    # E[|X| ; lo <= |X| <= hi]
    hi_term = 0.0 if math.isinf(hi) else math.exp(-hi * hi / (2 * s * s))
    return s * math.sqrt(2.0 / math.pi) * (math.exp(-lo * lo / (2 * s * s)) - hi_term)


def _piecewise_expectation(errors: np.ndarray, values: np.ndarray, s: float) -> float:
    total = values[0] * _half_normal_mass(0.0, errors[0], s)
    for (e0, v0), (e1, v1) in zip(zip(errors, values), zip(errors[1:], values[1:])):
        slope = (v1 - v0) / (e1 - e0)
        intercept = v0 - slope * e0
        total += intercept * _half_normal_mass(e0, e1, s) + slope * _half_normal_first_moment(e0, e1, s)
    total += values[-1] * _half_normal_mass(errors[-1], math.inf, s)
    return total


def closed_form_value(v: ErrorValuation, error_var: float):
    """``E[v(|X|)]`` for ``X ~ N(0, error_var)``, or ``None`` if no closed form is known."""
    s = math.sqrt(error_var)
    if isinstance(v, ExpQuadratic):
        return 1.0 / math.sqrt(1.0 + error_var / v.a**2)
    if isinstance(v, Threshold):
        return math.erf(v.t / (s * math.sqrt(2.0)))
    if isinstance(v, (PiecewiseLinear, Tabulated)):
        values = v.values if isinstance(v, PiecewiseLinear) else np.asarray(v.values)
        return _piecewise_expectation(v.errors, values, s)
    return None


def quadrature_value(v: ErrorValuation, error_var: float, nodes: int = DEFAULT_NODES) -> float:
    """``E[v(|X|)]`` for ``X ~ N(0, error_var)`` by numerical quadrature.

    Smooth valuations at least half as wide as the error law use Gauss-Hermite
    with ``nodes`` points. Narrower ones, and valuations with kinks or jumps,
    are integrated piece by piece against the half-normal density with
    composite Gauss-Legendre (``nodes`` points per panel, panels no wider
    than the error sd or the valuation's length scale); a single
    Gauss-Hermite rule resolves neither a jump nor a narrow bump to 1e-6.
    """
    s = math.sqrt(error_var)
    cuts = [b for b in v.breakpoints() if b > 0]
    scale = getattr(v, "length_scale", None)
    narrow = scale is not None and scale < 0.5 * s
    if not cuts and not narrow:
        x, w = _hermgauss(nodes)
        return float(np.dot(w, v(np.abs(math.sqrt(2.0) * s * x))) / math.sqrt(math.pi))

    width = min(s, scale) if narrow else s
    # beyond 40 widths the density (or the valuation) underflows
    upper = 40.0 * width if narrow else 40.0 * s
    edges = sorted({0.0, *[c for c in cuts if c < upper], upper})
    x, w = _leggauss(nodes)
    total = 0.0
    for lo, hi in zip(edges, edges[1:]):
        panels = max(1, math.ceil((hi - lo) / width))
        grid = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(grid)
        mid = 0.5 * (grid[:-1] + grid[1:])
        pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        wts = (half[:, None] * w[None, :]).ravel()
        dens = 2.0 / (s * math.sqrt(2.0 * math.pi)) * np.exp(-pts * pts / (2.0 * error_var))
        total += float(np.dot(wts, dens * v(pts)))
    last = float(v(upper))
    return total + last * _half_normal_mass(upper, math.inf, s)


def iid_value(v: ErrorValuation, m: int, sigma2: float, nodes: int = DEFAULT_NODES, method: str = "auto") -> float:
    """Expected value of buyer ``v`` for ``m`` clean samples.

    ``method`` is ``"auto"`` (closed form when available, else quadrature),
    ``"closed"`` or ``"quadrature"``.
    """
    if m <= 0 or int(m) != m:
        raise DomainError(f"sample count must be a positive integer, got {m}")
    if not sigma2 > 0:
        raise DomainError("sigma2 must be > 0")
    if isinstance(v, IIDTable):
        return v.values[min(int(m), len(v.values) - 1)]
    error_var = sigma2 / m
    if method in ("auto", "closed"):
        value = closed_form_value(v, error_var)
        if value is not None:
            return float(value)
        if method == "closed":
            raise DomainError(f"no closed form for {type(v).__name__}")
    elif method != "quadrature":
        raise DomainError(f"unknown method {method!r}")
    return quadrature_value(v, error_var, nodes)


def iid_value_table(v: Valuation, n_max: int, sigma2: float, nodes: int = DEFAULT_NODES) -> list:
    """``[v_iid(0), ..., v_iid(n_max)]`` with the no-data value fixed at 0."""
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    return [0.0] + [iid_value(v, m, sigma2, nodes) for m in range(1, n_max + 1)]


def buyer_iid_table(v: Valuation, n_max: int, sigma2: float, nodes: int = DEFAULT_NODES) -> np.ndarray:
    return np.asarray(iid_value_table(v, n_max, sigma2, nodes))


def is_monotone(table: Sequence[float], tol: float = 1e-12) -> bool:
    return bool(np.all(np.diff(np.asarray(table)) >= -tol))
