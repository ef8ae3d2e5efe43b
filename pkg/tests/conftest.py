import math
from pathlib import Path

import pytest

from datamarket.valuations import Buyer, ExpQuadratic, IIDTable, MarketConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# independent closed forms for the two-buyer ExpQuadratic(a=1) market, sigma2 = 1
S1_OPT = 2 * math.sqrt(2 / 3) - 0.2
S1_TRUTHFUL_UTILITY = (S1_OPT + 0.1 - 0.2) / 2


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def record(request):
    """Append a one-line verdict to the acceptance summary."""

    def _record(label: str, ok: bool, detail: str = ""):
        request.config.acceptance_lines.append(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
        return ok

    return _record


def two_buyer_market(costs=(0.1, 0.2, 0.5), a=1.0, sigma2=1.0):
    buyers = (Buyer(0, ExpQuadratic(a)), Buyer(1, ExpQuadratic(a)))
    return MarketConfig(buyers, costs, sigma2)


@pytest.fixture
def s1():
    return two_buyer_market()


@pytest.fixture
def s2():
    return two_buyer_market(costs=(0.05, 0.2, 0.5))


@pytest.fixture
def pricing_market():
    buyers = (Buyer(0, IIDTable((0.0, 0.4, 0.6))), Buyer(1, IIDTable((0.0, 0.9, 1.0))))
    return MarketConfig(buyers, (0.1, 0.2), 1.0)
