"""Truthful data-marketplace simulator: clean-data valuations, envy-free pricing,
a budget-balanced payment mechanism and deviation sweeps."""

__version__ = "0.1.0"

from .baseline import ConfigError, WelfareBaseline, welfare_opt, welfare_upper_bound
from .mechanism import MechanismInputs, PaymentRule, RoundOutcome, profit_inputs, run_round, welfare_inputs
from .pricing import EnvyFreeScheme, PricingCurve, poi_solve, profit_search, purchase, rev_opt, scheme_to_curve
from .valuations import Buyer, MarketConfig, iid_value, valuation_from_dict

__all__ = [
    "Buyer",
    "ConfigError",
    "EnvyFreeScheme",
    "MarketConfig",
    "MechanismInputs",
    "PaymentRule",
    "PricingCurve",
    "RoundOutcome",
    "WelfareBaseline",
    "iid_value",
    "poi_solve",
    "profit_inputs",
    "profit_search",
    "purchase",
    "rev_opt",
    "run_round",
    "scheme_to_curve",
    "valuation_from_dict",
    "welfare_inputs",
    "welfare_opt",
    "welfare_upper_bound",
]
