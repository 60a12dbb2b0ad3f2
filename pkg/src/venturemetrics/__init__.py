"""Sector-level private-equity performance analytics."""

from .model import SECTORS, Dataset, ExitEvent, FundingRound, Organization
from .marketdata import MarketMoments, Quarter, QuarterGrid
from .returns import DilutionMode, dilution_stake, return_to_exit, to_daily, to_quarterly
from .econometrics import LogModelFit, ImpliedPerformance, annualize, fit_log_model
from .stats import WelchResult, welch_t
from .sim import SimSpec

__version__ = "0.1.0"

__all__ = [
    "SECTORS",
    "Dataset",
    "ExitEvent",
    "FundingRound",
    "Organization",
    "MarketMoments",
    "Quarter",
    "QuarterGrid",
    "DilutionMode",
    "dilution_stake",
    "return_to_exit",
    "to_daily",
    "to_quarterly",
    "LogModelFit",
    "ImpliedPerformance",
    "annualize",
    "fit_log_model",
    "WelchResult",
    "welch_t",
    "SimSpec",
    "__version__",
]
