"""Repeated truthful auctions between no-regret learning bidders on a discrete bid grid."""

from .distributions import DiscreteDistribution, is_regular, myerson_reserve, virtual_values
from .engine import (BidderSpec, Schedule, SimConfig, SimResult, TrialsResult,
                     build_constant_mixture_schedule, build_two_phase_schedule, constant_schedule,
                     run, run_trials)
from .errors import BudgetExceeded, ConfigError, MonotonicityError, PreconditionError
from .grid import BidGrid
from .learners import LearnerConfig, LearnerKind, check_mean_based
from .mechanisms import (ICStatus, Interpolation, Mechanism, TieBreakRule, characterize_deterministic,
                         make_from_allocation, make_softmax, make_spa, make_staircase, mix,
                         payment_from_allocation, strictify, verify_ic)
from .metrics import auctioneer_regret, convergence, fit_scaling_exponent, metagame_gain

__all__ = [
    "BidGrid", "BidderSpec", "BudgetExceeded", "ConfigError", "DiscreteDistribution", "ICStatus",
    "Interpolation", "LearnerConfig", "LearnerKind", "Mechanism", "MonotonicityError",
    "PreconditionError", "Schedule", "SimConfig", "SimResult", "TieBreakRule", "TrialsResult",
    "auctioneer_regret", "build_constant_mixture_schedule", "build_two_phase_schedule",
    "characterize_deterministic", "check_mean_based", "constant_schedule", "convergence",
    "fit_scaling_exponent", "is_regular", "make_from_allocation", "make_softmax", "make_spa",
    "make_staircase", "metagame_gain", "mix", "myerson_reserve", "payment_from_allocation", "run",
    "run_trials", "strictify", "verify_ic", "virtual_values",
]
__version__ = "0.1.0"
