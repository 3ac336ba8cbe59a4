"""Randomised combinatorial auction with LP-dual prices.

The pipeline perturbs an instance, solves its LP relaxation, decomposes the
optimum into a lottery over integral allocations that overshoot each supply
by at most ``k - 1`` units, and prices goods with the LP duals.
"""

from .auction import (AuctionInstance, MechanismConfig, PerturbedInstance, build_lip,
                      bundle_count, enumerate_k_bundles, perturb)
from .errors import (InputError, InvalidConfig, LotteryDivergence, NumericalFailure, PoptError,
                     RoundingStall, VerificationFailure)
from .lottery import Lottery, construct_lottery, sample
from .lp import LinearProgram, LPSolution, LPStatus, solve
from .pricing import PriceVector, popt_prices, verify_envy_free, verify_supporting
from .rounding import iterative_rounding
from .spectrum import GridSpec

__version__ = "0.1.0"
