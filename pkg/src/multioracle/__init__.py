"""Multiple oracle equilibrium computation for continuous games."""

from .catalog import example_game, random_polynomial_game, random_zero_sum_polymatrix
from .driver import SolveConfig, SolveResult, certify_epsilon, solve
from .game import BlackBox, ContinuousGame, Polynomial, PolymatrixSum, expected_utility, payoffs
from .metrics import total_variation, wasserstein, wasserstein_bounds
from .oracles import OracleConfig, best_response
from .spaces import Box, Circle, Finite, MixedStrategy, Profile, Simplex, canonicalize, dirac

__version__ = "0.1.0"
