"""Cache placement for wireless helper networks.

Uncoded placement (greedy, LP with pipage rounding, exhaustive search),
coded placement by linear programming, and a single-cell simulator.
"""

__version__ = "0.1.0"

from .delay import (NotSpecialCaseError, SpecialCaseInstance, coded_delays, coded_objective,
                    coded_user_file_delay, coverage_surrogate_L, special_case, special_case_g,
                    special_case_value, uncoded_delays, uncoded_objective, uncoded_user_delay)
from .greedy import GreedyTrace, greedy_place, marginal_value
from .lp import LPSolveError, build_coded_lp, build_coverage_lp, solve_coded, solve_lp
from .model import (CodedPlacement, ConnectivityGraph, DelayMatrix, FileLibrary,
                    InfeasiblePlacementError, Popularity, ProblemInstance, UncodedPlacement,
                    check_placement, helper_order, validate, zipf_popularity)
from .oracle import BudgetExceededError, brute_2dsc, build_hlp_from_2dsc, exact_uncoded
from .pipage import approximation_ratio, lp_pipage_solve, pipage_round
from .scenario import (CellGeometry, MobilityConfig, RadioConfig, Scenario,
                       average_download_rate, build_instance, calibrate_grid, calibrate_spacing,
                       grid_helpers, random_walk, sample_users)
from .experiments import ExperimentConfig, run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
