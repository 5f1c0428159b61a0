from .bounds import BoundPair, lambda_max, structural_bounds, upper_bound, x_star
from .heuristic import HeuristicReport, heuristic
from .pia import ConvergenceError, PIAResult, pia
from .sne import SolveReport, evaluate_policy, gop_emax1, sne

__all__ = [
    "BoundPair", "ConvergenceError", "HeuristicReport", "PIAResult", "SolveReport",
    "evaluate_policy", "gop_emax1", "heuristic", "lambda_max", "pia", "sne",
    "structural_bounds", "upper_bound", "x_star",
]
