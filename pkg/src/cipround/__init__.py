"""Randomized rounding for column-sparse covering integer programs."""
from cipround.kernels import BACKEND
from cipround.model import (CipInstance, FractionalSolution, IntegralSolution, Metrics,
                            check_cover, compute_metrics, load_instance, dump_instance,
                            validate_instance)
from cipround.preprocess import normalize
from cipround.relaxation import RoundingParams, relax_round
from cipround.rounding import round_solution, quantize, multiplicity_cap
from cipround.policies import params_plain, params_eps, solve_plain, solve_eps, SolveReport
from cipround.kc import solve_kc, pinned_residual, kc_lp

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CipInstance", "FractionalSolution", "IntegralSolution", "Metrics",
    "check_cover", "compute_metrics", "load_instance", "dump_instance", "validate_instance",
    "normalize", "RoundingParams", "relax_round", "round_solution", "quantize",
    "multiplicity_cap", "params_plain", "params_eps", "solve_plain", "solve_eps",
    "SolveReport", "solve_kc", "pinned_residual", "kc_lp",
]
