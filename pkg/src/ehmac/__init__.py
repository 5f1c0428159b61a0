"""Decentralized random access for energy-harvesting sensor networks."""

from .chain import functionals, network_utility, steady_state
from .policy import Policy, ebp, nbp
from .scenario import ScenarioChain
from .utility_model import ExponentialPerfect, SolverTolerances, Tabulated, UtilityModel, model_from_dict

__version__ = "0.1.0"

__all__ = [
    "ExponentialPerfect", "Policy", "ScenarioChain", "SolverTolerances", "Tabulated",
    "UtilityModel", "ebp", "functionals", "model_from_dict", "nbp", "network_utility",
    "steady_state",
]
