"""Closed-form constant-probability policy ``eta(e, s) = min(x*, beta_s)`` and its
performance sandwich ``factor * R_up <= R <= R_up``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..policy import constant_policy
from ..scenario import ScenarioChain
from ..utility_model import SolverTolerances, UtilityModel
from .bounds import collision_free_utility, heuristic_alpha, x_star
from .sne import SolveReport, evaluate_policy

_DEFAULT_TOL = SolverTolerances()

ENERGY_LIMITED = "energy-limited"
NETWORK_LIMITED = "network-limited"


@dataclass(eq=False)
class HeuristicReport:
    solve: SolveReport
    x_star: float
    eta_H: np.ndarray
    regime: list[str]
    alpha: np.ndarray
    lower_factor: float
    R_up: float
    R_up_per_scenario: np.ndarray

    @property
    def lower(self) -> float:
        return self.lower_factor * self.R_up

    def to_dict(self) -> dict:
        d = self.solve.to_dict()
        d.update({"x_star": self.x_star, "eta_H": self.eta_H.tolist(), "regime": self.regime,
                  "alpha": [None if math.isnan(a) else a for a in self.alpha],
                  "lower_factor": self.lower_factor, "lower": self.lower, "R_up": self.R_up})
        return d


def empty_probability(x: float, beta: float, e_max: int) -> float:
    """Probability of an empty battery under the constant policy ``x``."""
    r = beta * (1.0 - x) / ((1.0 - beta) * x)
    # pi(e) = pi(0) * beta / ((1-beta) x) * r^(e-1) for e >= 1
    if abs(r - 1.0) < 1e-15:
        tail = e_max
    else:
        tail = (r ** e_max - 1.0) / (r - 1.0)
    return 1.0 / (1.0 + beta / ((1.0 - beta) * x) * tail)


def sandwich_factor(x: float, chain: ScenarioChain, e_max: int) -> float:
    """``1 - sum_EL pi_S / e_max - sum_NL pi_S exp(-alpha e_max)``."""
    pi = chain.stationary_distribution()
    loss = 0.0
    for s, b in enumerate(chain.beta):
        b = float(b)
        if x >= b:
            loss += pi[s] / e_max
        else:
            loss += pi[s] * math.exp(-heuristic_alpha(x, b) * e_max)
    return 1.0 - loss


def heuristic(model: UtilityModel, chain: ScenarioChain, U: int, e_max: int,
              tol: SolverTolerances = _DEFAULT_TOL) -> HeuristicReport:
    xs = x_star(model, U, tol)
    eta_h = np.minimum(xs, chain.beta)
    regime = [ENERGY_LIMITED if xs >= b else NETWORK_LIMITED for b in chain.beta]
    alpha = np.array([np.nan if r == ENERGY_LIMITED else heuristic_alpha(xs, float(b))
                      for r, b in zip(regime, chain.beta)])
    notes = ()
    if np.any(chain.beta == 0):
        notes = ("zero harvest rate: transmission floored",)
    policy = constant_policy(e_max, eta_h, notes)
    rep = evaluate_policy("heuristic", policy, model, chain, U, tol)
    r_up_s = np.array([collision_free_utility(model, float(m), U) for m in eta_h])
    r_up = float(chain.stationary_distribution() @ r_up_s)
    return HeuristicReport(rep, xs, eta_h, regime, alpha, sandwich_factor(xs, chain, e_max),
                           r_up, r_up_s)
