"""Collision-optimal access probability, the network upper bound and the
structural bracket ``(eta_L, eta_H)`` that contains every optimal policy level."""

from __future__ import annotations

import math
from typing import NamedTuple

from ..roots import bisect, bisect_log
from ..scenario import ScenarioChain
from ..utility_model import SolverTolerances, UtilityModel

_DEFAULT_TOL = SolverTolerances()


def x_star(model: UtilityModel, U: int, tol: SolverTolerances = _DEFAULT_TOL) -> float:
    """Maximizer of ``F(x) = U g(x) (1 - x)^(U-1)``; lies in ``(0, 1/U)`` for ``U >= 2``."""
    if U < 1:
        raise ValueError("U must be >= 1")
    if U == 1:
        return 1.0

    def f(x: float) -> float:
        return float(model._marginal(x)) * (1.0 - x) - (U - 1) * float(model.g(x))

    lo = 1e-300
    return bisect_log(f, lo, 1.0 / U, rtol=tol.eps_u)


def collision_free_utility(model: UtilityModel, x: float, U: int) -> float:
    """``F(x) = U g(x) (1 - x)^(U-1)``."""
    return U * float(model.g(x)) * (1.0 - x) ** (U - 1)


def upper_bound(model: UtilityModel, chain: ScenarioChain, U: int,
                tol: SolverTolerances = _DEFAULT_TOL) -> float:
    """Network-utility bound valid for every admissible symmetric policy."""
    xs = x_star(model, U, tol)
    pi = chain.stationary_distribution()
    return float(sum(pi[s] * collision_free_utility(model, min(xs, float(b)), U)
                     for s, b in enumerate(chain.beta)))


def lambda_max(model: UtilityModel, beta: float, U: int) -> float:
    """Initial upper end of the multiplier bracket."""
    cap = U * float(model.g(1.0 / U))
    if beta < 1.0:
        cap = min(cap, (U - 1) * float(model.g(beta)) / (1.0 - beta))
    return cap


class BoundPair(NamedTuple):
    low: float
    high: float
    degenerate: bool


def structural_bounds(model: UtilityModel, lam: float, beta: float,
                      tol: SolverTolerances = _DEFAULT_TOL) -> BoundPair:
    """Open interval ``(eta_L, eta_H)`` holding every level of the optimal policy.

    ``eta_L`` is the root on ``(0, min(x_lam, beta))`` of
    ``g(x) + (1 - x) g'(x) - lam - z(min(x_lam, beta)) / beta`` and ``eta_H`` the root on
    ``[min(x_lam, beta), x_lam]`` of ``g(x) - x g'(x) - z(min(x_lam, beta))``, where
    ``x_lam`` maximizes ``z(x) = g(x) - lam x``.
    """
    if lam < 0:
        raise ValueError("multiplier must be non-negative")
    if not 0.0 < beta <= 1.0:
        raise ValueError("structural bounds need a harvest rate in (0, 1]")
    x_lam = model.x_star_lambda(lam)
    m = min(x_lam, beta)
    if m <= 0.0:
        return BoundPair(0.0, 0.0, True)
    z_m = float(model.g(m)) - lam * m

    def low_eq(x: float) -> float:
        return float(model.g(x)) + (1.0 - x) * float(model._marginal(x)) - lam - z_m / beta

    if low_eq(m) >= 0.0:
        eta_l = m
    else:
        lo = m
        while low_eq(lo) <= 0.0:
            lo *= 1e-4
            if lo < 1e-300:
                return BoundPair(0.0, m, True)
        eta_l = bisect_log(low_eq, lo, m, rtol=tol.eps_u)

    if beta >= x_lam:
        eta_h = x_lam
    else:
        def high_eq(x: float) -> float:
            return -float(model.g(x)) + x * float(model._marginal(x)) + z_m

        eta_h = bisect(high_eq, beta, x_lam, tol=tol.eps_u * max(x_lam, 1e-300))
    degenerate = not eta_h - eta_l > 4 * tol.eps_u * eta_h
    return BoundPair(float(eta_l), float(eta_h), bool(degenerate))


def heuristic_alpha(x: float, beta: float) -> float:
    """Exponential gap rate of the heuristic in a network-limited scenario."""
    if beta >= 1.0:
        return math.inf
    return math.log(beta * (1.0 - x) / ((1.0 - beta) * x))
