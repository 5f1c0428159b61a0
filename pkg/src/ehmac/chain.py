"""Steady-state analysis of a single node's battery chain within one scenario.

Given a harvest rate ``beta`` and a policy row ``eta[0..e_max]`` the battery
level is a birth-death chain: up with ``beta (1 - eta(e))``, down with
``(1 - beta) eta(e)``.  All quantities here are single-node; the network size
only enters through the collision multiplier ``Lambda``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .policy import InadmissiblePolicyError, Policy
from .scenario import ScenarioChain
from .utility_model import UtilityModel


class DegenerateChainError(ValueError):
    """Harvest rate of 0 or 1: the battery chain is not irreducible."""


def _check_row(eta: np.ndarray) -> None:
    if eta.ndim != 1 or eta.size < 2:
        raise InadmissiblePolicyError("policy row must list levels 0..e_max with e_max >= 1")
    if eta[0] != 0.0:
        raise InadmissiblePolicyError(f"eta(0) must be 0, got {eta[0]!r}")
    inner = eta[1:-1]
    if np.any(~((inner > 0) & (inner < 1))):
        raise InadmissiblePolicyError("interior levels must have eta in (0, 1)")
    if not 0.0 < eta[-1] <= 1.0:
        raise InadmissiblePolicyError("top level must have eta in (0, 1]")


def _log_weights(eta: np.ndarray, beta: float) -> np.ndarray:
    """Unnormalized ``log pi`` from the product-form balance solution, ``0 < beta < 1``."""
    e_max = eta.size - 1
    lb, l1b = np.log(beta), np.log1p(-beta)
    log_eta = np.log(eta[1:])
    log_xi = lb + np.log1p(-eta[1:-1]) - l1b - log_eta[:-1]  # xi(1..e_max-1)
    logpi = np.empty(e_max + 1)
    logpi[0] = 0.0
    logpi[1:] = np.concatenate(([0.0], np.cumsum(log_xi))) + lb - l1b - log_eta
    return logpi


def steady_state(eta, beta: float, allow_degenerate: bool = False) -> np.ndarray:
    """Stationary battery distribution from the product-form balance solution.

    Evaluated in the log domain so long batteries neither overflow nor underflow.
    With ``allow_degenerate`` a harvest rate of 1 (resp. 0) returns the limiting
    point mass on the full (resp. empty) battery instead of raising.
    """
    eta = np.asarray(eta, dtype=float)
    _check_row(eta)
    e_max = eta.size - 1
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"harvest rate must lie in [0, 1], got {beta}")
    if beta in (0.0, 1.0):
        if not allow_degenerate:
            raise DegenerateChainError(f"harvest rate {beta} makes the battery chain reducible")
        pi = np.zeros(e_max + 1)
        pi[e_max if beta == 1.0 else 0] = 1.0
        return pi
    logpi = _log_weights(eta, beta)
    return np.exp(logpi - logsumexp(logpi))


@dataclass(frozen=True, eq=False)
class ChainSummary:
    pi: np.ndarray
    G: float
    P: float
    Z_lambda: float
    Lambda: float
    D: np.ndarray
    lam: float
    beta: float


def _penalized(model: UtilityModel, eta: np.ndarray, lam: float) -> np.ndarray:
    return np.asarray(model.g(eta)) - lam * eta


def relative_values_recursive(eta, model: UtilityModel, beta: float, lam: float,
                              Z: float) -> np.ndarray:
    """``D(e)`` by the upward recursion obtained from the Poisson equation row ``e - 1``.

    Exact but it multiplies rounding errors by ``(1-beta) eta / (beta (1-eta))``
    per level; :func:`relative_values` is the well-conditioned route.
    """
    eta = np.asarray(eta, dtype=float)
    z = _penalized(model, eta, lam)
    D = np.zeros_like(eta)
    for e in range(1, eta.size):
        stay = 1.0 - eta[e - 1]
        if stay <= 0:
            raise InadmissiblePolicyError(f"eta({e - 1}) = 1 below the top level")
        D[e] = ((Z - z[e - 1]) + (1.0 - beta) * eta[e - 1] * D[e - 1]) / (beta * stay)
    return D


def relative_values(eta, model: UtilityModel, beta: float, lam: float,
                    Z: float | None = None) -> np.ndarray:
    """Differences ``D(e) = v(e) - v(e-1)`` of the relative value function, ``D(0) = 0``.

    Uses the cut identity of birth-death chains,
    ``pi(k) beta (1 - eta(k)) D(k+1) = sum_{f > k} pi(f) (z(f) - Z) = -sum_{f <= k} pi(f) (z(f) - Z)``,
    summing on whichever side of the cut carries less stationary mass.
    """
    eta = np.asarray(eta, dtype=float)
    if beta <= 0:
        raise DegenerateChainError("relative values need a positive harvest rate")
    if Z is None:
        pi = steady_state(eta, beta, allow_degenerate=True)
        Z = float(pi @ _penalized(model, eta, lam))
    if beta >= 1.0:
        return relative_values_recursive(eta, model, beta, lam, Z)
    _check_row(eta)
    if np.any(eta[:-1] >= 1.0):
        raise InadmissiblePolicyError("eta = 1 below the top level")
    z = _penalized(model, eta, lam)
    logpi = _log_weights(eta, beta)
    pi = np.exp(logpi - logsumexp(logpi))
    head_mass = np.cumsum(pi)
    D = np.zeros_like(eta)
    for k in range(eta.size - 1):
        if head_mass[k] <= 0.5:
            f = np.arange(k + 1)
            sign = -1.0
        else:
            f = np.arange(k + 1, eta.size)
            sign = 1.0
        ratio = np.exp(logpi[f] - logpi[k])
        D[k + 1] = sign * float(ratio @ (z[f] - Z)) / (beta * (1.0 - eta[k]))
    return D


def functionals(eta, model: UtilityModel, beta: float, lam: float = 0.0, U: int = 1,
                allow_degenerate: bool = False, with_values: bool = True) -> ChainSummary:
    """Steady-state reward ``G``, transmission rate ``P``, ``Z = G - lam P``, ``Lambda``, ``D``."""
    if lam < 0:
        raise ValueError("multiplier must be non-negative")
    if U < 1:
        raise ValueError("U must be >= 1")
    eta = np.asarray(eta, dtype=float)
    pi = steady_state(eta, beta, allow_degenerate)
    G = float(pi @ np.asarray(model.g(eta)))
    P = float(pi @ eta)
    Z = G - lam * P
    if U == 1:
        Lam = 0.0
    elif P >= 1.0:
        raise ZeroDivisionError("collision multiplier undefined when P = 1")
    else:
        Lam = (U - 1) * G / (1.0 - P)
    D = relative_values(eta, model, beta, lam, Z) if with_values and beta > 0 else np.zeros_like(eta)
    return ChainSummary(pi, G, P, Z, Lam, D, float(lam), float(beta))


def network_utility(policy: Policy, model: UtilityModel, chain: ScenarioChain,
                    U: int) -> tuple[float, np.ndarray]:
    """Long-run network utility of a symmetric policy and its per-scenario terms."""
    if policy.n_scenarios != chain.n_states:
        raise ValueError("policy and scenario chain disagree on the number of scenarios")
    Rs = np.empty(chain.n_states)
    for s in range(chain.n_states):
        cs = functionals(policy.row(s), model, float(chain.beta[s]), allow_degenerate=True,
                         with_values=False)
        Rs[s] = U * cs.G * (1.0 - cs.P) ** (U - 1)
    return float(chain.stationary_distribution() @ Rs), Rs


def dump_csv(path: str | Path, policy: Policy, model: UtilityModel, chain: ScenarioChain,
             lam: float = 0.0) -> None:
    """Per-level ``(e, pi, eta, D)`` for every scenario."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "e", "pi", "eta", "D"])
        for s in range(chain.n_states):
            cs = functionals(policy.row(s), model, float(chain.beta[s]), lam, allow_degenerate=True)
            for e in range(policy.e_max + 1):
                w.writerow([s, e, repr(float(cs.pi[e])), repr(float(policy.eta[s, e])),
                            repr(float(cs.D[e]))])
