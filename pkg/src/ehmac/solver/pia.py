"""Policy iteration for the single-node penalized problem ``max_eta G(eta) - lam P(eta)``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..chain import ChainSummary, functionals
from ..policy import clip_interior
from ..utility_model import SolverTolerances, UtilityModel
from .bounds import BoundPair, structural_bounds

_DEFAULT_TOL = SolverTolerances()


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, last_eta: np.ndarray, z_trace: list[float]):
        super().__init__(msg)
        self.last_eta = last_eta
        self.z_trace = z_trace


@dataclass(frozen=True, eq=False)
class PIAResult:
    eta: np.ndarray
    summary: ChainSummary
    bounds: BoundPair
    sweeps: int
    z_trace: list[float] = field(default_factory=list)
    step_trace: list[float] = field(default_factory=list)

    @property
    def Z(self) -> float:
        return self.summary.Z_lambda


def initial_row(bounds: BoundPair, e_max: int) -> np.ndarray:
    """Increasing row geometrically spaced strictly inside the structural bracket."""
    lo, hi = bounds.low, bounds.high
    frac = np.arange(1, e_max + 1) / (e_max + 1)
    row = np.zeros(e_max + 1)
    row[1:] = lo * (hi / lo) ** frac
    return row


def improvement_targets(D: np.ndarray, lam: float, beta: float) -> np.ndarray:
    """Marginal utilities each level's new transmission probability must match."""
    x = lam + (1.0 - beta) * D[1:]
    x[:-1] += beta * D[2:]
    return x


def pia(model: UtilityModel, lam: float, beta: float, e_max: int,
        tol: SolverTolerances = _DEFAULT_TOL, init: np.ndarray | None = None) -> PIAResult:
    """Optimal admissible row for multiplier ``lam`` in a scenario with harvest rate ``beta``.

    Stops when the penalized reward changes by less than ``tol.eps_pia`` between
    sweeps and returns the last improved policy.  The sup-norm policy step of
    every sweep is kept in ``step_trace`` for diagnostics only.
    """
    if e_max < 1:
        raise ValueError("e_max must be >= 1")
    bounds = structural_bounds(model, lam, beta, tol)
    if bounds.degenerate:
        row = clip_interior(np.r_[0.0, np.full(e_max, max(bounds.high, 1e-300))])
        s = functionals(row, model, beta, lam, allow_degenerate=True)
        return PIAResult(row, s, bounds, 0, [s.Z_lambda], [])

    nudge = 1e-12 * (bounds.high - bounds.low)
    lo, hi = bounds.low + nudge, bounds.high - nudge
    cur = initial_row(bounds, e_max) if init is None else np.array(init, dtype=float)
    cur = clip_interior(cur)
    cur_s = functionals(cur, model, beta, lam, allow_degenerate=True)
    z_trace = [cur_s.Z_lambda]
    steps: list[float] = []
    for sweep in range(1, tol.max_iterations + 1):
        targets = improvement_targets(cur_s.D, lam, beta)
        new = np.zeros(e_max + 1)
        new[1:] = np.clip(model.inverse_g_prime(targets), lo, hi)
        new_s = functionals(new, model, beta, lam, allow_degenerate=True)
        z_trace.append(new_s.Z_lambda)
        steps.append(float(np.max(np.abs(new - cur))))
        if abs(new_s.Z_lambda - cur_s.Z_lambda) < tol.eps_pia:
            return PIAResult(new, new_s, bounds, sweep, z_trace, steps)
        cur, cur_s = new, new_s
    raise ConvergenceError(f"policy iteration did not converge in {tol.max_iterations} sweeps",
                           cur, z_trace)
