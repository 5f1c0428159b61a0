"""Symmetric Nash equilibrium by bisection on the collision multiplier, plus
the brute-force globally optimal policy for ``e_max = 1`` and baseline evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from ..chain import functionals, network_utility
from ..policy import Policy, clip_interior
from ..scenario import ScenarioChain
from ..utility_model import SolverTolerances, UtilityModel
from .bounds import lambda_max, upper_bound
from .pia import ConvergenceError, PIAResult, pia

logger = logging.getLogger(__name__)

_DEFAULT_TOL = SolverTolerances()
GOP_GRID_POINTS = 10_000


@dataclass(eq=False)
class SolveReport:
    method: str
    policy: Policy
    R: float
    R_per_scenario: np.ndarray
    upper_bound: float
    P_bar: np.ndarray
    lambda_star: np.ndarray
    bisection_iterations: list[int] = field(default_factory=list)
    pia_sweeps: list[list[int]] = field(default_factory=list)
    bounds: list[tuple[float, float]] = field(default_factory=list)
    lambda_trace: list[list[tuple[float, float, float]]] = field(default_factory=list)
    converged: bool = True
    flags: list[str] = field(default_factory=list)

    @property
    def gap(self) -> float:
        """Relative distance to the upper bound."""
        if self.upper_bound <= 0:
            return 0.0
        return (self.upper_bound - self.R) / self.upper_bound

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "R": self.R,
            "R_per_scenario": self.R_per_scenario.tolist(),
            "upper_bound": self.upper_bound,
            "gap_to_ub": self.gap,
            "P_bar": self.P_bar.tolist(),
            "lambda_star": self.lambda_star.tolist(),
            "bisection_iterations": list(self.bisection_iterations),
            "pia_sweeps": [list(x) for x in self.pia_sweeps],
            "bounds": [list(b) for b in self.bounds],
            "converged": self.converged,
            "flags": list(self.flags),
            "policy": self.policy.to_dict(),
        }


@dataclass
class _ScenarioSolution:
    row: np.ndarray
    lam: float
    iterations: int = 0
    sweeps: list[int] = field(default_factory=list)
    bounds: tuple[float, float] = (np.nan, np.nan)
    trace: list[tuple[float, float, float]] = field(default_factory=list)
    converged: bool = True
    flags: list[str] = field(default_factory=list)


def _solve_scenario(model: UtilityModel, beta: float, U: int, e_max: int,
                    tol: SolverTolerances, bracket: tuple[float, float] | None) -> _ScenarioSolution:
    if beta <= 0.0:
        row = clip_interior(np.zeros(e_max + 1))
        return _ScenarioSolution(row, 0.0, flags=["no harvesting: transmission floored"])
    if U == 1:
        r = pia(model, 0.0, beta, e_max, tol)
        return _ScenarioSolution(r.eta, 0.0, 0, [r.sweeps], (r.bounds.low, r.bounds.high),
                                 flags=["degenerate bounds"] if r.bounds.degenerate else [])

    lo, hi = (0.0, lambda_max(model, beta, U)) if bracket is None else map(float, bracket)
    sol = _ScenarioSolution(np.zeros(e_max + 1), np.nan)
    last: PIAResult | None = None
    init = None
    while True:
        lam = 0.5 * (lo + hi)
        try:
            last = pia(model, lam, beta, e_max, tol, init=init)
        except ConvergenceError as exc:
            sol.converged = False
            sol.flags.append(f"policy iteration failed at lambda={lam!r}: {exc}")
            sol.row, sol.lam = clip_interior(exc.last_eta), lam
            return sol
        cs = functionals(last.eta, model, beta, lam, U, allow_degenerate=True, with_values=False)
        h = cs.Lambda - lam
        sol.trace.append((lam, cs.Lambda, h))
        sol.sweeps.append(last.sweeps)
        sol.iterations += 1
        if h >= 0:
            lo, hi = lam, min(hi, cs.Lambda)
        else:
            lo, hi = max(lo, cs.Lambda), lam
        if hi - lo < tol.eps_bm:
            break
        if sol.iterations >= tol.max_iterations:
            sol.converged = False
            sol.flags.append("multiplier bisection hit the iteration cap")
            break
    sol.row, sol.lam = last.eta, lam
    sol.bounds = (last.bounds.low, last.bounds.high)
    if last.bounds.degenerate:
        sol.flags.append("degenerate bounds")
    return sol


def sne(model: UtilityModel, chain: ScenarioChain, U: int, e_max: int,
        tol: SolverTolerances = _DEFAULT_TOL,
        bracket: tuple[float, float] | None = None) -> SolveReport:
    """Symmetric Nash equilibrium policy, one multiplier per scenario.

    ``bracket`` overrides the initial multiplier interval; it must contain the
    fixed point of ``Lambda(eta^(lam)) = lam``.
    """
    if U < 1:
        raise ValueError("U must be >= 1")
    sols = [_solve_scenario(model, float(b), U, e_max, tol, bracket) for b in chain.beta]
    policy = Policy(e_max, np.vstack([s.row for s in sols]))
    rep = evaluate_policy("sne", policy, model, chain, U, tol)
    rep.lambda_star = np.array([s.lam for s in sols])
    rep.bisection_iterations = [s.iterations for s in sols]
    rep.pia_sweeps = [s.sweeps for s in sols]
    rep.bounds = [s.bounds for s in sols]
    rep.lambda_trace = [s.trace for s in sols]
    rep.converged = all(s.converged for s in sols)
    rep.flags = [f"scenario {i}: {f}" for i, s in enumerate(sols) for f in s.flags]
    for f in rep.flags:
        logger.info(f)
    return rep


def evaluate_policy(method: str, policy: Policy, model: UtilityModel, chain: ScenarioChain,
                    U: int, tol: SolverTolerances = _DEFAULT_TOL) -> SolveReport:
    """Network utility, transmission rates and induced multiplier of a fixed policy."""
    R, Rs = network_utility(policy, model, chain, U)
    P = np.empty(chain.n_states)
    lam = np.empty(chain.n_states)
    for s, b in enumerate(chain.beta):
        cs = functionals(policy.row(s), model, float(b), 0.0, U, allow_degenerate=True,
                         with_values=False)
        P[s], lam[s] = cs.P, cs.Lambda
    return SolveReport(method, policy, R, Rs, upper_bound(model, chain, U, tol), P, lam,
                       flags=list(policy.notes))


def gop_objective(model: UtilityModel, beta: float, U: int, x):
    """Network utility of the ``e_max = 1`` policy transmitting w.p. ``x`` when charged."""
    x = np.asarray(x, dtype=float)
    pi1 = beta / (beta + (1.0 - beta) * x)
    return U * pi1 * np.asarray(model.g(x)) * (1.0 - pi1 * x) ** (U - 1)


def gop_emax1(model: UtilityModel, chain: ScenarioChain, U: int,
              tol: SolverTolerances = _DEFAULT_TOL,
              grid_points: int = GOP_GRID_POINTS) -> SolveReport:
    """Globally optimal symmetric policy for a one-unit battery.

    Dense grid on ``(0, 1]`` followed by golden-section refinement around the
    best grid point; the endpoint ``x = 1`` is always evaluated.
    """
    grid = np.linspace(1.0 / grid_points, 1.0, grid_points)
    best = np.empty(chain.n_states)
    for s, b in enumerate(chain.beta):
        b = float(b)
        if b <= 0.0:
            best[s] = 0.0
            continue
        vals = gop_objective(model, b, U, grid)
        i = int(np.argmax(vals))
        x, fx = grid[i], vals[i]
        if 0 < i < grid_points - 1:
            res = minimize_scalar(lambda t: -float(gop_objective(model, b, U, t)),
                                  bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
                                  tol=1e-12)
            if 0 < res.x <= 1 and -res.fun > fx:
                x, fx = float(res.x), -float(res.fun)
        if float(gop_objective(model, b, U, 1.0)) >= fx:
            x = 1.0
        best[s] = x
    policy = Policy(1, np.vstack([clip_interior(np.array([0.0, x])) for x in best]))
    return evaluate_policy("gop", policy, model, chain, U, tol)
