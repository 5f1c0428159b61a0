"""Common scenario process driving the per-node Bernoulli energy arrivals."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

DENSE_SOLVE_MAX_STATES = 64


class ReducibleChainError(ValueError):
    pass


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = np.flatnonzero(adj[frontier].any(axis=0) & ~seen)
        seen[nxt] = True
        frontier = list(nxt)
    return seen


@dataclass(frozen=True, eq=False)
class ScenarioChain:
    """Irreducible Markov chain over scenarios with per-scenario harvest rate ``beta``."""

    transition: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.transition, dtype=float, ndmin=2)
        b = np.array(self.beta, dtype=float, ndmin=1)
        if p.shape[0] != p.shape[1]:
            raise ValueError("transition matrix must be square")
        if b.shape != (p.shape[0],):
            raise ValueError("beta must have one entry per scenario")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("transition rows must be non-negative and sum to 1")
        if np.any((b < 0) | (b > 1)):
            raise ValueError("harvest rates must lie in [0, 1]")
        adj = p > 0
        fwd = _reachable(adj, 0)
        bwd = _reachable(adj.T, 0)
        bad = np.flatnonzero(~(fwd & bwd))
        if bad.size:
            raise ReducibleChainError(
                f"scenario chain is reducible; states {bad.tolist()} do not communicate with state 0")
        p.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "beta", b)

    @classmethod
    def static(cls, beta: float) -> "ScenarioChain":
        return cls(np.ones((1, 1)), np.array([beta]))

    @property
    def n_states(self) -> int:
        return self.beta.shape[0]

    @cached_property
    def _pi(self) -> np.ndarray:
        n = self.n_states
        p = self.transition
        if n <= DENSE_SOLVE_MAX_STATES:
            a = p.T - np.eye(n)
            a[-1, :] = 1.0
            rhs = np.zeros(n)
            rhs[-1] = 1.0
            pi = np.linalg.solve(a, rhs)
        else:
            pi = np.full(n, 1.0 / n)
            lazy = 0.5 * (p + np.eye(n))  # aperiodic, same stationary law
            for _ in range(100_000):
                nxt = pi @ lazy
                if np.max(np.abs(nxt - pi)) < 1e-15:
                    pi = nxt
                    break
                pi = nxt
        pi = np.clip(pi, 0.0, None)
        pi = pi / pi.sum()
        pi.setflags(write=False)
        return pi

    def stationary_distribution(self) -> np.ndarray:
        return self._pi

    def average_eh_rate(self) -> float:
        return float(self._pi @ self.beta)

    def sample_path(self, rng: np.random.Generator, n: int, s0: int = 0) -> np.ndarray:
        """Scenario indices for ``n`` consecutive slots starting in ``s0``."""
        cum = np.cumsum(self.transition, axis=1)
        u = rng.random(n)
        path = np.empty(n, dtype=np.int64)
        s = s0
        for k in range(n):
            if k:
                s = min(int(np.searchsorted(cum[s], u[k], side="right")), self.n_states - 1)
            path[k] = s
        return path

    def to_dict(self) -> dict[str, Any]:
        return {"transition": self.transition.tolist(), "beta": self.beta.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScenarioChain":
        """``{"transition": [[...]], "beta": [...]}`` or the shorthand ``{"beta": 0.1}``."""
        beta = d["beta"]
        if "transition" not in d:
            if isinstance(beta, (list, tuple)):
                if len(beta) != 1:
                    raise ValueError("multi-scenario chains need a transition matrix")
                beta = beta[0]
            return cls.static(float(beta))
        return cls(np.asarray(d["transition"], dtype=float), np.asarray(beta, dtype=float))
