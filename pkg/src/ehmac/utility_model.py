"""Packet-utility statistics reduced to the maps used by every solver.

A model exposes the observation tail ``P(Y >= y)``, the conditional mean
utility ``E[V | Y = y]`` and the channel outage probability ``rho(y)``.  From
these it derives

* ``threshold_of_probability(x)``: censoring threshold with ``P(Y >= y_th) = x``;
* ``expected_utility(y)``: ``Vbar(y) = E[1{no outage} V | Y = y]``;
* ``g(x)``: expected reward of reporting the top-``x`` fraction of packets;
* ``g_prime(x) = Vbar(y_th(x))``.

Functions accept scalars or numpy arrays and return the same shape.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Any, Callable, Union

import numpy as np
from scipy import integrate

from .roots import PROB_FLOOR, bisect, bisect_log, expand_upper

Outage = Union[float, Callable[[np.ndarray], np.ndarray]]


class DomainError(ValueError):
    """Argument outside the domain of a utility map."""


@dataclass(frozen=True)
class SolverTolerances:
    """Numerical accuracies used across the solvers.

    eps_u: root-finding accuracy on probabilities and thresholds.
    eps_pia: policy-iteration stop on the change of the penalized reward.
    eps_bm: width at which the multiplier bisection stops.
    """

    eps_u: float = 1e-12
    eps_pia: float = 1e-10
    eps_bm: float = 1e-9
    max_iterations: int = 200

    def __post_init__(self) -> None:
        for name in ("eps_u", "eps_pia", "eps_bm"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @classmethod
    def from_dict(cls, d: dict[str, Any] | None) -> "SolverTolerances":
        return cls(**(d or {}))

    def to_dict(self) -> dict[str, Any]:
        return {"eps_u": self.eps_u, "eps_pia": self.eps_pia, "eps_bm": self.eps_bm,
                "max_iterations": self.max_iterations}


def _arr(x) -> tuple[np.ndarray, bool]:
    a = np.asarray(x, dtype=float)
    return a, a.ndim == 0


def _out(a: np.ndarray, scalar: bool):
    return float(a) if scalar else a


class UtilityModel(abc.ABC):
    """Base class; subclasses provide the observation tail and ``E[V | Y]``.

    The generic implementations below only rely on :meth:`tail` and
    :meth:`conditional_utility` and solve every inversion by bisection.
    Concrete models override them with exact expressions where available.
    """

    kind: str = "abstract"

    def __init__(self, rho: Outage = 0.0, eps_u: float = 1e-12):
        if callable(rho):
            self._rho_fn = rho
            self._rho_const = None
        else:
            rho = float(rho)
            if not 0.0 <= rho < 1.0:
                raise DomainError(f"constant outage probability must lie in [0, 1), got {rho}")
            self._rho_fn = None
            self._rho_const = rho
        self.eps_u = eps_u

    # -- primitives -----------------------------------------------------
    @abc.abstractmethod
    def tail(self, y):
        """``P(Y >= y)``."""

    @abc.abstractmethod
    def conditional_utility(self, y):
        """``E[V | Y = y]`` before accounting for outage."""

    @property
    def rho_constant(self) -> float | None:
        return self._rho_const

    def outage(self, y):
        a, scalar = _arr(y)
        if self._rho_const is not None:
            return _out(np.full_like(a, self._rho_const), scalar)
        r = np.asarray(self._rho_fn(a), dtype=float)
        if np.any((r < 0) | (r > 1)):
            raise DomainError("outage callback returned values outside [0, 1]")
        return _out(np.broadcast_to(r, a.shape).copy(), scalar)

    # -- derived maps ---------------------------------------------------
    def expected_utility(self, y):
        a, scalar = _arr(y)
        if np.any(a < 0) or np.any(np.isnan(a)):
            raise DomainError("observation must be >= 0")
        v = (1.0 - np.asarray(self.outage(a))) * np.asarray(self.conditional_utility(a))
        return _out(np.asarray(v, dtype=float), scalar)

    def threshold_of_probability(self, x):
        a, scalar = _arr(x)
        if np.any(~((a > 0) & (a <= 1))):
            raise DomainError("transmission probability must lie in (0, 1]")
        return _out(self._threshold(a), scalar)

    def _threshold(self, a: np.ndarray) -> np.ndarray:
        out = np.empty_like(a)
        for i, x in np.ndenumerate(a):
            out[i] = self._threshold_scalar(float(x))
        return out

    def _threshold_scalar(self, x: float) -> float:
        if x >= 1.0:
            return 0.0
        f = lambda y: float(self.tail(y)) - x
        hi = expand_upper(f, 0.0, 1.0)
        return bisect(f, 0.0, hi, tol=self.eps_u * max(1.0, hi))

    def g(self, x):
        a, scalar = _arr(x)
        if np.any(~((a >= 0) & (a <= 1))):
            raise DomainError("g is defined on [0, 1]")
        return _out(self._g(a), scalar)

    def _g(self, a: np.ndarray) -> np.ndarray:
        # g(x) = int_0^x g'(t) dt, integrated in s = -ln t to remove the endpoint singularity
        out = np.zeros_like(a)
        for i, x in np.ndenumerate(a):
            if x <= 0:
                continue
            s0 = -math.log(x)
            # the integrand decays like e^{-s}; beyond s0 + 60 it is below double resolution
            val, _ = integrate.quad(lambda s: float(self._marginal(np.exp(-s))) * math.exp(-s),
                                    s0, s0 + 60.0, epsabs=1e-15 * x, epsrel=1e-11, limit=200)
            out[i] = val
        return out

    def g_prime(self, x):
        a, scalar = _arr(x)
        if np.any(~((a > 0) & (a < 1))):
            raise DomainError("g_prime is defined on the open interval (0, 1)")
        return _out(self._marginal(a), scalar)

    def _marginal(self, a: np.ndarray) -> np.ndarray:
        """Unchecked ``g'`` on ``(0, 1]``."""
        return np.asarray(self.expected_utility(self._threshold(np.asarray(a, dtype=float))))

    def inverse_g_prime(self, v):
        """Probability ``u`` with ``g'(u) = v``; values at or below ``g'(1)`` map to 1."""
        a, scalar = _arr(v)
        return _out(self._inverse_marginal(a), scalar)

    def _inverse_marginal(self, a: np.ndarray) -> np.ndarray:
        out = np.empty_like(a)
        g1 = float(self._marginal(np.array(1.0)))
        for i, v in np.ndenumerate(a):
            if v <= g1:
                out[i] = 1.0
                continue
            f = lambda x: float(self._marginal(np.array(x))) - v
            if f(PROB_FLOOR) <= 0:
                out[i] = PROB_FLOOR
                continue
            out[i] = bisect_log(f, PROB_FLOOR, 1.0, rtol=self.eps_u)
        return out

    def x_star_lambda(self, lam: float) -> float:
        """Maximizer of ``g(x) - lam * x`` over ``[0, 1]``."""
        if not lam >= 0:
            raise DomainError("multiplier must be non-negative")
        if lam == 0:
            return 1.0
        return float(self._inverse_marginal(np.array(float(lam))))

    def z(self, x, lam: float):
        """Penalized per-slot reward ``g(x) - lam * x``."""
        return self.g(x) - lam * np.asarray(x)

    # -- sampling ---------------------------------------------------------
    def observation_from_tail(self, t):
        """Observation whose tail probability is ``t``; maps U(0,1] to the law of Y."""
        return self._threshold(np.asarray(t, dtype=float))

    def realized_utility(self, y):
        """Utility credited on a successful delivery given observation ``y``."""
        return np.asarray(self.conditional_utility(y), dtype=float)

    @abc.abstractmethod
    def to_dict(self) -> dict[str, Any]:
        ...

    def _rho_dict(self) -> float:
        if self._rho_const is None:
            raise ValueError("a callable outage model cannot be serialized")
        return self._rho_const


class ExponentialPerfect(UtilityModel):
    """Unit-mean exponential utility observed without noise (``Y = V``).

    With zero outage this gives ``g(x) = x (1 - ln x)`` and ``g'(x) = -ln x``.
    """

    kind = "exponential_perfect"

    def tail(self, y):
        a, scalar = _arr(y)
        return _out(np.exp(-a), scalar)

    def conditional_utility(self, y):
        a, scalar = _arr(y)
        return _out(a.copy(), scalar)

    def _threshold(self, a):
        return -np.log(a)

    def _g(self, a):
        if self._rho_const is None:
            return super()._g(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(a > 0, a * (1.0 - np.log(np.where(a > 0, a, 1.0))), 0.0)
        return (1.0 - self._rho_const) * val

    def _marginal(self, a):
        y = -np.log(a)
        if self._rho_const is not None:
            return (1.0 - self._rho_const) * y
        return (1.0 - np.asarray(self.outage(y))) * y

    def _inverse_marginal(self, a):
        if self._rho_const is None:
            return super()._inverse_marginal(a)
        return np.where(a <= 0, 1.0, np.exp(-np.maximum(a, 0.0) / (1.0 - self._rho_const)))

    def to_dict(self):
        return {"kind": self.kind, "rho": self._rho_dict()}


class Tabulated(UtilityModel):
    """Utility statistics given on a grid of observation values.

    Each node carries ``y``, the tail ``P(Y >= y)`` and ``E[V | Y = y]``.  Both
    ``y`` and the conditional utility are interpolated linearly in the log-tail
    coordinate ``s = -ln P(Y >= y)`` and extended beyond the last node with the
    slope of the last segment (an exponential tail).  A grid sampled from an
    exponential law is therefore reproduced exactly, and ``g`` is integrated in
    closed form segment by segment.
    """

    kind = "tabulated"

    def __init__(self, y, tail, vbar, rho: Outage = 0.0, eps_u: float = 1e-12):
        super().__init__(rho, eps_u)
        y = np.asarray(y, dtype=float)
        tail = np.asarray(tail, dtype=float)
        vbar = np.asarray(vbar, dtype=float)
        if not (y.ndim == tail.ndim == vbar.ndim == 1 and len(y) == len(tail) == len(vbar)):
            raise DomainError("grid columns must be 1-D and of equal length")
        if len(y) < 2:
            raise DomainError("tabulated model needs at least two grid nodes")
        if y[0] != 0.0 or tail[0] != 1.0:
            raise DomainError("first grid node must be y=0 with tail=1")
        if np.any(np.diff(y) <= 0):
            raise DomainError("grid y must be strictly increasing")
        if np.any(np.diff(tail) >= 0) or tail[-1] <= 0:
            raise DomainError("grid tail must be strictly decreasing and positive")
        if np.any(np.diff(vbar) <= 0) or vbar[0] < 0:
            raise DomainError("grid conditional utility must be non-negative and strictly increasing")
        self._y, self._tail, self._m = y, tail, vbar
        self._s = -np.log(tail)
        self._y_slope = (y[-1] - y[-2]) / (self._s[-1] - self._s[-2])
        self._m_slope = (vbar[-1] - vbar[-2]) / (self._s[-1] - self._s[-2])
        self._seg_slope = np.diff(vbar) / np.diff(self._s)
        # H[j] = int_{s_j}^inf M(s) e^{-s} ds
        n = len(y)
        H = np.zeros(n)
        H[-1] = math.exp(-self._s[-1]) * (vbar[-1] + self._m_slope)
        for j in range(n - 2, -1, -1):
            b = self._seg_slope[j]
            H[j] = H[j + 1] + (math.exp(-self._s[j]) * (vbar[j] + b)
                               - math.exp(-self._s[j + 1]) * (vbar[j + 1] + b))
        self._H = H

    @staticmethod
    def _interp(xn, yn, slope, x):
        out = np.interp(x, xn, yn)
        right = x > xn[-1]
        return np.where(right, yn[-1] + slope * (x - xn[-1]), out)

    def _s_of_y(self, y):
        return self._interp(self._y, self._s, 1.0 / self._y_slope, y)

    def _y_of_s(self, s):
        return self._interp(self._s, self._y, self._y_slope, s)

    def _m_of_s(self, s):
        return self._interp(self._s, self._m, self._m_slope, s)

    def tail(self, y):
        a, scalar = _arr(y)
        return _out(np.exp(-self._s_of_y(np.maximum(a, 0.0))), scalar)

    def conditional_utility(self, y):
        a, scalar = _arr(y)
        return _out(self._m_of_s(self._s_of_y(np.maximum(a, 0.0))), scalar)

    def _threshold(self, a):
        return self._y_of_s(-np.log(a))

    def _g(self, a):
        if self._rho_const is None:
            return super()._g(a)
        out = np.zeros_like(a)
        pos = a > 0
        s = -np.log(a[pos])
        k = np.searchsorted(self._s, s, side="right") - 1
        last = k >= len(self._s) - 1
        slope = np.where(last, self._m_slope, self._seg_slope[np.minimum(k, len(self._s) - 2)])
        m = self._m_of_s(s)
        head = np.exp(-s) * (m + slope)
        kn = np.minimum(k + 1, len(self._s) - 1)
        rest = np.where(last, 0.0,
                        self._H[kn] - np.exp(-self._s[kn]) * (self._m[kn] + slope))
        out[pos] = head + rest
        return (1.0 - self._rho_const) * out

    def _marginal(self, a):
        s = -np.log(a)
        m = self._m_of_s(s)
        if self._rho_const is not None:
            return (1.0 - self._rho_const) * m
        return (1.0 - np.asarray(self.outage(self._y_of_s(s)))) * m

    def _inverse_marginal(self, a):
        if self._rho_const is None:
            return super()._inverse_marginal(a)
        target = np.maximum(a, 0.0) / (1.0 - self._rho_const)
        s = self._interp(self._m, self._s, 1.0 / self._m_slope, np.maximum(target, self._m[0]))
        return np.where(target <= self._m[0], 1.0, np.exp(-s))

    def to_dict(self):
        grid = [{"y": float(y), "tail": float(t), "vbar": float(m)}
                for y, t, m in zip(self._y, self._tail, self._m)]
        return {"kind": self.kind, "grid": grid, "rho": self._rho_dict()}


def model_from_dict(d: dict[str, Any]) -> UtilityModel:
    """Build a model from its JSON form.

    ``{"kind": "exponential_perfect", "rho": 0.0}`` or
    ``{"kind": "tabulated", "grid": [{"y":..., "tail":..., "vbar":...}, ...], "rho": 0.0}``.
    For tabulated grids ``vbar`` is ``E[V | Y = y]``; the outage factor is applied on top.
    """
    kind = d.get("kind")
    rho = d.get("rho", 0.0)
    if kind == ExponentialPerfect.kind:
        return ExponentialPerfect(rho)
    if kind == Tabulated.kind:
        grid = d.get("grid")
        if not grid:
            raise DomainError("tabulated model requires a non-empty 'grid'")
        return Tabulated([n["y"] for n in grid], [n["tail"] for n in grid],
                         [n["vbar"] for n in grid], rho)
    raise DomainError(f"unknown utility model kind {kind!r}")
