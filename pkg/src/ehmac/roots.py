"""Bracketing root finders shared by every solver in the package.

All one-dimensional equations in the package (threshold inversion, marginal
utility inversion, structural policy bounds, the collision-optimal access
probability) are solved with plain bisection so that their accuracy is
controlled by a single tolerance.
"""

from __future__ import annotations

import math
from typing import Callable

from scipy import optimize

PROB_FLOOR = 1e-15


class BracketError(ValueError):
    """Raised when a bracket does not enclose a sign change."""


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12,
           max_iter: int = 500) -> float:
    """Root of ``f`` on ``[lo, hi]``; ``f(lo)`` and ``f(hi)`` must differ in sign."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]: f={flo!r}, {fhi!r}")
    return optimize.bisect(f, lo, hi, xtol=tol, maxiter=max_iter)


def bisect_log(f: Callable[[float], float], lo: float, hi: float, rtol: float = 1e-12,
               max_iter: int = 500) -> float:
    """Bisection on ``ln x`` for a positive root spanning many decades.

    ``rtol`` is the relative accuracy on the returned root.
    """
    if lo <= 0 or hi <= lo:
        raise ValueError("bisect_log needs 0 < lo < hi")
    t = bisect(lambda u: f(math.exp(u)), math.log(lo), math.log(hi), tol=rtol,
               max_iter=max_iter)
    return math.exp(t)


def expand_upper(f: Callable[[float], float], lo: float, hi: float, factor: float = 2.0,
                 max_expand: int = 200) -> float:
    """Grow ``hi`` geometrically until ``f(hi)`` has the opposite sign of ``f(lo)``."""
    flo = f(lo)
    for _ in range(max_expand):
        if (f(hi) > 0) != (flo > 0):
            return hi
        hi = lo + (hi - lo) * factor
    raise BracketError(f"no sign change found up to {hi!r}")
