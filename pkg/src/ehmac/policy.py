"""Transmission-probability tables ``eta[s, e]`` and their admissibility rules."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .scenario import ScenarioChain
from .utility_model import UtilityModel

logger = logging.getLogger(__name__)

INTERIOR_CLIP = 1e-12


class InadmissiblePolicyError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    e: int
    s: int
    clause: str
    value: float

    def __str__(self) -> str:
        return f"(e={self.e}, s={self.s}) eta={self.value!r}: {self.clause}"


@dataclass(frozen=True, eq=False)
class Policy:
    """Per-scenario transmission probabilities for battery levels ``0..e_max``.

    ``eta`` has shape ``(n_scenarios, e_max + 1)``.  Admissible tables have
    ``eta[s, 0] = 0``, interior levels strictly inside ``(0, 1)`` and the top
    level in ``(0, 1]``.
    """

    e_max: int
    eta: np.ndarray
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        eta = np.array(self.eta, dtype=float, ndmin=2)
        if self.e_max < 1:
            raise ValueError("e_max must be >= 1")
        if eta.shape[1] != self.e_max + 1:
            raise ValueError(f"eta rows must have e_max+1={self.e_max + 1} entries, got {eta.shape[1]}")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @property
    def n_scenarios(self) -> int:
        return self.eta.shape[0]

    def row(self, s: int) -> np.ndarray:
        return self.eta[s]

    def validate(self) -> list[Violation]:
        out: list[Violation] = []
        for s, row in enumerate(self.eta):
            for e, x in enumerate(row):
                if e == 0:
                    if x != 0.0:
                        out.append(Violation(e, s, "empty battery must never transmit", float(x)))
                elif e < self.e_max:
                    if not 0.0 < x < 1.0:
                        clause = ("interior level with eta=0 leaves lower levels unvisited"
                                  if x <= 0 else
                                  "interior level with eta=1 under-utilizes the battery")
                        out.append(Violation(e, s, clause, float(x)))
                elif not 0.0 < x <= 1.0:
                    out.append(Violation(e, s, "top level must lie in (0, 1]", float(x)))
        return out

    def is_admissible(self) -> bool:
        return not self.validate()

    def require_admissible(self) -> None:
        bad = self.validate()
        if bad:
            raise InadmissiblePolicyError("; ".join(map(str, bad)))

    def to_thresholds(self, model: UtilityModel) -> "ThresholdTable":
        y = np.full(self.eta.shape, np.inf)
        pos = self.eta > 0
        y[pos] = model.threshold_of_probability(self.eta[pos])
        return ThresholdTable(y)

    def to_dict(self) -> dict[str, Any]:
        return {"e_max": self.e_max, "eta": self.eta.tolist()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Policy":
        return cls(int(d["e_max"]), np.asarray(d["eta"], dtype=float))


@dataclass(frozen=True, eq=False)
class ThresholdTable:
    """Censoring thresholds ``y_th[s, e]``; ``+inf`` means never transmit."""

    y_th: np.ndarray

    def to_policy(self, model: UtilityModel) -> Policy:
        eta = np.where(np.isinf(self.y_th), 0.0, model.tail(np.where(np.isinf(self.y_th), 0.0, self.y_th)))
        return Policy(self.y_th.shape[1] - 1, eta)

    def write_csv(self, path: str | Path, policy: Policy) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "e", "eta", "y_th"])
            for s in range(self.y_th.shape[0]):
                for e in range(self.y_th.shape[1]):
                    w.writerow([s, e, repr(float(policy.eta[s, e])), repr(float(self.y_th[s, e]))])


def clip_interior(row: np.ndarray, eps: float = INTERIOR_CLIP) -> np.ndarray:
    """Force a row into the admissible set without moving values at solver accuracy."""
    row = np.array(row, dtype=float)
    row[0] = 0.0
    row[1:-1] = np.clip(row[1:-1], eps, 1.0 - eps)
    row[-1] = np.clip(row[-1], eps, 1.0)
    return row


def constant_policy(e_max: int, values, notes: tuple[str, ...] = ()) -> Policy:
    """Policy transmitting with probability ``values[s]`` at every non-empty level."""
    values = np.atleast_1d(np.asarray(values, dtype=float))
    eta = np.repeat(values[:, None], e_max + 1, axis=1)
    eta = np.vstack([clip_interior(r) for r in eta])
    return Policy(e_max, eta, notes)


def ebp(e_max: int, chain: ScenarioChain) -> Policy:
    """Energy-balanced policy: transmit with the scenario harvest rate."""
    notes = ()
    if np.any(chain.beta == 0):
        idle = np.flatnonzero(chain.beta == 0).tolist()
        notes = (f"zero harvest rate in scenarios {idle}; eta floored at {INTERIOR_CLIP}",)
        logger.warning(notes[0])
    return constant_policy(e_max, chain.beta, notes)


def nbp(e_max: int, U: int, n_scenarios: int = 1) -> Policy:
    """Network-balanced policy: transmit with probability ``1/U``."""
    if U < 1:
        raise ValueError("network size U must be >= 1")
    return constant_policy(e_max, np.full(n_scenarios, 1.0 / U))
