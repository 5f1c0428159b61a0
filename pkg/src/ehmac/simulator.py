"""Slot-level Monte-Carlo simulation of the U-node collision network.

Per slot: the scenario advances, every node with a non-empty battery draws its
observation tail ``T ~ U(0, 1]`` and transmits iff ``T <= eta(E, S)``, the
channel delivers only if exactly one node transmitted and the outage draw
succeeds, then every node harvests ``B ~ Bernoulli(beta(S))`` and updates
``E' = min(E - Q + B, e_max)``.  A quantum harvested in slot ``k`` is usable
from slot ``k + 1`` on.

Each node owns an independent random stream and the scenario chain has its
own, all spawned from the master seed, so results are bit-reproducible and a
node's draws do not depend on the network size.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba
import numpy as np
from scipy import stats

from .chain import ChainSummary
from .policy import Policy
from .scenario import ScenarioChain
from .utility_model import UtilityModel

CHUNK_SLOTS = 1 << 16
TRACE_MAX_SLOTS = 100_000


@dataclass(frozen=True)
class SimConfig:
    U: int
    e_max: int
    K: int
    burn_in: int | None = None
    seed: int = 0
    batch_count: int = 20
    e0: int | Sequence[int] | None = None
    s0: int = 0
    debug: bool = False
    trace_path: str | None = None

    def __post_init__(self) -> None:
        if self.U < 1:
            raise ValueError("U must be >= 1")
        if self.e_max < 1:
            raise ValueError("e_max must be >= 1")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.K // 10)
        if not self.K > self.burn_in >= 0:
            raise ValueError("need K > burn_in >= 0")
        if self.batch_count < 2:
            raise ValueError("batch_count must be >= 2")
        if self.K - self.burn_in < self.batch_count:
            raise ValueError("measurement window shorter than the number of batches")
        if self.trace_path is not None and self.K > TRACE_MAX_SLOTS:
            raise ValueError(f"trace output is limited to K <= {TRACE_MAX_SLOTS}")

    @property
    def window(self) -> int:
        return self.K - self.burn_in

    def initial_energy(self) -> np.ndarray:
        if self.e0 is None:
            e = np.full(self.U, self.e_max)
        else:
            e = np.broadcast_to(np.asarray(self.e0, dtype=np.int64), (self.U,)).copy()
        if np.any((e < 0) | (e > self.e_max)):
            raise ValueError("initial energy must lie in [0, e_max]")
        return e.astype(np.int64)


@dataclass(eq=False)
class SimResult:
    R_hat: float
    per_node: np.ndarray
    ci_half_width: float
    P_hat: np.ndarray  # (S,) transmit frequency given scenario, pooled over nodes
    pi_hat: np.ndarray  # (S, e_max+1) battery occupancy given scenario
    collision_rate: float
    overflow_rate: float
    scenario_freq: np.ndarray
    window: int
    batch_means: np.ndarray
    P_hat_batch_sd: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pi_hat_batch_sd: np.ndarray = field(default_factory=lambda: np.zeros(0))
    node_slots: np.ndarray = field(default_factory=lambda: np.zeros(0))
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "R_hat": self.R_hat, "per_node": self.per_node.tolist(),
            "ci_half_width": self.ci_half_width, "P_hat": self.P_hat.tolist(),
            "pi_hat": self.pi_hat.tolist(), "collision_rate": self.collision_rate,
            "overflow_rate": self.overflow_rate, "scenario_freq": self.scenario_freq.tolist(),
            "window": self.window, "seed": self.seed,
        }


@numba.njit(cache=True)
def _scenario_path(cum, u, s_prev, first_is_initial):
    n = u.shape[0]
    out = np.empty(n, dtype=np.int64)
    s = s_prev
    n_states = cum.shape[0]
    for k in range(n):
        if not (first_is_initial and k == 0):
            s = 0
            while s < n_states - 1 and u[k] >= cum[s_prev, s]:
                s += 1
        out[k] = s
        s_prev = s
    return out


@numba.njit(cache=True)
def _run_chunk(eta, beta, draws, scen, batch, E, occ, txc, nslot, overflow, collide,
               sole, t_sole, o_sole, rec_E, rec_Q, debug):
    U = draws.shape[0]
    n = draws.shape[1]
    e_max = eta.shape[2] - 1
    recording = rec_E.shape[0] > 0
    for k in range(n):
        s = scen[k]
        b = batch[k]
        n_tx = 0
        who = -1
        for u in range(U):
            e = E[u]
            if debug and (e < 0 or e > e_max):
                raise RuntimeError("battery level left [0, e_max]")
            t = 1.0 - draws[u, k, 0]
            q = 1 if (e > 0 and t <= eta[u, s, e]) else 0
            if debug and q == 1 and e == 0:
                raise RuntimeError("transmission from an empty battery")
            if recording:
                rec_E[k, u] = e
                rec_Q[k, u] = q
            if q == 1:
                n_tx += 1
                who = u
            if b >= 0:
                occ[b, s, e] += 1
                txc[b, s] += q
                nslot[b, s] += 1
            h = 1 if draws[u, k, 1] < beta[s] else 0
            nxt = e - q + h
            if nxt > e_max:
                nxt = e_max
                if b >= 0:
                    overflow[b] += 1
            E[u] = nxt
        if n_tx == 1:
            sole[k] = who
            t_sole[k] = 1.0 - draws[who, k, 0]
            o_sole[k] = draws[who, k, 2]
        else:
            sole[k] = -1
            if n_tx > 1 and b >= 0:
                collide[b] += 1


def _policy_table(policies: Policy | Sequence[Policy], U: int, n_states: int) -> np.ndarray:
    if isinstance(policies, Policy):
        policies = [policies] * U
    if len(policies) != U:
        raise ValueError(f"expected {U} per-node policies, got {len(policies)}")
    e_max = policies[0].e_max
    for p in policies:
        p.require_admissible()
        if p.e_max != e_max or p.n_scenarios != n_states:
            raise ValueError("per-node policies must share e_max and the scenario count")
    return np.ascontiguousarray(np.stack([p.eta for p in policies]))


def _rng_streams(seed: int, U: int) -> tuple[list[np.random.Generator], np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(U + 1)
    return [np.random.default_rng(c) for c in children[:U]], np.random.default_rng(children[U])


def simulate(policies: Policy | Sequence[Policy], model: UtilityModel, chain: ScenarioChain,
             cfg: SimConfig) -> SimResult:
    """Estimate the network utility and occupancy statistics of a policy profile."""
    eta = _policy_table(policies, cfg.U, chain.n_states)
    if eta.shape[2] != cfg.e_max + 1:
        raise ValueError("policy e_max disagrees with the simulation config")
    if not 0 <= cfg.s0 < chain.n_states:
        raise ValueError("initial scenario out of range")
    node_rngs, scen_rng = _rng_streams(cfg.seed, cfg.U)
    beta = np.ascontiguousarray(chain.beta, dtype=float)
    cum = np.cumsum(chain.transition, axis=1)
    S, nb, e_max = chain.n_states, cfg.batch_count, cfg.e_max
    batch_len = cfg.window // nb

    E = cfg.initial_energy()
    occ = np.zeros((nb, S, e_max + 1), dtype=np.int64)
    txc = np.zeros((nb, S), dtype=np.int64)
    nslot = np.zeros((nb, S), dtype=np.int64)
    overflow = np.zeros(nb, dtype=np.int64)
    collide = np.zeros(nb, dtype=np.int64)
    reward_node = np.zeros((nb, cfg.U))

    rec = cfg.trace_path is not None
    trace_rows: list[list] = []
    s_prev = cfg.s0
    for start in range(0, cfg.K, CHUNK_SLOTS):
        n = min(CHUNK_SLOTS, cfg.K - start)
        k = np.arange(start, start + n)
        batch = np.where(k < cfg.burn_in, -1,
                         np.minimum((k - cfg.burn_in) // batch_len, nb - 1)).astype(np.int64)
        u_s = scen_rng.random(n)
        scen = (np.full(n, cfg.s0, dtype=np.int64) if S == 1
                else _scenario_path(cum, u_s, s_prev, start == 0))
        s_prev = int(scen[-1])
        draws = np.stack([r.random((n, 3)) for r in node_rngs])
        sole = np.empty(n, dtype=np.int64)
        t_sole = np.zeros(n)
        o_sole = np.zeros(n)
        rec_E = np.zeros((n if rec else 0, cfg.U), dtype=np.int64)
        rec_Q = np.zeros((n if rec else 0, cfg.U), dtype=np.int64)
        _run_chunk(eta, beta, draws, scen, batch, E, occ, txc, nslot, overflow, collide,
                   sole, t_sole, o_sole, rec_E, rec_Q, cfg.debug)

        one = sole >= 0
        delivered = np.zeros(n, dtype=bool)
        gain = np.zeros(n)
        if one.any():
            y = np.asarray(model.observation_from_tail(t_sole[one]), dtype=float)
            delivered[one] = o_sole[one] < 1.0 - np.asarray(model.outage(y), dtype=float)
            gain[one] = np.where(delivered[one], model.realized_utility(y), 0.0)
        hit = delivered & (batch >= 0)
        np.add.at(reward_node, (batch[hit], sole[hit]), gain[hit])
        if rec:
            trace_rows.extend(_trace_rows(start, scen, rec_E, rec_Q, delivered))

    if rec:
        _write_trace(cfg.trace_path, cfg.U, trace_rows)
    return _summarize(cfg, occ, txc, nslot, overflow, collide, reward_node)


def _trace_rows(start, scen, rec_E, rec_Q, delivered):
    for i in range(scen.shape[0]):
        ntx = int(rec_Q[i].sum())
        if ntx == 0:
            outcome = "idle"
        elif ntx > 1:
            outcome = "collision"
        else:
            outcome = "success" if delivered[i] else "outage"
        yield [start + i, int(scen[i]), *rec_E[i].tolist(), *rec_Q[i].tolist(), outcome]


def _write_trace(path, U, rows) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "scenario", *[f"E{u}" for u in range(U)],
                    *[f"Q{u}" for u in range(U)], "outcome"])
        w.writerows(rows)


def _summarize(cfg: SimConfig, occ, txc, nslot, overflow, collide, reward_node) -> SimResult:
    nb = cfg.batch_count
    slots_b = nslot.sum(axis=1) / cfg.U  # slots per batch
    per_node = reward_node.sum(axis=0) / cfg.window
    means = reward_node.sum(axis=1) / slots_b
    tq = stats.t.ppf(0.975, nb - 1)
    ci = float(tq * means.std(ddof=1) / np.sqrt(nb))

    node_slots = nslot.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        P_hat = np.where(node_slots > 0, txc.sum(axis=0) / node_slots, np.nan)
        pi_hat = occ.sum(axis=0) / node_slots[:, None]
        P_b = txc / nslot
        pi_b = occ / nslot[:, :, None]
    P_sd = np.nanstd(P_b, axis=0, ddof=1) / np.sqrt(nb)
    pi_sd = np.nanstd(pi_b, axis=0, ddof=1) / np.sqrt(nb)
    return SimResult(
        R_hat=float(per_node.sum()), per_node=per_node, ci_half_width=ci,
        P_hat=P_hat, pi_hat=pi_hat,
        collision_rate=float(collide.sum() / cfg.window),
        overflow_rate=float(overflow.sum() / (cfg.window * cfg.U)),
        scenario_freq=node_slots / (cfg.window * cfg.U), window=cfg.window,
        batch_means=means, P_hat_batch_sd=P_sd, pi_hat_batch_sd=pi_sd,
        node_slots=node_slots, seed=cfg.seed,
    )


@dataclass(eq=False)
class ChainCheckReport:
    pi_residual: np.ndarray
    pi_band: np.ndarray
    P_residual: np.ndarray
    P_band: np.ndarray

    @property
    def pi_ok(self) -> np.ndarray:
        return np.abs(self.pi_residual) <= self.pi_band

    @property
    def P_ok(self) -> np.ndarray:
        return np.abs(self.P_residual) <= self.P_band

    @property
    def passed(self) -> bool:
        return bool(self.pi_ok.all() and self.P_ok.all())

    def max_pi_residual(self) -> float:
        return float(np.max(np.abs(self.pi_residual)))


def empirical_chain_check(result: SimResult,
                          summaries: ChainSummary | Sequence[ChainSummary]) -> ChainCheckReport:
    """Compare simulated occupancy and transmit frequency with the analytical chain.

    Bands are three standard errors, taking the larger of the i.i.d. binomial
    error and the batch-means error (consecutive slots are correlated).
    """
    if result.window <= 0 or result.node_slots.size == 0 or result.node_slots.sum() == 0:
        raise ValueError("empty measurement window: nothing to compare")
    if isinstance(summaries, ChainSummary):
        summaries = [summaries]
    if len(summaries) != result.P_hat.shape[0]:
        raise ValueError("need one chain summary per scenario")
    pi = np.stack([c.pi for c in summaries])
    P = np.array([c.P for c in summaries])
    n = np.maximum(result.node_slots, 1)[:, None]
    pi_sd = np.maximum(np.sqrt(pi * (1 - pi) / n), result.pi_hat_batch_sd)
    P_sd = np.maximum(np.sqrt(P * (1 - P) / n[:, 0]), result.P_hat_batch_sd)
    return ChainCheckReport(result.pi_hat - pi, 3 * pi_sd, result.P_hat - P, 3 * P_sd)
