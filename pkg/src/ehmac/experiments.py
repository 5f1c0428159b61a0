"""Parameter sweeps over (U, beta, e_max, method) producing CSV tables and a JSON sidecar."""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .policy import ebp, nbp
from .scenario import ScenarioChain
from .simulator import SimConfig, simulate
from .solver import ConvergenceError, evaluate_policy, gop_emax1, heuristic, sne, upper_bound
from .utility_model import SolverTolerances, model_from_dict

logger = logging.getLogger(__name__)

METHODS = ("sne", "heuristic", "ebp", "nbp", "gop", "upper_bound")
CSV_COLUMNS = ("U", "beta", "e_max", "method", "R_analytic", "R_sim", "sim_ci", "lambda_star",
               "P_bar", "gap_to_ub", "seed", "status")
INV_U = "1/U"
PRESET_U = [2, 5, 10, 20, 50]
PRESET_BETA = [INV_U, 0.1, 0.01]

PRESETS: dict[str, dict[str, Any]] = {
    "fig2": {"U": PRESET_U, "beta": PRESET_BETA, "e_max": [1],
             "methods": ["sne", "heuristic", "ebp", "nbp", "gop"]},
    "fig3": {"U": PRESET_U, "beta": PRESET_BETA, "e_max": [10],
             "methods": ["sne", "heuristic", "ebp", "nbp", "upper_bound"]},
    "fig4": {"U": PRESET_U, "beta": PRESET_BETA, "e_max": [1, 10], "methods": ["sne"]},
}

DEFAULT_CONFIG: dict[str, Any] = {
    "model": {"kind": "exponential_perfect", "rho": 0.0},
    "U": [10], "beta": [0.1], "e_max": [10], "methods": ["sne"],
    "simulate": False,
    "sim": {"K": 1_000_000, "burn_in": None, "batch_count": 20},
    "seed": 0,
    "tolerances": {},
}


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, ln in enumerate(text.splitlines(), start=1):
        if needle in ln:
            return i
    return None


@dataclass
class ExperimentConfig:
    model: dict[str, Any]
    U: list[int]
    beta: list[Any]
    e_max: list[int]
    methods: list[str]
    chain: dict[str, Any] | None = None
    simulate: bool = False
    sim: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    tolerance_scale: float = 1.0
    name: str = "sweep"

    @classmethod
    def from_dict(cls, d: dict[str, Any], text: str = "", name: str = "sweep") -> "ExperimentConfig":
        merged = copy.deepcopy(DEFAULT_CONFIG)
        merged.update(d)
        known = set(DEFAULT_CONFIG) | {"chain", "tolerance_scale", "name", "preset"}
        for k in d:
            if k not in known:
                raise ConfigError(f"unknown key {k!r}", _line_of(text, k))

        def fail(key: str, msg: str):
            raise ConfigError(f"{key}: {msg}", _line_of(text, key))

        def as_list(key: str) -> list:
            v = merged[key]
            return list(v) if isinstance(v, (list, tuple)) else [v]

        try:
            model_from_dict(merged["model"])
        except (KeyError, ValueError, TypeError) as exc:
            fail("model", str(exc))
        U = as_list("U")
        if not U or any(not isinstance(u, int) or isinstance(u, bool) or u < 1 for u in U):
            fail("U", "entries must be integers >= 1")
        e_max = as_list("e_max")
        if not e_max or any(not isinstance(e, int) or isinstance(e, bool) or e < 1 for e in e_max):
            fail("e_max", "entries must be integers >= 1")
        beta = as_list("beta")
        for b in beta:
            if b == INV_U:
                continue
            if isinstance(b, bool) or not isinstance(b, (int, float)) or not 0.0 <= b <= 1.0:
                fail("beta", f"entry {b!r} must lie in [0, 1] or be the token {INV_U!r}")
        chain = merged.get("chain")
        if chain is not None:
            try:
                ScenarioChain.from_dict(chain)
            except (KeyError, ValueError, TypeError) as exc:
                fail("chain", str(exc))
            if "beta" in d:
                fail("beta", "give either a scenario chain or a beta list, not both")
            beta = ["chain"]
        methods = as_list("methods")
        for m in methods:
            if m not in METHODS:
                fail("methods", f"unknown method {m!r}; choose from {list(METHODS)}")
        if "gop" in methods and any(e != 1 for e in e_max):
            fail("methods", "gop is only defined for e_max = 1")
        sim = dict(DEFAULT_CONFIG["sim"], **(merged.get("sim") or {}))
        if merged["simulate"]:
            try:
                _sim_config(sim, 1, 1, 0)
            except (KeyError, ValueError, TypeError) as exc:
                fail("sim", str(exc))
        try:
            tol = SolverTolerances.from_dict(merged["tolerances"])
        except (ValueError, TypeError) as exc:
            fail("tolerances", str(exc))
        seed = merged["seed"]
        if not isinstance(seed, int) or seed < 0:
            fail("seed", "must be a non-negative integer")
        scale = merged.get("tolerance_scale", 1.0)
        if not isinstance(scale, (int, float)) or scale < 0:
            fail("tolerance_scale", "must be a non-negative number")
        return cls(merged["model"], U, beta, e_max, methods, chain, bool(merged["simulate"]), sim,
                   seed, tol, float(scale), str(merged.get("name", name)))

    def check_sim(self) -> None:
        try:
            _sim_config(self.sim, 1, 1, 0)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"sim: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, exc.lineno) from None
        if not isinstance(d, dict):
            raise ConfigError("top level must be a JSON object", 1)
        preset = d.get("preset")
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}", _line_of(text, "preset"))
            d = {**PRESETS[preset], **{k: v for k, v in d.items() if k != "preset"}}
        return cls.from_dict(d, text, name=Path(path).stem)

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> "ExperimentConfig":
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}")
        return cls.from_dict({**PRESETS[name], **overrides}, name=name)

    def to_dict(self) -> dict[str, Any]:
        return {"model": self.model, "chain": self.chain, "U": self.U, "beta": self.beta,
                "e_max": self.e_max, "methods": self.methods, "simulate": self.simulate,
                "sim": self.sim, "seed": self.seed, "tolerances": self.tolerances.to_dict(),
                "tolerance_scale": self.tolerance_scale}


def _sim_config(sim: dict[str, Any], U: int, e_max: int, seed: int) -> SimConfig:
    burn = sim.get("burn_in")
    return SimConfig(U=U, e_max=e_max, K=int(sim["K"]), burn_in=None if burn is None else int(burn),
                     batch_count=int(sim.get("batch_count", 20)), seed=seed)


def resolve_beta(b: Any, U: int) -> float:
    return 1.0 / U if b == INV_U else float(b)


def row_seed(master: int, U: int, e_max: int, method: str, beta_index: int) -> int:
    ss = np.random.SeedSequence([master, U, e_max, METHODS.index(method), beta_index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class Point:
    U: int
    beta_label: Any
    beta_index: int
    e_max: int


def _fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, (list, tuple, np.ndarray)):
        return ";".join(_fmt(v) for v in x)
    if isinstance(x, float):
        return "" if math.isnan(x) else f"{x:.12g}"
    return str(x)


def _solve_point(cfg: ExperimentConfig, pt: Point) -> list[dict[str, Any]]:
    model = model_from_dict(cfg.model)
    if cfg.chain is not None:
        chain = ScenarioChain.from_dict(cfg.chain)
    else:
        chain = ScenarioChain.static(resolve_beta(pt.beta_label, pt.U))
    tol = cfg.tolerances
    rows = []
    for method in cfg.methods:
        seed = row_seed(cfg.seed, pt.U, pt.e_max, method, pt.beta_index)
        t0 = time.perf_counter()
        row: dict[str, Any] = {"U": pt.U, "beta": pt.beta_label, "e_max": pt.e_max,
                               "method": method, "seed": seed, "status": "ok"}
        report = None
        try:
            if method == "sne":
                report = sne(model, chain, pt.U, pt.e_max, tol)
                if not report.converged:
                    row["status"] = "nonconverged"
            elif method == "heuristic":
                hr = heuristic(model, chain, pt.U, pt.e_max, tol)
                report = hr.solve
                row["sidecar_extra"] = {"x_star": hr.x_star, "regime": hr.regime,
                                        "lower_factor": hr.lower_factor, "R_up": hr.R_up}
            elif method == "ebp":
                report = evaluate_policy("ebp", ebp(pt.e_max, chain), model, chain, pt.U, tol)
            elif method == "nbp":
                report = evaluate_policy("nbp", nbp(pt.e_max, pt.U, chain.n_states), model, chain,
                                         pt.U, tol)
            elif method == "gop":
                report = gop_emax1(model, chain, pt.U, tol)
            elif method == "upper_bound":
                row["R_analytic"] = upper_bound(model, chain, pt.U, tol)
                row["gap_to_ub"] = 0.0
        except (ConvergenceError, ArithmeticError, ValueError) as exc:
            logger.warning("U=%s beta=%s e_max=%s %s failed: %s", pt.U, pt.beta_label, pt.e_max,
                           method, exc)
            row["status"] = f"error: {exc}"
        if report is not None:
            row.update(R_analytic=report.R, lambda_star=report.lambda_star.tolist(),
                       P_bar=report.P_bar.tolist(), gap_to_ub=report.gap)
            row["report"] = report.to_dict()
            if cfg.simulate:
                res = simulate(report.policy, model, chain, _sim_config(cfg.sim, pt.U, pt.e_max, seed))
                row.update(R_sim=res.R_hat, sim_ci=res.ci_half_width)
                row["sim"] = res.to_dict()
        row["runtime_ms"] = (time.perf_counter() - t0) * 1e3
        rows.append(row)
    return rows


def _job(args: tuple[ExperimentConfig, Point]) -> list[dict[str, Any]]:
    return _solve_point(*args)


def expand(cfg: ExperimentConfig) -> list[Point]:
    return [Point(U, b, i, e) for U in cfg.U for i, b in enumerate(cfg.beta) for e in cfg.e_max]


def run(cfg: ExperimentConfig, threads: int = 1) -> list[dict[str, Any]]:
    """All rows ordered by (U, beta, e_max, method) in config order."""
    points = expand(cfg)
    if threads > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_job, [(cfg, p) for p in points]))
    else:
        chunks = [_solve_point(cfg, p) for p in points]
    return [r for chunk in chunks for r in chunk]


def csv_text(rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_outputs(cfg: ExperimentConfig, rows: list[dict[str, Any]], out_dir: str | Path,
                  name: str | None = None) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = name or cfg.name
    csv_path, json_path = out / f"{name}.csv", out / f"{name}.json"
    csv_path.write_text(csv_text(rows))
    sidecar = {"generated_at": datetime.now(timezone.utc).isoformat(),
               "config": cfg.to_dict(), "columns": list(CSV_COLUMNS), "rows": rows}
    json_path.write_text(json.dumps(sidecar, indent=2, default=_json_default))
    return csv_path, json_path


def _json_default(o: Any):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")
