"""Monte Carlo regret curves and growth-rate fits.

Regret at horizon ``T`` is ``E int_0^T (X^learner)^2 - (X^oracle)^2 dt``.
Each replication ``r`` runs on stream ``(master_seed, r)`` with learner and
oracle sharing increments. Horizon-free learners (APAC, doubling, fixed
thresholds) make one run to the largest horizon and read the cumulative
integrals at every horizon; Explore-first depends on ``T`` through
``tau = sqrt(T)`` and is re-run per horizon.

Replications may execute on a thread pool. Results are stored by stream id
and reduced in sorted order, so the curve does not depend on worker count.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .learning import (
    DEFAULT_CLIP,
    apac_run,
    doubling_explore_first_run,
    explore_first_run,
    fixed_threshold_run,
    learning_length,
)
from .model import ModelParams
from .sde import SimConfig

CSV_HEADER = (
    "algorithm", "theta0", "theta1", "K", "tau_rule", "T",
    "mean_regret", "stderr", "n_reps", "dt", "master_seed",
)
DEFAULT_HORIZONS = tuple(float(2**j) for j in range(6, 13))
ALGORITHMS = ("oracle", "fixed", "explore_first", "doubling", "apac")


@dataclass(frozen=True)
class Algorithm:
    """An algorithm tag plus its hyperparameters.

    ``K`` is the APAC clip bound and ``z`` the level of the fixed-threshold
    baseline. Tags render as ``apac``, ``explore_first``, ``fixed:z=1.0``...
    """

    name: str
    K: float | None = None
    z: float | None = None

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.name!r}; expected one of {ALGORITHMS}")
        if self.name == "apac":
            if self.K is None:
                object.__setattr__(self, "K", DEFAULT_CLIP)
            if not self.K > 0:
                raise ValueError(f"APAC clip bound K must be positive, got {self.K!r}")
        if self.name == "fixed" and self.z is None:
            raise ValueError("the fixed-threshold baseline needs a level z")

    @property
    def tag(self) -> str:
        if self.name == "fixed":
            return f"fixed:z={self.z!r}"
        return self.name

    @property
    def tau_rule(self) -> str:
        return {"explore_first": "sqrt_T", "doubling": "sqrt_window"}.get(self.name, "")

    @classmethod
    def from_tag(cls, tag: str, K: float | None = None) -> Algorithm:
        if tag.startswith("fixed:z="):
            return cls("fixed", z=float(tag[len("fixed:z="):]))
        return cls(tag, K=K if tag == "apac" else None)


@dataclass
class RegretCurve:
    algorithm: Algorithm
    params: ModelParams
    horizons: list[float]
    mean_regret: list[float]
    stderr: list[float]
    n_reps: int
    dt: float
    master_seed: int
    excluded: list[float] = field(default_factory=list)

    def positive(self) -> RegretCurve:
        """Copy restricted to horizons with positive mean regret (what the log fits accept)."""
        keep = [i for i, r in enumerate(self.mean_regret) if r > 0]
        return RegretCurve(
            self.algorithm, self.params,
            [self.horizons[i] for i in keep],
            [self.mean_regret[i] for i in keep],
            [self.stderr[i] for i in keep],
            self.n_reps, self.dt, self.master_seed,
            excluded=[h for i, h in enumerate(self.horizons) if i not in keep],
        )


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    model: str


def default_workers() -> int:
    env = os.environ.get("BDL_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"BDL_THREADS must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def _replication(algorithm, params, horizons, x0, cfg) -> np.ndarray:
    T = horizons[-1]
    if algorithm.name == "explore_first":
        out = []
        for h in horizons:
            rec = explore_first_run(params, learning_length(h, cfg.dt), h, x0, cfg)
            out.append(rec.regret)
        return np.array(out)
    if algorithm.name == "apac":
        rec = apac_run(params, algorithm.K, T, x0, cfg, checkpoints=horizons)
    elif algorithm.name == "doubling":
        rec = doubling_explore_first_run(params, T, x0, cfg, checkpoints=horizons)
    else:
        z = params.delta if algorithm.name == "oracle" else algorithm.z
        rec = fixed_threshold_run(params, z, T, x0, cfg, checkpoints=horizons)
    return np.array([rec.regret_at(h) for h in horizons])


def aggregate(samples: Mapping[int, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over replications, reduced in sorted stream order."""
    stacked = np.stack([np.asarray(samples[k], dtype=float) for k in sorted(samples)])
    n = stacked.shape[0]
    mean = stacked.mean(axis=0)
    stderr = stacked.std(axis=0, ddof=1) / math.sqrt(n)
    return mean, stderr


def regret_samples(
    algorithm: Algorithm,
    params: ModelParams,
    horizons: Sequence[float],
    n_reps: int,
    master_seed: int,
    cfg: SimConfig,
    *,
    x0: float = 0.0,
    workers: int | None = None,
) -> dict[int, np.ndarray]:
    """Per-replication regret at every horizon, keyed by stream id."""
    horizons = [float(h) for h in horizons]
    for h in horizons:
        cfg.steps(h)
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must be strictly increasing")
    base = SimConfig(cfg.dt, master_seed, 0)
    jobs = range(n_reps)

    def one(r):
        return r, _replication(algorithm, params, horizons, x0, base.with_stream(r))

    workers = default_workers() if workers is None else workers
    if workers <= 1 or n_reps <= 1:
        results = map(one, jobs)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, jobs))
    return dict(results)


def estimate_regret(
    algorithm: Algorithm,
    params: ModelParams,
    horizons: Sequence[float] = DEFAULT_HORIZONS,
    n_reps: int = 200,
    master_seed: int = 0,
    cfg: SimConfig | None = None,
    *,
    x0: float = 0.0,
    workers: int | None = None,
) -> RegretCurve:
    if n_reps < 2:
        raise ValueError(f"n_reps must be at least 2, got {n_reps!r}")
    cfg = cfg or SimConfig()
    horizons = [float(h) for h in horizons]
    if not horizons:
        return RegretCurve(algorithm, params, [], [], [], n_reps, cfg.dt, master_seed)
    samples = regret_samples(
        algorithm, params, horizons, n_reps, master_seed, cfg, x0=x0, workers=workers
    )
    mean, stderr = aggregate(samples)
    return RegretCurve(
        algorithm, params, horizons, mean.tolist(), stderr.tolist(), n_reps, cfg.dt, master_seed
    )


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), min(1.0, max(0.0, r2))


def _fit_inputs(curve: RegretCurve) -> tuple[np.ndarray, np.ndarray]:
    T = np.asarray(curve.horizons, dtype=float)
    R = np.asarray(curve.mean_regret, dtype=float)
    if T.size < 3:
        raise ValueError(f"need at least 3 horizons to fit a rate, got {T.size}")
    if np.any(R <= 0):
        bad = T[R <= 0].tolist()
        raise ValueError(f"nonpositive mean regret at horizons {bad}; filter with curve.positive()")
    return T, R


def fit_power_rate(curve: RegretCurve) -> RateFit:
    """Least squares of ``log R`` on ``log T``; the slope is the growth exponent."""
    T, R = _fit_inputs(curve)
    slope, intercept, r2 = _ols(np.log(T), np.log(R))
    return RateFit(slope, intercept, r2, "power")


def fit_log_rate(curve: RegretCurve) -> RateFit:
    """Least squares of ``R`` on ``log T``."""
    T, R = _fit_inputs(curve)
    slope, intercept, r2 = _ols(np.log(T), R)
    return RateFit(slope, intercept, r2, "log-linear")


def fit_fixed_power(curve: RegretCurve, exponent: float = 0.5) -> RateFit:
    """Least squares of ``R`` on ``T**exponent``.

    Same response and same number of free parameters as :func:`fit_log_rate`,
    so the two ``r_squared`` values can be compared directly.
    """
    T, R = _fit_inputs(curve)
    slope, intercept, r2 = _ols(T**exponent, R)
    return RateFit(slope, intercept, r2, f"power-{exponent!r}")


def _fmt(v: float) -> str:
    return format(v, ".17g")


def export_curve(curve: RegretCurve, destination: str | os.PathLike) -> Path:
    path = Path(destination)
    K = curve.algorithm.K
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for T, m, s in zip(curve.horizons, curve.mean_regret, curve.stderr):
                w.writerow([
                    curve.algorithm.tag,
                    _fmt(curve.params.theta0),
                    _fmt(curve.params.theta1),
                    "" if K is None else _fmt(K),
                    curve.algorithm.tau_rule,
                    _fmt(T), _fmt(m), _fmt(s),
                    curve.n_reps, _fmt(curve.dt), curve.master_seed,
                ])
    except OSError as exc:
        raise OSError(f"cannot write regret curve to {path}: {exc}") from exc
    return path


def import_curve(source: str | os.PathLike, algorithm: Algorithm | None = None,
                 params: ModelParams | None = None) -> RegretCurve:
    """Read a curve written by :func:`export_curve`.

    A header-only file carries no metadata, so ``algorithm`` and ``params``
    must then be supplied.
    """
    path = Path(source)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise OSError(f"cannot read regret curve from {path}: {exc}") from exc
    if header is None or tuple(header) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {header!r}")
    if not rows:
        if algorithm is None or params is None:
            raise ValueError(f"{path}: empty curve; pass algorithm and params explicitly")
        return RegretCurve(algorithm, params, [], [], [], 0, math.nan, 0)
    rec = [dict(zip(CSV_HEADER, row)) for row in rows]
    first = rec[0]
    K = float(first["K"]) if first["K"] else None
    return RegretCurve(
        algorithm or Algorithm.from_tag(first["algorithm"], K),
        params or ModelParams(float(first["theta0"]), float(first["theta1"])),
        [float(r["T"]) for r in rec],
        [float(r["mean_regret"]) for r in rec],
        [float(r["stderr"]) for r in rec],
        int(first["n_reps"]),
        float(first["dt"]),
        int(first["master_seed"]),
    )
