"""Data-driven threshold controllers.

All three learners exploit one fact: under a threshold policy at level ``z``
the long-run time average of the state is ``z - delta``, so ``z`` minus a
window average estimates the unknown optimal level ``delta``.

* Explore-first(tau): threshold 0 on ``[0, tau)``, estimate, then commit.
* Doubling: Explore-first restarted on dyadic windows with learning length
  ``sqrt(window length)``, so no horizon needs to be known in advance.
* APAC: dyadic episodes ``[0, 2), [2, 4), [4, 8), ...``; each episode is run
  with the current estimate, which is then updated from that episode's
  average and clipped to ``[-K, K]``.

Every run is coupled to the full-information oracle through a shared
increment stream, and the record carries both cost integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .model import ModelParams
from .sde import CoupledStepper, PathStats, SimConfig

DEFAULT_CLIP = 10.0


@dataclass(frozen=True)
class EstimatorInput:
    z: float
    window_average: float


@dataclass(frozen=True)
class EpisodeState:
    """APAC state at the start of episode ``k``."""

    k: int
    delta_hat: float
    K: float
    tau_k: float


@dataclass
class RunRecord:
    """Per-window trace of one coupled learner/oracle run on ``[0, T]``.

    ``thresholds[i]`` is the learner's level on ``windows[i]`` and
    ``stats[i]`` the learner's path statistics there. ``estimates`` lists the
    estimates in the order they were produced. ``checkpoints`` maps a time to
    the cumulative ``(learner, oracle)`` integrals of ``X^2`` up to it.
    """

    algorithm: str
    T: float
    windows: list[tuple[float, float]] = field(default_factory=list)
    thresholds: list[float] = field(default_factory=list)
    stats: list[PathStats] = field(default_factory=list)
    estimates: list[float] = field(default_factory=list)
    learner_int_x2: float = 0.0
    oracle_int_x2: float = 0.0
    checkpoints: dict[float, tuple[float, float]] = field(default_factory=dict)

    @property
    def regret(self) -> float:
        return self.learner_int_x2 - self.oracle_int_x2

    def regret_at(self, t: float) -> float:
        learner, oracle = self.checkpoints[t]
        return learner - oracle


def delta_estimate(z: float, window_average: float) -> float:
    return z - window_average


def clip(delta_hat: float, K: float) -> float:
    if not K > 0:
        raise ValueError(f"clip bound K must be positive, got {K!r}")
    if abs(delta_hat) <= K:
        return delta_hat
    return math.copysign(K, delta_hat)


def apac_episodes(T: float) -> list[tuple[float, float]]:
    """Episode windows ``[tau_k, tau_{k+1})`` covering ``[0, T]``; the last one is cut at T."""
    if T <= 0:
        raise ValueError(f"horizon T must be positive, got {T!r}")
    out = []
    start, k = 0.0, 0
    while start < T:
        end = float(2 ** (k + 1))
        out.append((start, min(end, T)))
        start, k = end, k + 1
    return out


class _Run:
    # Shared plumbing: a coupled stepper plus the record being filled.

    def __init__(self, name, params, T, x0, cfg, checkpoints, _diffusion):
        self.cfg = cfg
        self.n_total = cfg.steps(T)
        ticks = {cfg.steps(t): float(t) for t in checkpoints if t <= T}
        self._ticks = ticks
        self.stepper = CoupledStepper(
            params, x0, cfg, checkpoints=list(ticks), _diffusion=_diffusion
        )
        self.record = RunRecord(name, float(T))

    def window(self, z: float, n_steps: int) -> PathStats:
        if n_steps <= 0:
            raise ValueError("empty window")
        dt = self.cfg.dt
        start = self.stepper.step
        pair = self.stepper.advance(z, n_steps)
        self.record.windows.append((start * dt, (start + n_steps) * dt))
        self.record.thresholds.append(z)
        self.record.stats.append(pair.learner)
        return pair.learner

    def finish(self) -> RunRecord:
        s = self.stepper
        self.record.learner_int_x2 = s.learner_int_x2
        self.record.oracle_int_x2 = s.oracle_int_x2
        self.record.checkpoints = {self._ticks[n]: v for n, v in s.snapshots.items()}
        return self.record


def explore_first_run(
    params: ModelParams,
    tau: float,
    T: float,
    x0: float,
    cfg: SimConfig,
    *,
    checkpoints: Sequence[float] = (),
    _force_estimate: float | None = None,
    _diffusion: float = 1.0,
) -> RunRecord:
    """Explore with threshold 0 on ``[0, tau)``, then commit to the estimate on ``[tau, T]``."""
    if not 0 < tau <= T:
        raise ValueError(f"need 0 < tau <= T, got tau={tau!r}, T={T!r}")
    run = _Run("explore_first", params, T, x0, cfg, checkpoints, _diffusion)
    n_tau = cfg.steps(tau)
    if n_tau == 0:
        raise ValueError(f"tau={tau!r} is shorter than one step dt={cfg.dt!r}")
    explore = run.window(0.0, n_tau)
    delta_hat = delta_estimate(0.0, explore.int_x / (n_tau * cfg.dt))
    if _force_estimate is not None:
        delta_hat = _force_estimate
    run.record.estimates.append(delta_hat)
    if run.n_total > n_tau:
        run.window(delta_hat, run.n_total - n_tau)
    return run.finish()


def learning_length(window: float, dt: float) -> float:
    """``sqrt(window)`` rounded down to the grid, at least one step."""
    n = max(1, int(math.floor(math.sqrt(window) / dt + 1e-9)))
    return n * dt


def doubling_explore_first_run(
    params: ModelParams,
    T: float,
    x0: float,
    cfg: SimConfig,
    *,
    checkpoints: Sequence[float] = (),
    _diffusion: float = 1.0,
) -> RunRecord:
    """Explore-first restarted on the dyadic windows ``[0, 2), [2, 4), [4, 8), ...``.

    Each window of length ``L`` explores for ``sqrt(L)`` before committing;
    a window cut short by ``T`` keeps the learning length of its full size.
    """
    if T < 2:
        raise ValueError(f"doubling needs T >= 2, got {T!r}")
    run = _Run("doubling", params, T, x0, cfg, checkpoints, _diffusion)
    dt = cfg.dt
    for start, end in apac_episodes(T):
        full = (2.0 * start if start > 0 else 2.0) - start
        n_window = cfg.steps(end) - cfg.steps(start)
        n_explore = min(cfg.steps(learning_length(full, dt)), n_window)
        explore = run.window(0.0, n_explore)
        delta_hat = delta_estimate(0.0, explore.int_x / (n_explore * dt))
        run.record.estimates.append(delta_hat)
        if n_window > n_explore:
            run.window(delta_hat, n_window - n_explore)
    return run.finish()


def apac_run(
    params: ModelParams,
    K: float,
    T: float,
    x0: float,
    cfg: SimConfig,
    *,
    checkpoints: Sequence[float] = (),
    _diffusion: float = 1.0,
) -> RunRecord:
    """Adaptive position averaging with clipping over ``[0, T]``.

    ``record.estimates[k]`` is the level used on episode ``k``, followed by
    the update after the last complete episode. An episode truncated by ``T``
    produces no update.
    """
    if not K > 0:
        raise ValueError(f"clip bound K must be positive, got {K!r}")
    run = _Run("apac", params, T, x0, cfg, checkpoints, _diffusion)
    state = EpisodeState(k=0, delta_hat=0.0, K=K, tau_k=0.0)
    run.record.estimates.append(state.delta_hat)
    for start, end in apac_episodes(T):
        n = cfg.steps(end) - cfg.steps(start)
        stats = run.window(state.delta_hat, n)
        if end < 2 ** (state.k + 1):
            break
        updated = delta_estimate(state.delta_hat, stats.int_x / (n * cfg.dt))
        state = EpisodeState(state.k + 1, clip(updated, K), K, end)
        run.record.estimates.append(state.delta_hat)
    return run.finish()


def fixed_threshold_run(
    params: ModelParams,
    z: float,
    T: float,
    x0: float,
    cfg: SimConfig,
    *,
    checkpoints: Sequence[float] = (),
    _diffusion: float = 1.0,
) -> RunRecord:
    """Non-learning baseline: threshold ``z`` for the whole run (``z = delta`` is the oracle)."""
    run = _Run("fixed", params, T, x0, cfg, checkpoints, _diffusion)
    if run.n_total:
        run.window(z, run.n_total)
    return run.finish()
