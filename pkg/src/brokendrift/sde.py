"""Euler-Maruyama simulation of Brownian motion with broken drift.

One step of the scheme is ``X[k+1] = X[k] + b_z(X[k]) dt + sqrt(dt) xi[k]``
with the drift frozen at the left endpoint, and time integrals are
left-endpoint Riemann sums over the same grid. The inner loops are numba
kernels; the Python layer owns the random stream, the window bookkeeping
and the checkpoints.

Learner/oracle pairs are driven by one increment sequence (common random
numbers), which is what makes a regret estimate -- a small difference of
two large integrals -- cheap to resolve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .model import ModelParams
from .streams import make_stream

_CHUNK = 1 << 18


@numba.njit(nogil=True, cache=True)
def _advance_single(xi, x, z, theta0, theta1, dt, sd):
    s1 = 0.0
    s2 = 0.0
    for k in range(xi.size):
        s1 += x
        s2 += x * x
        b = theta0 if x > z else theta1
        x = x + b * dt + sd * xi[k]
    return x, s1, s2


@numba.njit(nogil=True, cache=True)
def _advance_pair(xi, xl, xo, zl, zo, theta0, theta1, dt, sd):
    l1 = 0.0
    l2 = 0.0
    o1 = 0.0
    o2 = 0.0
    for k in range(xi.size):
        l1 += xl
        l2 += xl * xl
        o1 += xo
        o2 += xo * xo
        bl = theta0 if xl > zl else theta1
        bo = theta0 if xo > zo else theta1
        xl = xl + bl * dt + sd * xi[k]
        xo = xo + bo * dt + sd * xi[k]
    return xl, xo, l1, l2, o1, o2


@numba.njit(nogil=True, cache=True)
def _advance_passage(xi, x, z, theta0, dt, sd):
    # Returns the number of steps taken; stops before stepping once x <= z.
    s2 = 0.0
    for k in range(xi.size):
        if x <= z:
            return x, s2, k, True
        s2 += x * x
        x = x + theta0 * dt + sd * xi[k]
    return x, s2, xi.size, x <= z


@dataclass(frozen=True)
class SimConfig:
    """Grid step and the identity of the random stream."""

    dt: float = 1e-2
    master_seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive and finite, got {self.dt!r}")
        if not 0 <= self.master_seed < 1 << 64:
            raise ValueError(f"master_seed must fit in 64 unsigned bits, got {self.master_seed!r}")
        if self.stream_id < 0:
            raise ValueError(f"stream_id must be nonnegative, got {self.stream_id!r}")

    def steps(self, t: float) -> int:
        """Number of grid steps in a time span ``t``; ``t`` must be a multiple of dt."""
        n = round(t / self.dt)
        if n < 0 or abs(n * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t!r} is not a nonnegative multiple of dt={self.dt!r}")
        return int(n)

    def floor_steps(self, t: float) -> int:
        """Largest grid step count not exceeding ``t`` (tolerant of float fuzz)."""
        return int(math.floor(t / self.dt + 1e-9))

    def with_stream(self, stream_id: int) -> SimConfig:
        return SimConfig(self.dt, self.master_seed, stream_id)

    def stream(self) -> np.random.Generator:
        return make_stream(self.master_seed, self.stream_id)


@dataclass(frozen=True)
class PathStats:
    int_x: float
    int_x2: float
    terminal: float
    steps: int

    @property
    def mean_x(self) -> float:
        return self.int_x / self.steps if self.steps else math.nan


@dataclass(frozen=True)
class CoupledPathStats:
    learner: PathStats
    oracle: PathStats


def _check_finite(*values):
    if not all(math.isfinite(v) for v in values):
        raise FloatingPointError("simulated state became non-finite")


class _NoiseSource:
    def __init__(self, rng: np.random.Generator):
        self._rng = rng

    def chunks(self, n: int, chunk: int = _CHUNK):
        while n > 0:
            m = min(n, chunk)
            yield self._rng.standard_normal(m)
            n -= m


class PathStepper:
    """A single threshold-controlled path that can be advanced window by window."""

    def __init__(self, params: ModelParams, x0: float, cfg: SimConfig, *, _diffusion: float = 1.0):
        self.params = params
        self.cfg = cfg
        self.x = float(x0)
        self.step = 0
        self._noise = _NoiseSource(cfg.stream())
        self._sd = math.sqrt(cfg.dt) * _diffusion

    @property
    def time(self) -> float:
        return self.step * self.cfg.dt

    def advance(self, z: float, n_steps: int) -> PathStats:
        p, dt = self.params, self.cfg.dt
        s1 = s2 = 0.0
        x = self.x
        for xi in self._noise.chunks(n_steps):
            x, a, b = _advance_single(xi, x, z, p.theta0, p.theta1, dt, self._sd)
            _check_finite(x)
            s1 += a
            s2 += b
        self.x = x
        self.step += n_steps
        return PathStats(s1 * dt, s2 * dt, x, n_steps)


class CoupledStepper:
    """Learner and full-information oracle driven by the same increments.

    The oracle always uses ``oracle_threshold`` (the optimal switching level
    by default); the learner's level is chosen per call to :meth:`advance`.
    Cumulative ``int X^2`` of both paths is recorded at every step index in
    ``checkpoints`` that the run passes through.
    """

    def __init__(
        self,
        params: ModelParams,
        x0: float,
        cfg: SimConfig,
        *,
        oracle_threshold: float | None = None,
        checkpoints: Sequence[int] = (),
        _diffusion: float = 1.0,
    ):
        self.params = params
        self.cfg = cfg
        self.oracle_threshold = params.delta if oracle_threshold is None else oracle_threshold
        self.xl = self.xo = float(x0)
        self.step = 0
        self.learner_int_x = self.learner_int_x2 = 0.0
        self.oracle_int_x = self.oracle_int_x2 = 0.0
        self._checkpoints = sorted(set(int(c) for c in checkpoints))
        self.snapshots: dict[int, tuple[float, float]] = {}
        if self._checkpoints and self._checkpoints[0] == 0:
            self.snapshots[0] = (0.0, 0.0)
        self._noise = _NoiseSource(cfg.stream())
        self._sd = math.sqrt(cfg.dt) * _diffusion

    @property
    def time(self) -> float:
        return self.step * self.cfg.dt

    def advance(self, z: float, n_steps: int) -> CoupledPathStats:
        p, dt = self.params, self.cfg.dt
        end = self.step + n_steps
        cuts = [c for c in self._checkpoints if self.step < c <= end]
        if not cuts or cuts[-1] != end:
            cuts.append(end)
        l1 = l2 = o1 = o2 = 0.0
        xl, xo = self.xl, self.xo
        pos = self.step
        for cut in cuts:
            for xi in self._noise.chunks(cut - pos):
                xl, xo, a, b, c, d = _advance_pair(
                    xi, xl, xo, z, self.oracle_threshold, p.theta0, p.theta1, dt, self._sd
                )
                _check_finite(xl, xo)
                l1 += a
                l2 += b
                o1 += c
                o2 += d
            pos = cut
            if cut in self._checkpoints:
                self.snapshots[cut] = (self.learner_int_x2 + l2 * dt, self.oracle_int_x2 + o2 * dt)
        self.xl, self.xo, self.step = xl, xo, end
        self.learner_int_x += l1 * dt
        self.learner_int_x2 += l2 * dt
        self.oracle_int_x += o1 * dt
        self.oracle_int_x2 += o2 * dt
        return CoupledPathStats(
            PathStats(l1 * dt, l2 * dt, xl, n_steps), PathStats(o1 * dt, o2 * dt, xo, n_steps)
        )


def simulate_threshold_path(
    params: ModelParams,
    z: float,
    x0: float,
    t0: float,
    t1: float,
    cfg: SimConfig,
    *,
    _diffusion: float = 1.0,
) -> PathStats:
    """Simulate the threshold-``z`` path from ``x0`` over the window ``[t0, t1]``.

    The dynamics are time-homogeneous, so the window start only sets the
    length; the stream is consumed from its beginning.
    """
    if t1 < t0:
        raise ValueError(f"window end {t1!r} precedes start {t0!r}")
    n = cfg.steps(t1) - cfg.steps(t0)
    return PathStepper(params, x0, cfg, _diffusion=_diffusion).advance(z, n)


@dataclass(frozen=True)
class ThresholdSchedule:
    """Piecewise-constant learner threshold: ``levels[i]`` applies from ``starts[i]``."""

    starts: tuple[float, ...]
    levels: tuple[float, ...]

    def __post_init__(self):
        if len(self.starts) != len(self.levels) or not self.starts:
            raise ValueError("schedule needs matching, nonempty starts and levels")
        if self.starts[0] != 0:
            raise ValueError("schedule must start at time 0")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("schedule breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, z: float) -> ThresholdSchedule:
        return cls((0.0,), (float(z),))


def simulate_coupled(
    params: ModelParams,
    z_schedule: ThresholdSchedule | float,
    delta: float,
    x0: float,
    T: float,
    cfg: SimConfig,
    *,
    _diffusion: float = 1.0,
) -> CoupledPathStats:
    if not isinstance(z_schedule, ThresholdSchedule):
        z_schedule = ThresholdSchedule.constant(z_schedule)
    n_total = cfg.steps(T)
    bounds = [cfg.steps(s) for s in z_schedule.starts]
    stepper = CoupledStepper(params, x0, cfg, oracle_threshold=delta, _diffusion=_diffusion)
    for i, z in enumerate(z_schedule.levels):
        start = min(bounds[i], n_total)
        stop = min(bounds[i + 1], n_total) if i + 1 < len(bounds) else n_total
        if stop > start:
            stepper.advance(z, stop - start)
    return CoupledPathStats(
        PathStats(stepper.learner_int_x, stepper.learner_int_x2, stepper.xl, n_total),
        PathStats(stepper.oracle_int_x, stepper.oracle_int_x2, stepper.xo, n_total),
    )


def simulate_first_passage_cost(
    params: ModelParams,
    x: float,
    z: float,
    cfg: SimConfig,
    t_cap: float,
    *,
    _diffusion: float = 1.0,
) -> tuple[float, bool]:
    """Accumulated ``int X^2 dt`` of the ``theta0``-drifted path until it reaches ``z``.

    Crossing is detected on the grid only. Returns ``(cost, hit)``; ``hit``
    is False when ``t_cap`` elapses first.
    """
    if x < z:
        raise ValueError(f"start x={x!r} must not lie below the target level z={z!r}")
    n_cap = cfg.steps(t_cap)
    dt = cfg.dt
    sd = math.sqrt(dt) * _diffusion
    if x <= z:
        return 0.0, True
    rng = cfg.stream()
    cost = 0.0
    taken = 0
    chunk = 4096
    while taken < n_cap:
        m = min(chunk, n_cap - taken)
        x, s2, k, hit = _advance_passage(rng.standard_normal(m), x, z, params.theta0, dt, sd)
        _check_finite(x)
        cost += s2
        taken += k
        if hit:
            return cost * dt, True
        chunk = min(chunk * 2, _CHUNK)
    return cost * dt, False
