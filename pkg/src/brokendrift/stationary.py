"""Stationary law of a threshold-controlled path.

Under the policy with switching level ``z`` the state is ergodic and its
invariant law is a two-sided exponential glued at ``z``: rate ``2*theta1``
to the left, ``2*|theta0|`` to the right, common height ``1/delta_bar`` at
the kink. Everything here is exact; the law doubles as the oracle for the
simulation tests and as an exact sampler for stationary starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams


@dataclass(frozen=True)
class StationaryLaw:
    params: ModelParams
    z: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.z):
            raise ValueError(f"threshold z must be finite, got {self.z!r}")

    @property
    def delta_bar(self) -> float:
        return self.params.delta_bar

    @property
    def left_mass(self) -> float:
        """Probability of ``X <= z``."""
        return 1.0 / (2.0 * self.params.theta1 * self.delta_bar)

    @property
    def right_mass(self) -> float:
        return 1.0 / (-2.0 * self.params.theta0 * self.delta_bar)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        rate = np.where(x > self.z, self.params.theta0, self.params.theta1)
        out = np.exp(2.0 * rate * (x - self.z)) / self.delta_bar
        return out[()] if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        t0, t1 = self.params.theta0, self.params.theta1
        # Clamp the exponents so the branch not taken cannot overflow.
        left = self.left_mass * np.exp(2.0 * t1 * np.minimum(x - self.z, 0.0))
        right = 1.0 - self.right_mass * np.exp(2.0 * t0 * np.maximum(x - self.z, 0.0))
        out = np.where(x <= self.z, left, right)
        return out[()] if out.ndim == 0 else out

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(~((u > 0.0) & (u < 1.0))):
            raise ValueError("quantile level must lie in the open interval (0, 1)")
        t0, t1 = self.params.theta0, self.params.theta1
        lm = self.left_mass
        left = self.z + np.log(np.minimum(u, lm) / lm) / (2.0 * t1)
        right = self.z + np.log(np.minimum(1.0 - u, self.right_mass) / self.right_mass) / (2.0 * t0)
        out = np.where(u <= lm, left, right)
        return out[()] if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        """Exact draws by inversion of the cdf."""
        u = rng.random(size)
        # Generator.random is on [0, 1); zero is the only value quantile rejects.
        u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
        return self.quantile(u)

    def mean(self) -> float:
        return stationary_mean(self)

    def second_moment(self) -> float:
        return stationary_second_moment(self)

    def support_width(self, floor: float = 1e-16) -> tuple[float, float]:
        """Interval outside of which the density is below ``floor``."""
        t0, t1 = self.params.theta0, self.params.theta1
        span = math.log(1.0 / (floor * self.delta_bar))
        return self.z - span / (2.0 * t1), self.z + span / (-2.0 * t0)


def stationary_mean(law: StationaryLaw) -> float:
    return law.z - law.params.delta


def stationary_second_moment(law: StationaryLaw) -> float:
    p = law.params
    z, delta = law.z, p.delta
    return z * z - 2.0 * delta * z + 2.0 * p.eta + 1.0 / (2.0 * p.theta0 * p.theta1)
