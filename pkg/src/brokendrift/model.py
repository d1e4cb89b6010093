"""Closed-form quantities of the full-information follower problem.

The state follows ``dX = b dt + dW`` with the drift ``b`` restricted to
``[theta0, theta1]``. The optimal policy is a threshold (bang-bang) rule
and everything about it is available in closed form: the threshold, the
long-run average cost, the relative value function and the expected cost
accumulated until a drifted Brownian motion passes a lower level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class ModelParams:
    """Drift bounds ``theta0 < 0 < theta1`` of the controlled diffusion."""

    theta0: float
    theta1: float

    def __post_init__(self):
        for name in ("theta0", "theta1"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if not self.theta0 < 0.0 < self.theta1:
            raise ValueError(
                f"invariant theta0 < 0 < theta1 violated: "
                f"theta0={self.theta0!r}, theta1={self.theta1!r}"
            )
        object.__setattr__(self, "theta0", float(self.theta0))
        object.__setattr__(self, "theta1", float(self.theta1))

    @property
    def delta(self) -> float:
        return optimal_threshold(self)

    @property
    def eta(self) -> float:
        return ergodic_value(self)

    @property
    def delta_bar(self) -> float:
        return 0.5 * (1.0 / self.theta1 - 1.0 / self.theta0)

    def derived(self) -> DerivedConstants:
        return DerivedConstants(delta=self.delta, eta=self.eta, delta_bar=self.delta_bar)

    def reflected(self) -> ModelParams:
        """Parameters of the mirrored problem ``x -> -x``."""
        return ModelParams(-self.theta1, -self.theta0)


@dataclass(frozen=True)
class DerivedConstants:
    delta: float
    eta: float
    delta_bar: float


def optimal_threshold(params: ModelParams) -> float:
    return 1.0 / (2.0 * params.theta0) + 1.0 / (2.0 * params.theta1)


def ergodic_value(params: ModelParams) -> float:
    return 1.0 / (4.0 * params.theta0**2) + 1.0 / (4.0 * params.theta1**2)


def threshold_drift(params: ModelParams, z: float, x: float) -> float:
    """Drift of the threshold policy at level ``z``; the tie ``x == z`` steers up."""
    return params.theta0 if x > z else params.theta1


def _phi_branch(t0, t1, x, upper: bool):
    # Only field operations, so Fractions give exact values.
    eta = 1 / (4 * t0 * t0) + 1 / (4 * t1 * t1)
    if upper:
        return x * (eta / t0 - 1 / (2 * t0**3)) + x * x / (2 * t0 * t0) - x**3 / (3 * t0)
    const = (t0 - t1) * (t0 + t1) ** 3 / (24 * t0**4 * t1**4)
    return x * (eta / t1 - 1 / (2 * t1**3)) + x * x / (2 * t1 * t1) - x**3 / (3 * t1) + const


def _phi_generic(t0, t1, x):
    delta = 1 / (2 * t0) + 1 / (2 * t1)
    return _phi_branch(t0, t1, x, upper=x > delta)


def phi(params: ModelParams, x: float) -> float:
    """Relative value function solving the ergodic HJB equation together with ``eta``."""
    return float(_phi_generic(params.theta0, params.theta1, float(x)))


def hjb_residual(params: ModelParams, x: float, h: float = 1e-4) -> float:
    """HJB residual of ``phi`` with derivatives from central differences of step ``h``.

    The three evaluations of ``phi`` and the difference quotients are carried
    out in exact rational arithmetic, so what remains is the truncation error
    of the difference scheme (order ``h**2``), not cancellation noise.
    """
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h!r}")
    if abs(x - params.delta) <= h:
        raise ValueError(
            f"x={x!r} lies within h={h!r} of the switching point delta={params.delta!r}"
        )
    t0, t1 = Fraction(params.theta0), Fraction(params.theta1)
    xq, hq = Fraction(x), Fraction(h)
    lo, mid, hi = (_phi_generic(t0, t1, xq + s * hq) for s in (-1, 0, 1))
    d1 = (hi - lo) / (2 * hq)
    d2 = (hi - 2 * mid + lo) / (hq * hq)
    eta = 1 / (4 * t0 * t0) + 1 / (4 * t1 * t1)
    value = min(b * d1 for b in (t0, t1)) + d2 / 2 + xq * xq - eta
    return float(value)


def _g(x: float, rate: float) -> float:
    return x**3 / (3.0 * rate) + x**2 / (2.0 * rate**2) + x / (2.0 * rate**3)


def passage_cost(params: ModelParams, x: float, z: float) -> float:
    """Expected integral of ``X**2`` until the threshold-controlled path first reaches ``z``.

    For ``x >= z`` the path drifts down at ``theta0``. For ``x < z`` it drifts
    up at ``theta1``; that case is the mirror image ``x -> -x`` of the first.
    """
    if x >= z:
        rate = -params.theta0
        return _g(x, rate) - _g(z, rate)
    rate = params.theta1
    return _g(-x, rate) - _g(-z, rate)
