"""Dynamics of the occupancy fraction p(t).

Two drivers are available: a deterministic ramp ``p' = p + C dt`` and an
Ornstein-Uhlenbeck process discretized with Euler-Maruyama,
``p' = p + theta (p0 - p) dt + sigma_p sqrt(dt) z``. Rates are per unit of
simulated time; with ``dt = 1`` they are rates per step. Every update is
clamped to [0, 1].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .rng import as_generator

__all__ = ["DriverSpec", "DriverState", "step_driver", "step_driver_batch", "reset_after_crash", "initial_state"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DriverSpec:
    kind: str  # "linear" or "ou"
    p0: float
    reset_value: float
    dt: float = 1.0
    C: float = 0.0
    theta: float = 0.0
    sigma_p: float = 0.0

    def __post_init__(self):
        problems = []
        if self.kind not in ("linear", "ou"):
            problems.append(f"unknown driver kind {self.kind!r}")
        if not 0 < self.p0 < 1:
            problems.append(f"p0 must lie in (0, 1), got {self.p0}")
        if not 0 < self.reset_value < 1:
            problems.append(f"reset_value must lie in (0, 1), got {self.reset_value}")
        if not self.dt > 0:
            problems.append(f"dt must be positive, got {self.dt}")
        for name in ("C", "theta", "sigma_p"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be non-negative")
        if problems:
            raise DomainError("; ".join(problems))

    @classmethod
    def linear(cls, p0: float, C: float, dt: float = 1.0, reset_value: float | None = None):
        return cls("linear", p0, p0 if reset_value is None else reset_value, dt, C=C)

    @classmethod
    def ou(cls, p0: float, theta: float, sigma_p: float, dt: float = 1.0,
           reset_value: float | None = None):
        return cls("ou", p0, p0 if reset_value is None else reset_value, dt,
                   theta=theta, sigma_p=sigma_p)

    def stationary_variance(self) -> float:
        """Variance of the continuous OU process, sigma_p**2 / (2 theta)."""
        if self.kind != "ou" or self.theta == 0:
            return math.inf
        return self.sigma_p**2 / (2 * self.theta)


@dataclass(frozen=True)
class DriverState:
    p: float
    t: float = 0.0
    clamps: int = 0  # running count of updates clipped to [0, 1]


def initial_state(spec: DriverSpec) -> DriverState:
    return DriverState(spec.p0, 0.0, 0)


def step_driver(state: DriverState, spec: DriverSpec, seed=None) -> DriverState:
    if spec.kind == "linear":
        p = state.p + spec.C * spec.dt
    else:
        z = as_generator(seed).standard_normal()
        p = state.p + spec.theta * (spec.p0 - state.p) * spec.dt + spec.sigma_p * math.sqrt(spec.dt) * z
    clamps = state.clamps
    if p < 0.0 or p > 1.0:
        log.warning("occupancy fraction %.6g clamped to [0, 1] at t=%.6g", p, state.t + spec.dt)
        p = min(max(p, 0.0), 1.0)
        clamps += 1
    return DriverState(p, state.t + spec.dt, clamps)


def reset_after_crash(state: DriverState, spec: DriverSpec) -> DriverState:
    return replace(state, p=spec.reset_value)


def step_driver_batch(p: np.ndarray, spec: DriverSpec, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`step_driver` over many replicas (clamped, not logged)."""
    if spec.kind == "linear":
        p = p + spec.C * spec.dt
    else:
        z = rng.standard_normal(p.shape)
        p = p + spec.theta * (spec.p0 - p) * spec.dt + spec.sigma_p * math.sqrt(spec.dt) * z
    return np.clip(p, 0.0, 1.0)
