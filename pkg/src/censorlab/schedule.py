"""Variance-preserving forward diffusion and its discrete time grid.

The forward corruption process is the VP SDE

    dX = -(beta(t)/2) X dt + sqrt(beta(t)) dW,    t in [0, T],

with a linear rate schedule beta(t) = beta_min + (t/T)(beta_max - beta_min).
Its marginals are available in closed form:

    X_t = sqrt(a(t)) X_0 + sqrt(1 - a(t)) eps,    a(t) = exp(-int_0^t beta),

so a(t) = exp(-(beta_min t + (beta_max - beta_min) t^2 / (2T))) exactly, with
no quadrature.  Samplers work on a uniform discretization of [0, T] where the
per-step betas are defined through consecutive ratios of the discrete alphas,
making the product identity  abar_k = prod_{j<=k} (1 - btilde_j)  exact by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear variance-preserving rate schedule on [0, horizon]."""

    beta_min: float = 0.1
    beta_max: float = 20.0
    horizon: float = 1.0
    kind: str = "linear"

    def __post_init__(self):
        if self.kind != "linear":
            raise ValueError(f"unsupported schedule kind: {self.kind!r}")
        if self.beta_min <= 0 or self.beta_max <= 0:
            raise ValueError("beta_min and beta_max must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    def beta(self, t):
        """Instantaneous rate beta(t)."""
        t = np.asarray(t, dtype=float)
        self._check_time(t)
        return self.beta_min + (t / self.horizon) * (self.beta_max - self.beta_min)

    def alpha_bar(self, t):
        """Closed-form a(t) = exp(-int_0^t beta(s) ds), in (0, 1]."""
        t = np.asarray(t, dtype=float)
        self._check_time(t)
        integral = self.beta_min * t + (self.beta_max - self.beta_min) * t * t / (
            2.0 * self.horizon
        )
        return np.exp(-integral)

    def _check_time(self, t) -> None:
        if np.any(t < 0) or np.any(t > self.horizon):
            raise ValueError(f"time outside [0, {self.horizon}]")

    def to_dict(self) -> dict:
        return {
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        return cls(
            beta_min=float(d.get("beta_min", 0.1)),
            beta_max=float(d.get("beta_max", 20.0)),
            horizon=float(d.get("horizon", 1.0)),
        )


def alpha_bar(schedule: NoiseSchedule, t):
    """Module-level alias for ``schedule.alpha_bar``."""
    return schedule.alpha_bar(t)


def forward_noise(x0, t, eps, schedule: NoiseSchedule):
    """Noise x0 to time t: sqrt(a(t)) x0 + sqrt(1 - a(t)) eps."""
    x0 = np.asarray(x0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if x0.shape != eps.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape} vs eps {eps.shape}")
    a = schedule.alpha_bar(t)
    a = np.asarray(a, dtype=float)
    if a.ndim == 1 and x0.ndim == 2:
        a = a[:, None]
    return np.sqrt(a) * x0 + np.sqrt(1.0 - a) * eps


@dataclass(frozen=True)
class DiffusionGrid:
    """Uniform discretization of a schedule with exact product identity.

    times[k] = k T / N for k = 0..N, abar[k] = a(times[k]), and
    btilde[k] = 1 - abar[k] / abar[k-1] for k = 1..N (btilde[0] unused, 0).
    """

    schedule: NoiseSchedule
    num_steps: int
    times: np.ndarray = field(repr=False)
    abar: np.ndarray = field(repr=False)
    btilde: np.ndarray = field(repr=False)


def build_grid(schedule: NoiseSchedule, num_steps: int = 1000) -> DiffusionGrid:
    """Build the uniform N-step grid for a schedule.

    The per-step betas come from consecutive abar ratios so that
    prod_{j<=k}(1 - btilde_j) == abar_k holds exactly (no drift between the
    continuous and discrete views).
    """
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    times = np.linspace(0.0, schedule.horizon, num_steps + 1)
    abar = schedule.alpha_bar(times)
    btilde = np.zeros(num_steps + 1)
    btilde[1:] = 1.0 - abar[1:] / abar[:-1]
    return DiffusionGrid(
        schedule=schedule, num_steps=num_steps, times=times, abar=abar, btilde=btilde
    )


DEFAULT_SCHEDULE = NoiseSchedule()
DEFAULT_NUM_STEPS = 1000
