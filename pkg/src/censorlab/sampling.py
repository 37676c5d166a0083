"""Reverse-time samplers: unguided, reward-guided, and rejection baselines.

The reverse process is run as ancestral steps down a :class:`DiffusionGrid`:

    x_{k-1} = (x_k - (btilde_k / sqrt(1 - abar_k)) eps_hat(x_k, t_k))
              / sqrt(1 - btilde_k)  +  sqrt(btilde_k) z_k,

with the noise omitted on the final step.  Guidance modifies the error
vector before the step:

  * time-dependent:   eps_hat = eps - omega sqrt(1-abar) grad log r_t(x)
  * time-independent: eps_hat = eps - omega sqrt(1-abar) grad_x log r(xhat0),
    where xhat0 = (x - sqrt(1-abar) eps) / sqrt(abar) and the gradient
    either chains through the error network (exact_vjp) or freezes it
    (frozen_eps).

Backward refinement ascends log r from xhat0 and re-solves the error
vector; recurrence re-noises a completed step with the grid's own kernel
and repeats it.

Reward models are duck-typed: they expose ``time_dependent``,
``log_grad(x, t)``, ``log_value(x, t)`` and ``value0(x)``; see the reward
module for implementations.  The weight-scaled gradient is computed as
``sqrt1ma * (omega * grad)`` in exactly that order so that a K-member
ensemble of copies at weight omega and the single member at weight
K * omega produce bit-identical error vectors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .schedule import DiffusionGrid, NoiseSchedule

GUIDANCE_MODES = ("none", "time_dependent", "time_independent")
JACOBIAN_MODES = ("exact_vjp", "frozen_eps")


class SamplingDiverged(RuntimeError):
    """Raised when a chain state stops being finite."""


@dataclass(frozen=True)
class GuidanceConfig:
    """Behavior switches for censored sampling."""

    mode: str = "none"
    weight: float = 1.0
    backward_steps: int = 0
    backward_step_size: float = 2e-4
    recurrence: int = 1
    jacobian_mode: str = "exact_vjp"
    backward_every_repeat: bool = True

    def __post_init__(self):
        if self.mode not in GUIDANCE_MODES:
            raise ValueError(f"mode must be one of {GUIDANCE_MODES}")
        if self.jacobian_mode not in JACOBIAN_MODES:
            raise ValueError(f"jacobian_mode must be one of {JACOBIAN_MODES}")
        if self.weight < 0:
            raise ValueError("guidance weight must be >= 0")
        if self.recurrence < 1:
            raise ValueError("recurrence must be >= 1")
        if self.backward_steps < 0:
            raise ValueError("backward_steps must be >= 0")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "weight": self.weight,
            "backward_steps": self.backward_steps,
            "backward_step_size": self.backward_step_size,
            "recurrence": self.recurrence,
            "jacobian_mode": self.jacobian_mode,
            "backward_every_repeat": self.backward_every_repeat,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GuidanceConfig":
        return cls(**{k: d[k] for k in d if k in cls.__dataclass_fields__})


@dataclass
class SamplerOutput:
    samples: np.ndarray  # (n, d)
    seed: int | None
    steps_per_sample: int
    accepted: int | None = None
    presented: int | None = None
    truncated: bool = False

    @property
    def acceptance_ratio(self) -> float | None:
        if self.presented in (None, 0):
            return None
        return self.accepted / self.presented


# ----------------------------------------------------------------------
# error-network sources
# ----------------------------------------------------------------------


class AnalyticEps:
    """Error-network view of an exact mixture score: eps = -sqrt(1-a) score."""

    def __init__(self, world, schedule: NoiseSchedule):
        self.world = world
        self.schedule = schedule
        self.dim = world.dim

    def __call__(self, x, t, a_bar=None):
        a = self.schedule.alpha_bar(t) if a_bar is None else a_bar
        return -np.sqrt(1.0 - a) * self.world.score_t(x, t, self.schedule)

    def vjp(self, x, t, v, a_bar=None):
        """v^T (d eps / d x) via the exact Hessian of log p_t (symmetric)."""
        a = self.schedule.alpha_bar(t) if a_bar is None else a_bar
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        hess = self.world.score_jacobian_t(x, t, self.schedule)
        return -np.sqrt(1.0 - a) * np.einsum("nde,ne->nd", hess, v)


class NetEps:
    """Error network backed by a trained time-aware linear-head MLP."""

    def __init__(self, net):
        if net.head != "linear" or not net.time_feature:
            raise ValueError("error nets must be time-aware with a linear head")
        self.net = net
        self.dim = net.widths[-1]

    def __call__(self, x, t, a_bar=None):
        return self.net.forward(x, t)

    def vjp(self, x, t, v, a_bar=None):
        return self.net.vjp_input(x, t, v)


# ----------------------------------------------------------------------
# per-step guidance algebra
# ----------------------------------------------------------------------


def guided_eps_timedep(eps, x, t, reward, omega: float, a_bar: float):
    """eps - omega sqrt(1-abar) grad log r_t(x), gradients in log domain."""
    if omega == 0.0:
        return eps
    grad = reward.log_grad(x, t)
    return eps - np.sqrt(1.0 - a_bar) * (omega * grad)


def xhat0(eps_model, x, t, a_bar: float):
    """Posterior-mean denoised estimate (x - sqrt(1-abar) eps) / sqrt(abar)."""
    if a_bar < 1e-8:
        raise FloatingPointError(f"abar={a_bar:.3e} too small for denoising")
    eps = eps_model(x, t, a_bar=a_bar)
    return _xhat0_from(x, eps, a_bar)


def _xhat0_from(x, eps, a_bar: float):
    return (x - np.sqrt(1.0 - a_bar) * eps) / np.sqrt(a_bar)


def guided_eps_timeindep(
    eps_model,
    x,
    t,
    reward,
    omega: float,
    a_bar: float,
    jacobian_mode: str = "exact_vjp",
    eps=None,
):
    """Universal-style guidance through the denoised estimate.

    grad_x log r(xhat0(x)) is either chained through the error network
    (exact_vjp) or computed with the network frozen, which leaves the bare
    (1/sqrt(abar)) grad log r at xhat0.
    """
    if a_bar < 1e-8:
        raise FloatingPointError(f"abar={a_bar:.3e} too small for denoising")
    if eps is None:
        eps = eps_model(x, t, a_bar=a_bar)
    if omega == 0.0:
        return eps
    sq1ma = np.sqrt(1.0 - a_bar)
    xh = _xhat0_from(x, eps, a_bar)
    g0 = reward.log_grad(xh, 0.0)
    if jacobian_mode == "exact_vjp":
        jv = eps_model.vjp(x, t, g0, a_bar=a_bar)
        grad = (g0 - sq1ma * jv) / np.sqrt(a_bar)
    elif jacobian_mode == "frozen_eps":
        grad = g0 / np.sqrt(a_bar)
    else:
        raise ValueError(f"unknown jacobian mode {jacobian_mode!r}")
    return eps - sq1ma * (omega * grad)


def backward_refine(x_t, xhat0_fwd, reward, steps: int, step_size: float, a_bar: float):
    """Fixed-step gradient ascent on log r from xhat0, then re-solve eps.

    Returns (xhat0_bwd, eps_hat_bwd) with the reconstruction identity
    x_t = sqrt(abar) xhat0_bwd + sqrt(1-abar) eps_hat_bwd holding exactly.
    """
    xb = np.array(xhat0_fwd, dtype=float, copy=True)
    for _ in range(steps):
        xb = xb + step_size * reward.log_grad(xb, 0.0)
        if not np.all(np.isfinite(xb)):
            raise SamplingDiverged("backward ascent produced non-finite state")
    eps_bwd = (x_t - np.sqrt(a_bar) * xb) / np.sqrt(1.0 - a_bar)
    return xb, eps_bwd


def compute_eps_hat(eps_model, reward, config: GuidanceConfig, x, k: int, grid, *,
                    with_backward: bool = True):
    """Full guided error vector at grid step k (guidance + optional refine)."""
    t = grid.times[k]
    a = grid.abar[k]
    eps = eps_model(x, t, a_bar=a)
    if config.mode == "none":
        eps_hat = eps
    elif config.mode == "time_dependent":
        eps_hat = guided_eps_timedep(eps, x, t, reward, config.weight, a)
    else:
        eps_hat = guided_eps_timeindep(
            eps_model, x, t, reward, config.weight, a, config.jacobian_mode, eps=eps
        )
    if with_backward and config.backward_steps > 0 and reward is not None:
        xf = _xhat0_from(x, eps_hat, a)
        _, eps_hat = backward_refine(
            x, xf, reward, config.backward_steps, config.backward_step_size, a
        )
    return eps_hat


# ----------------------------------------------------------------------
# ancestral stepping
# ----------------------------------------------------------------------


def _ancestral_mean(x, eps_hat, k: int, grid):
    b = grid.btilde[k]
    a = grid.abar[k]
    return (x - (b / np.sqrt(1.0 - a)) * eps_hat) / np.sqrt(1.0 - b)


def recurrent_step(x, k: int, reverse_step, repeats: int, grid, rng):
    """Repeat a completed reverse step: step down, re-noise up, step again.

    Re-noising uses the grid's own kernel
    x_k = sqrt(1 - btilde_k) x_{k-1} + sqrt(btilde_k) z, so marginals are
    preserved for the unguided chain.  Returns the final repeat's state.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    b = grid.btilde[k]
    x_prev = None
    for r in range(repeats):
        x_prev = reverse_step(x, r)
        if r < repeats - 1:
            z = rng.standard_normal(x_prev.shape)
            x = np.sqrt(1.0 - b) * x_prev + np.sqrt(b) * z
    return x_prev


def _run_chain(eps_model, reward, config: GuidanceConfig, grid, n: int, rng,
               seed=None) -> SamplerOutput:
    d = eps_model.dim
    x = rng.standard_normal((n, d))
    last_repeat = config.recurrence - 1
    for k in range(grid.num_steps, 0, -1):

        def reverse_step(xk, repeat_idx, k=k):
            bwd = config.backward_every_repeat or repeat_idx == last_repeat
            eps_hat = compute_eps_hat(
                eps_model, reward, config, xk, k, grid, with_backward=bwd
            )
            mean = _ancestral_mean(xk, eps_hat, k, grid)
            if k > 1:
                return mean + np.sqrt(grid.btilde[k]) * rng.standard_normal(mean.shape)
            return mean

        if config.recurrence > 1:
            x = recurrent_step(x, k, reverse_step, config.recurrence, grid, rng)
        else:
            x = reverse_step(x, 0)
        if not np.all(np.isfinite(x)):
            raise SamplingDiverged(f"non-finite state at step k={k} (t={grid.times[k]:.4f})")
    return SamplerOutput(samples=x, seed=seed, steps_per_sample=grid.num_steps)


def sample_unguided(eps_model, grid: DiffusionGrid, n: int, rng, seed=None) -> SamplerOutput:
    """Plain ancestral sampling from X_T ~ N(0, I) down the grid."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _run_chain(eps_model, None, GuidanceConfig(mode="none"), grid, n, rng, seed)


def sample_censored(
    eps_model,
    reward,
    config: GuidanceConfig,
    grid: DiffusionGrid,
    n: int,
    rng,
    seed=None,
) -> SamplerOutput:
    """Guided ancestral sampling with per-step guidance, refine and recurrence."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if config.mode == "time_dependent" and not reward.time_dependent:
        raise ValueError("time_dependent guidance needs a time-dependent reward")
    if config.mode == "time_independent" and reward.time_dependent:
        raise ValueError("time_independent guidance needs a time-independent reward")
    return _run_chain(eps_model, reward, config, grid, n, rng, seed)


# ----------------------------------------------------------------------
# rejection baseline
# ----------------------------------------------------------------------


def rejection_sample(
    sample_fn,
    reward,
    threshold: float,
    n_target: int,
    rng,
    presented_cap: int | None = None,
    batch_size: int = 512,
    min_acceptance: float = 1e-3,
    seed=None,
) -> SamplerOutput:
    """Draw from an unguided sampler and keep samples with r(x) >= threshold.

    ``sample_fn(n, rng)`` produces points; ``reward.value0`` scores them
    (ensembles use their mean combine).  Stops at n_target accepted or at
    the presented cap; a cap hit with acceptance below ``min_acceptance``
    emits a warning and returns the partial output.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError("threshold must be in (0, 1)")
    if presented_cap is None:
        presented_cap = max(100 * n_target, 10_000)
    kept = []
    accepted = 0
    presented = 0
    while accepted < n_target and presented < presented_cap:
        m = min(batch_size, presented_cap - presented)
        pts = sample_fn(m, rng)
        presented += m
        vals = reward.value0(pts)
        sel = pts[vals >= threshold]
        if sel.shape[0]:
            kept.append(sel)
            accepted += sel.shape[0]
    samples = np.concatenate(kept, axis=0) if kept else np.empty((0, 2))
    truncated = accepted < n_target
    if truncated and accepted / max(presented, 1) < min_acceptance:
        warnings.warn(
            f"rejection acceptance {accepted}/{presented} below floor; partial output",
            RuntimeWarning,
        )
    return SamplerOutput(
        samples=samples[:n_target],
        seed=seed,
        steps_per_sample=0,
        accepted=accepted,
        presented=presented,
        truncated=truncated,
    )


# ----------------------------------------------------------------------
# drift fields (exact-censoring diagnostics)
# ----------------------------------------------------------------------


def reverse_drift(eps_model, x, t, schedule: NoiseSchedule, reward=None,
                  config: GuidanceConfig | None = None):
    """Reverse-SDE drift beta_t ((1/sqrt(1-abar)) eps_hat - x/2) at (x, t).

    With guidance the error vector is modified first; evaluated in
    score form so small t stays well-conditioned.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = float(schedule.alpha_bar(t))
    beta = float(schedule.beta(t))
    eps = eps_model(x, t, a_bar=a)
    # eps / sqrt(1-a) is minus the (guided) score; keep that form
    s = -eps / np.sqrt(1.0 - a)
    if config is not None and config.mode == "time_dependent" and config.weight:
        s = s + config.weight * reward.log_grad(x, t)
    elif config is not None and config.mode == "time_independent" and config.weight:
        eps_hat = guided_eps_timeindep(
            eps_model, x, t, reward, config.weight, a, config.jacobian_mode, eps=eps
        )
        s = -eps_hat / np.sqrt(1.0 - a)
    return beta * (-s - 0.5 * x)
