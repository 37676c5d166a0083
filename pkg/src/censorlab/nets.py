"""Minimal differentiable MLP stack shared by reward and score models.

Networks are plain tanh MLPs over a flat float64 parameter vector, with a
sigmoid head for reward models (output strictly in (0, 1)) and a linear
head for score/error models.  Everything needed downstream is implemented
directly: batched forward, reverse-mode parameter gradients, input
gradients of the log-reward, input vector-Jacobian products, and an AdamW
loop with decoupled weight decay.  Guidance differentiates through these
networks, so the activation is smooth everywhere by construction.

Training is rigidly deterministic given a seed, and checkpoints round-trip
through JSON bit-exactly (Python float repr is shortest-round-trip).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

HEADS = ("sigmoid", "linear")


class TrainingDiverged(RuntimeError):
    """Raised when a training loss stops being finite."""


@dataclass
class TrainConfig:
    learning_rate: float = 3e-4
    weight_decay: float = 0.05
    iterations: int = 1000
    batch_size: int = 128
    alpha: float = 0.02
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    prob_clamp: float = 1e-7
    ema: float | None = None  # e.g. 0.9999; off by default

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must be in (0, 1]")

    def replace(self, **kw) -> "TrainConfig":
        d = asdict(self)
        d.update(kw)
        return TrainConfig(**d)


def _xavier_init(widths: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    parts = []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        parts.append(rng.uniform(-limit, limit, size=n_in * n_out))
        parts.append(np.zeros(n_out))
    return np.concatenate(parts)


class Mlp:
    """Tanh MLP with a flat parameter vector.

    widths includes input and output, e.g. (3, 64, 64, 1) for a
    time-aware reward net over 2-D points.  When ``time_feature`` is set,
    forward() expects a time argument and appends t / horizon as the last
    input coordinate.
    """

    def __init__(
        self,
        widths,
        head: str = "sigmoid",
        time_feature: bool = False,
        horizon: float = 1.0,
        params: np.ndarray | None = None,
        seed: int = 0,
    ):
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2:
            raise ValueError("need at least input and output widths")
        if head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}")
        self.widths = widths
        self.head = head
        self.activation = "tanh"
        self.time_feature = time_feature
        self.horizon = float(horizon)
        self.seed = int(seed)
        n = self.n_params
        if params is None:
            params = _xavier_init(widths, np.random.default_rng(seed))
        params = np.asarray(params, dtype=float)
        if params.shape != (n,):
            raise ValueError(f"expected {n} parameters, got {params.shape}")
        self.params = params

    @property
    def n_params(self) -> int:
        return sum(
            (w_in + 1) * w_out for w_in, w_out in zip(self.widths[:-1], self.widths[1:])
        )

    @property
    def n_points_in(self) -> int:
        """Width of the raw point input (time feature excluded)."""
        return self.widths[0] - (1 if self.time_feature else 0)

    def copy(self) -> "Mlp":
        return Mlp(
            self.widths,
            head=self.head,
            time_feature=self.time_feature,
            horizon=self.horizon,
            params=self.params.copy(),
            seed=self.seed,
        )

    # ------------------------------------------------------------------
    # parameter layout
    # ------------------------------------------------------------------

    def _layers(self, params: np.ndarray):
        """Yield (W (out, in), b (out,)) views into a flat vector."""
        off = 0
        for n_in, n_out in zip(self.widths[:-1], self.widths[1:]):
            w = params[off : off + n_in * n_out].reshape(n_in, n_out)
            off += n_in * n_out
            b = params[off : off + n_out]
            off += n_out
            yield w, b

    def _features(self, x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.n_points_in:
            raise ValueError(
                f"input width {x.shape[1]} != expected {self.n_points_in}"
            )
        if self.time_feature:
            if t is None:
                raise ValueError("this net takes a time argument")
            t = np.asarray(t, dtype=float)
            tcol = np.broadcast_to(np.atleast_1d(t), (x.shape[0],)) / self.horizon
            x = np.concatenate([x, tcol[:, None]], axis=1)
        return x

    # ------------------------------------------------------------------
    # forward / backward
    # ------------------------------------------------------------------

    def _forward_cache(self, feats: np.ndarray, params: np.ndarray | None = None):
        params = self.params if params is None else params
        acts = [feats]
        z = None
        n_layers = len(self.widths) - 1
        for i, (w, b) in enumerate(self._layers(params)):
            z = acts[-1] @ w + b
            if i < n_layers - 1:
                acts.append(np.tanh(z))
        return acts, z  # z is the pre-head output (B, out)

    def logits(self, x, t=None):
        """Pre-head output; (B,) when the output width is 1."""
        feats = self._features(x, t)
        _, z = self._forward_cache(feats)
        return z[:, 0] if self.widths[-1] == 1 else z

    def forward(self, x, t=None):
        """Head output: sigmoid in (0, 1) for reward nets, raw for linear."""
        z = self.logits(x, t)
        if self.head == "sigmoid":
            return _sigmoid(z)
        return z

    def _backward(self, acts, dz):
        """Backprop a pre-head cotangent dz (B, out) -> (flat grad, dx)."""
        n_layers = len(self.widths) - 1
        grads_w = [None] * n_layers
        grads_b = [None] * n_layers
        ws = [w for w, _ in self._layers(self.params)]
        delta = dz
        for i in range(n_layers - 1, -1, -1):
            grads_w[i] = acts[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            delta = delta @ ws[i].T
            if i > 0:
                delta = delta * (1.0 - acts[i] ** 2)
        flat = np.concatenate(
            [np.concatenate([gw.ravel(), gb]) for gw, gb in zip(grads_w, grads_b)]
        )
        dx = delta[:, : self.n_points_in]  # drop the time-feature column
        return flat, dx

    def vjp_input(self, x, t=None, v=None):
        """v^T (d head-output / d x) for each row.

        v is a per-row cotangent: scalar, (out,) shared across the batch,
        or (B, out).  For width-1 outputs a (B,) vector is also accepted.
        """
        feats = self._features(x, t)
        acts, z = self._forward_cache(feats)
        b, out_w = feats.shape[0], self.widths[-1]
        v = np.asarray(v, dtype=float)
        if v.ndim == 0:
            v = np.full((b, out_w), float(v))
        elif v.ndim == 1 and out_w == 1 and v.shape == (b,):
            v = v[:, None]
        elif v.ndim == 1 and v.shape == (out_w,):
            v = np.broadcast_to(v[None, :], (b, out_w))
        elif v.shape != (b, out_w):
            raise ValueError(f"cotangent shape {v.shape} incompatible with ({b}, {out_w})")
        if self.head == "sigmoid":
            p = _sigmoid(z)
            dz = v * p * (1.0 - p)
        else:
            dz = v
        _, dx = self._backward(acts, dz)
        return dx

    def grad_input(self, x, t=None):
        """grad_x log(output) for a sigmoid head, in the logit domain.

        d log sigmoid(z) / dz = sigmoid(-z), so the gradient never
        underflows even when the reward saturates.
        """
        if self.head != "sigmoid":
            raise ValueError("grad_input is defined for reward (sigmoid) heads")
        feats = self._features(x, t)
        acts, z = self._forward_cache(feats)
        dz = _sigmoid(-z)
        _, dx = self._backward(acts, dz)
        return dx

    def log_value(self, x, t=None):
        """log(output) for a sigmoid head: -softplus(-z), stable for any z."""
        if self.head != "sigmoid":
            raise ValueError("log_value is defined for reward (sigmoid) heads")
        z = self.logits(x, t)
        return -_softplus(-z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softplus(z):
    return np.logaddexp(0.0, z)


def forward(net: Mlp, x, t=None):
    return net.forward(x, t)


# ----------------------------------------------------------------------
# losses and gradients
# ----------------------------------------------------------------------


def bce_alpha(p, y, alpha: float, clamp: float = 1e-7):
    """Weighted binary cross entropy -alpha y log p - (1-y) log(1-p).

    Predictions are clamped to [clamp, 1-clamp] before the logs; raw
    values outside (0, 1) are a caller error.
    """
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("predictions must lie strictly in (0, 1)")
    p = np.clip(p, clamp, 1.0 - clamp)
    return -alpha * y * np.log(p) - (1.0 - y) * np.log(1.0 - p)


def bce_loss_and_grad(net: Mlp, x, y, t=None, alpha: float = 1.0, clamp: float = 1e-7):
    """Mean weighted-BCE over a batch and its flat parameter gradient.

    The gradient is taken in the logit domain
    (dL/dz = -alpha y sigmoid(-z) + (1-y) sigmoid(z)), which matches the
    unclamped loss exactly and stays finite when the head saturates.
    """
    feats = net._features(x, t)
    if feats.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    acts, z = net._forward_cache(feats)
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    p = _sigmoid(z)
    loss = float(np.mean(bce_alpha(p, y, alpha, clamp)))
    dz = (-alpha * y * _sigmoid(-z) + (1.0 - y) * p) / feats.shape[0]
    grad, _ = net._backward(acts, dz)
    return loss, grad


def mse_eps_loss_and_grad(net: Mlp, x, eps_target, t=None):
    """Mean ||net(x, t) - eps||^2 over a batch and its parameter gradient."""
    feats = net._features(x, t)
    if feats.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    acts, z = net._forward_cache(feats)
    resid = z - np.asarray(eps_target, dtype=float)
    loss = float(np.mean(np.sum(resid**2, axis=1)))
    dz = 2.0 * resid / feats.shape[0]
    grad, _ = net._backward(acts, dz)
    return loss, grad


def grad_params(net: Mlp, x, y, t=None, alpha: float = 1.0, clamp: float = 1e-7):
    """Flat gradient of the mean weighted-BCE loss over a batch."""
    _, grad = bce_loss_and_grad(net, x, y, t=t, alpha=alpha, clamp=clamp)
    return grad


# ----------------------------------------------------------------------
# AdamW training
# ----------------------------------------------------------------------


@dataclass
class TrainResult:
    net: Mlp
    loss_trace: np.ndarray


def _adamw(net: Mlp, config: TrainConfig, n_data: int, batch_grad, iterations: int):
    rng = np.random.default_rng(config.seed)
    params = net.params.copy()
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    ema = params.copy() if config.ema is not None else None
    trace = np.empty(iterations)
    for it in range(iterations):
        idx = rng.integers(0, n_data, size=min(config.batch_size, n_data))
        net.params = params
        loss, grad = batch_grad(net, idx)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss {loss} at iteration {it}")
        trace[it] = loss
        m = config.beta1 * m + (1.0 - config.beta1) * grad
        v = config.beta2 * v + (1.0 - config.beta2) * grad * grad
        mhat = m / (1.0 - config.beta1 ** (it + 1))
        vhat = v / (1.0 - config.beta2 ** (it + 1))
        params = params - config.learning_rate * (
            mhat / (np.sqrt(vhat) + config.adam_eps) + config.weight_decay * params
        )
        if ema is not None:
            ema = config.ema * ema + (1.0 - config.ema) * params
    net.params = ema if ema is not None else params
    return TrainResult(net=net, loss_trace=trace)


def train(
    net: Mlp,
    x,
    y,
    config: TrainConfig,
    t=None,
    iterations: int | None = None,
) -> TrainResult:
    """Train a reward net on labeled points with AdamW + weighted BCE.

    ``t`` is the per-example noise time for time-aware nets (None for
    time-independent ones).  Deterministic given config.seed.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y)
    t = None if t is None else np.asarray(t, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("dataset must be non-empty")
    iters = config.iterations if iterations is None else iterations

    def batch_grad(n, idx):
        tb = None if t is None else t[idx]
        return bce_loss_and_grad(
            n, x[idx], y[idx], t=tb, alpha=config.alpha, clamp=config.prob_clamp
        )

    return _adamw(net, config, x.shape[0], batch_grad, iters)


def train_score(net: Mlp, x0, grid, config: TrainConfig) -> TrainResult:
    """Train an error network on the denoising objective E||net(x_t,t) - eps||^2.

    Times are drawn uniformly from the grid's positive steps; the noised
    input is sqrt(abar_k) x0 + sqrt(1 - abar_k) eps.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if x0.shape[0] < 1000:
        raise ValueError("score training expects at least 1e3 samples")
    if not net.time_feature or net.head != "linear":
        raise ValueError("score nets must be time-aware with a linear head")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5C0]))

    def batch_grad(n, idx):
        k = rng.integers(1, grid.num_steps + 1, size=idx.shape[0])
        eps = rng.standard_normal((idx.shape[0], x0.shape[1]))
        a = grid.abar[k][:, None]
        xt = np.sqrt(a) * x0[idx] + np.sqrt(1.0 - a) * eps
        return mse_eps_loss_and_grad(n, xt, eps, t=grid.times[k])

    return _adamw(net, config, x0.shape[0], batch_grad, config.iterations)


# ----------------------------------------------------------------------
# checkpoints
# ----------------------------------------------------------------------


def save_checkpoint(net: Mlp, path, extra: dict | None = None) -> None:
    """Portable JSON checkpoint; float64 values round-trip bit-exactly."""
    record = {
        "widths": list(net.widths),
        "head": net.head,
        "activation": net.activation,
        "time_feature": net.time_feature,
        "horizon": net.horizon,
        "seed": net.seed,
        "params": net.params.tolist(),
    }
    if extra:
        record["extra"] = extra
    Path(path).write_text(json.dumps(record))


def load_checkpoint(path) -> Mlp:
    record = json.loads(Path(path).read_text())
    return Mlp(
        record["widths"],
        head=record["head"],
        time_feature=record["time_feature"],
        horizon=record["horizon"],
        params=np.array(record["params"], dtype=float),
        seed=record["seed"],
    )
