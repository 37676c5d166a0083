"""Reward models from feedback: datasets, ensembles, and the imitation loop.

Labels are binary (1 = benign / keep, 0 = malign / censor).  A labeled
buffer is append-only across feedback rounds; every presented sample is
labeled (it costs annotator time) but only the balanced per-round quota is
marked ``kept`` and used for training.

Time-dependent reward models are trained on forward-noised copies of the
labeled points with the time appended as a normalized input feature;
time-independent ones train on the clean points.  The ensemble trains K
models on the shared malign set plus per-member bootstrap resamples of the
benign pool, combines them as a product for guidance (their log-gradients
add) and as a mean for rejection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nets
from .nets import Mlp, TrainConfig
from .sampling import GuidanceConfig, sample_censored, sample_unguided
from .schedule import DiffusionGrid

MALIGN, BENIGN = 0, 1


class AnnotationAborted(RuntimeError):
    """An annotator failed mid-round; the buffer so far is preserved."""


# ----------------------------------------------------------------------
# feedback buffer
# ----------------------------------------------------------------------


@dataclass
class FeedbackRecord:
    x: np.ndarray
    y: int
    round: int
    source: str
    elapsed_label_seconds: float
    kept: bool = True

    def to_json(self) -> str:
        return json.dumps(
            {
                "x": [float(v) for v in self.x],
                "y": int(self.y),
                "round": int(self.round),
                "source": self.source,
                "elapsed_label_seconds": float(self.elapsed_label_seconds),
                "kept": bool(self.kept),
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "FeedbackRecord":
        d = json.loads(line)
        return cls(
            x=np.asarray(d["x"], dtype=float),
            y=int(d["y"]),
            round=int(d["round"]),
            source=d["source"],
            elapsed_label_seconds=float(d["elapsed_label_seconds"]),
            kept=bool(d.get("kept", True)),
        )


class FeedbackDataset:
    """Append-only buffer of labeled points across feedback rounds."""

    def __init__(self, records: list[FeedbackRecord] | None = None):
        self._records: list[FeedbackRecord] = list(records or [])

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    @property
    def records(self) -> tuple[FeedbackRecord, ...]:
        return tuple(self._records)

    def append(self, record: FeedbackRecord) -> None:
        self._records.append(record)

    def counts(self, kept_only: bool = False):
        """(n_malign, n_benign) over the buffer."""
        recs = [r for r in self._records if r.kept or not kept_only]
        n_m = sum(1 for r in recs if r.y == MALIGN)
        return n_m, len(recs) - n_m

    def training_arrays(self, kept_only: bool = True):
        recs = [r for r in self._records if r.kept or not kept_only]
        if not recs:
            return np.empty((0, 2)), np.empty((0,), dtype=int)
        return np.stack([r.x for r in recs]), np.array([r.y for r in recs])

    def label_seconds(self) -> float:
        return float(sum(r.elapsed_label_seconds for r in self._records))

    def save_jsonl(self, path) -> None:
        Path(path).write_text("".join(r.to_json() + "\n" for r in self._records))

    @classmethod
    def load_jsonl(cls, path) -> "FeedbackDataset":
        lines = Path(path).read_text().splitlines()
        return cls([FeedbackRecord.from_json(line) for line in lines if line])


# ----------------------------------------------------------------------
# annotators
# ----------------------------------------------------------------------


class OracleAnnotator:
    """Labels points with the exact rule of a ground-truth world; free."""

    source = "oracle"

    def __init__(self, world):
        self.world = world

    def label(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        labels = self.world.oracle_annotate(pts)
        return labels, np.zeros(len(labels))


# ----------------------------------------------------------------------
# dataset construction
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DataRecipe:
    """How labeled points become a reward-model training set."""

    time_dependent: bool = True
    augment: bool = True
    k_variations: int = 10
    jitter: float = 0.1
    max_rotation_deg: float = 20.0
    noisy_copies: int = 10
    hidden: tuple[int, ...] = (64, 64)

    def to_dict(self) -> dict:
        return {
            "time_dependent": self.time_dependent,
            "augment": self.augment,
            "k_variations": self.k_variations,
            "jitter": self.jitter,
            "max_rotation_deg": self.max_rotation_deg,
            "noisy_copies": self.noisy_copies,
            "hidden": list(self.hidden),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DataRecipe":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def make_noisy_dataset(x, y, grid: DiffusionGrid, copies_per_example: int, rng,
                       time_index: int | None = None):
    """Forward-noise each labeled point at times drawn uniformly on the grid.

    Returns (x_noisy, t, y) with copies_per_example records per input.
    ``time_index`` forces a single grid index (0 reproduces the inputs).
    """
    if copies_per_example < 1:
        raise ValueError("copies_per_example must be >= 1")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y)
    n = x.shape[0]
    m = n * copies_per_example
    xr = np.repeat(x, copies_per_example, axis=0)
    yr = np.repeat(y, copies_per_example)
    if time_index is None:
        k = rng.integers(0, grid.num_steps + 1, size=m)
    else:
        k = np.full(m, int(time_index))
    eps = rng.standard_normal(xr.shape)
    a = grid.abar[k][:, None]
    xn = np.sqrt(a) * xr + np.sqrt(1.0 - a) * eps
    return xn, grid.times[k], yr


def augment(x, y, k_variations: int, rng, jitter: float = 0.1,
            max_rotation_deg: float = 20.0):
    """Add per-example variations: rotation about the data centroid + jitter.

    Output keeps the originals followed by k variations each, so the size
    is input * (k + 1); labels are copied.  Applied once, not per epoch.
    """
    if not (10 <= k_variations <= 20):
        raise ValueError("k_variations must be in [10, 20]")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y)
    centroid = x.mean(axis=0)
    theta = rng.uniform(
        -np.deg2rad(max_rotation_deg), np.deg2rad(max_rotation_deg),
        size=(x.shape[0], k_variations),
    )
    noise = jitter * rng.standard_normal((x.shape[0], k_variations, 2))
    c, s = np.cos(theta), np.sin(theta)
    rel = x - centroid
    rx = c * rel[:, None, 0] - s * rel[:, None, 1]
    ry = s * rel[:, None, 0] + c * rel[:, None, 1]
    var = np.stack([rx, ry], axis=2) + centroid + noise  # (n, k, 2)
    x_out = np.concatenate([x, var.reshape(-1, 2)], axis=0)
    y_out = np.concatenate([y, np.repeat(y, k_variations)])
    return x_out, y_out


def build_training_set(x, y, grid: DiffusionGrid, recipe: DataRecipe, rng):
    """Labeled points -> (x, t | None, y) per the recipe."""
    if recipe.augment:
        x, y = augment(x, y, recipe.k_variations, rng,
                       jitter=recipe.jitter, max_rotation_deg=recipe.max_rotation_deg)
    if recipe.time_dependent:
        xn, t, yn = make_noisy_dataset(x, y, grid, recipe.noisy_copies, rng)
        return xn, t, yn
    return x, None, y


def new_reward_net(recipe: DataRecipe, grid: DiffusionGrid, seed: int, dim: int = 2) -> Mlp:
    widths = (dim + (1 if recipe.time_dependent else 0), *recipe.hidden, 1)
    return Mlp(widths, head="sigmoid", time_feature=recipe.time_dependent,
               horizon=grid.schedule.horizon, seed=seed)


def train_reward(x, y, grid: DiffusionGrid, config: TrainConfig, recipe: DataRecipe,
                 seed: int, iterations: int | None = None) -> Mlp:
    """Full pipeline: recipe -> fresh net -> AdamW; deterministic in seed."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    xt, tt, yt = build_training_set(x, y, grid, recipe, rng)
    net = new_reward_net(recipe, grid, seed=seed, dim=np.atleast_2d(x).shape[1])
    nets.train(net, xt, yt, config.replace(seed=seed), t=tt, iterations=iterations)
    return net


# ----------------------------------------------------------------------
# reward-model wrappers (the duck type the samplers consume)
# ----------------------------------------------------------------------


class NetReward:
    """A single trained reward net as a guidance/rejection reward."""

    def __init__(self, net: Mlp):
        if net.head != "sigmoid":
            raise ValueError("reward nets use a sigmoid head")
        self.net = net
        self.time_dependent = net.time_feature

    def _t(self, t):
        return t if self.time_dependent else None

    def log_value(self, x, t=0.0):
        return self.net.log_value(x, self._t(t))

    def log_grad(self, x, t=0.0):
        return self.net.grad_input(x, self._t(t))

    def value(self, x, t=0.0):
        return self.net.forward(x, self._t(t))

    def value0(self, x):
        return self.value(x, 0.0)


class AnalyticReward:
    """Exact benign probability of a world, as a reward model."""

    def __init__(self, world, schedule, time_dependent: bool = True):
        self.world = world
        self.schedule = schedule
        self.time_dependent = time_dependent

    def _t(self, t):
        return t if self.time_dependent else 0.0

    def log_value(self, x, t=0.0):
        return self.world.log_reward_t(x, self._t(t), self.schedule)

    def log_grad(self, x, t=0.0):
        return self.world.log_reward_grad_t(x, self._t(t), self.schedule)

    def value(self, x, t=0.0):
        return self.world.reward_exact_t(x, self._t(t), self.schedule)

    def value0(self, x):
        return self.value(x, 0.0)


def _tree_sum(arrays):
    """Balanced pairwise sum; keeps K-copy sums exactly K times one term."""
    arrays = list(arrays)
    while len(arrays) > 1:
        nxt = [arrays[i] + arrays[i + 1] for i in range(0, len(arrays) - 1, 2)]
        if len(arrays) % 2:
            nxt.append(arrays[-1])
        arrays = nxt
    return arrays[0]


class RewardEnsemble:
    """K reward nets; product combine for guidance, mean for rejection."""

    def __init__(self, members: list[Mlp]):
        if not members:
            raise ValueError("ensemble needs at least one member")
        td = {m.time_feature for m in members}
        if len(td) != 1:
            raise ValueError("members must agree on time dependence")
        self.members = [NetReward(m) for m in members]
        self.time_dependent = td.pop()

    @property
    def k(self) -> int:
        return len(self.members)

    def log_value(self, x, t=0.0):
        return _tree_sum([m.log_value(x, t) for m in self.members])

    def log_grad(self, x, t=0.0):
        return _tree_sum([m.log_grad(x, t) for m in self.members])

    def value(self, x, t=0.0):
        out = self.members[0].value(x, t)
        for m in self.members[1:]:
            out = out * m.value(x, t)
        return out

    def value0(self, x):
        """Mean combine, used by the rejection baseline."""
        return np.mean([m.value0(x) for m in self.members], axis=0)

    def save(self, path) -> None:
        member_paths = []
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        for i, m in enumerate(self.members):
            p = path / f"member_{i:02d}.json"
            nets.save_checkpoint(m.net, p)
            member_paths.append(p.name)
        (path / "ensemble.json").write_text(
            json.dumps(
                {
                    "members": member_paths,
                    "combine_for_guidance": "product",
                    "combine_for_rejection": "mean",
                }
            )
        )

    @classmethod
    def load(cls, path) -> "RewardEnsemble":
        path = Path(path)
        meta = json.loads((path / "ensemble.json").read_text())
        members = [nets.load_checkpoint(path / name) for name in meta["members"]]
        return cls(members)


# ----------------------------------------------------------------------
# ensemble and union baselines
# ----------------------------------------------------------------------


def build_ensemble(
    malign_x,
    benign_pool_x,
    k_models: int,
    config: TrainConfig,
    recipe: DataRecipe,
    grid: DiffusionGrid,
    rng,
) -> RewardEnsemble:
    """Train K members on shared malign data + bootstrapped benign resamples.

    Each member gets N_M benign points drawn with replacement from the pool
    and an independent seed.
    """
    malign_x = np.atleast_2d(np.asarray(malign_x, dtype=float))
    benign_pool_x = np.atleast_2d(np.asarray(benign_pool_x, dtype=float))
    n_m = malign_x.shape[0]
    if n_m < 1:
        raise ValueError("ensemble needs at least one malign example")
    if benign_pool_x.shape[0] < n_m:
        raise ValueError("benign pool must be at least as large as the malign set")
    members = []
    for _ in range(k_models):
        idx = rng.integers(0, benign_pool_x.shape[0], size=n_m)
        x = np.concatenate([malign_x, benign_pool_x[idx]], axis=0)
        y = np.concatenate([np.zeros(n_m, dtype=int), np.ones(n_m, dtype=int)])
        seed = int(rng.integers(0, 2**31 - 1))
        members.append(train_reward(x, y, grid, config, recipe, seed=seed))
    return RewardEnsemble(members)


def train_union_baseline(
    malign_x,
    benign_pool_x,
    config: TrainConfig,
    recipe: DataRecipe,
    grid: DiffusionGrid,
    rng,
) -> Mlp:
    """One model on the malign set plus the whole benign pool.

    The loss weight is rebalanced by N_M / N_B and the iteration count
    scaled so the epochs match the balanced members.
    """
    malign_x = np.atleast_2d(np.asarray(malign_x, dtype=float))
    benign_pool_x = np.atleast_2d(np.asarray(benign_pool_x, dtype=float))
    n_m, n_b = malign_x.shape[0], benign_pool_x.shape[0]
    if n_m < 1:
        raise ValueError("need at least one malign example")
    x = np.concatenate([malign_x, benign_pool_x], axis=0)
    y = np.concatenate([np.zeros(n_m, dtype=int), np.ones(n_b, dtype=int)])
    cfg = config.replace(alpha=config.alpha * n_m / n_b)
    iterations = int(round(config.iterations * (n_m + n_b) / (2 * n_m)))
    seed = int(rng.integers(0, 2**31 - 1))
    return train_reward(x, y, grid, cfg, recipe, seed=seed, iterations=iterations)


# ----------------------------------------------------------------------
# imitation loop
# ----------------------------------------------------------------------


@dataclass
class RoundMetrics:
    round: int
    presented: int
    malign_presented: int
    kept_malign: int
    kept_benign: int
    training_iterations: int
    label_seconds: float
    eval_malign_fraction: float | None = None
    eval_n: int = 0

    @property
    def presented_malign_rate(self) -> float:
        return self.malign_presented / max(self.presented, 1)

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "presented": self.presented,
            "malign_presented": self.malign_presented,
            "kept_malign": self.kept_malign,
            "kept_benign": self.kept_benign,
            "training_iterations": self.training_iterations,
            "label_seconds": self.label_seconds,
            "eval_malign_fraction": self.eval_malign_fraction,
            "eval_n": self.eval_n,
        }


@dataclass
class ImitationResult:
    net: Mlp
    rounds: list[RoundMetrics]
    buffer: FeedbackDataset


def _round_rngs(seed: int, round_idx: int):
    base = np.random.SeedSequence([int(seed), int(round_idx)])
    sampling_ss, label_ss, train_ss = base.spawn(3)
    return (
        np.random.default_rng(sampling_ss),
        np.random.default_rng(label_ss),
        int(train_ss.generate_state(1)[0] % (2**31 - 1)),
    )


class BalancedCollector:
    """Batch-at-a-time label collection against per-class quotas.

    Drives both the in-process loops (an annotator labels each batch
    immediately) and the annotation service (batches are parked until a
    human submits labels); both paths consume the same sample stream and
    produce identical buffers for identical label decisions.
    """

    MAX_BATCH = 1024

    def __init__(
        self,
        sample_fn,
        quota: tuple[int, int],
        round_idx: int,
        buffer: FeedbackDataset,
        rng,
        batch_size: int = 64,
        max_presented: int = 200_000,
    ):
        self.sample_fn = sample_fn
        self.quota_malign, self.quota_benign = quota
        self.round_idx = round_idx
        self.buffer = buffer
        self.rng = rng
        self.batch_size = batch_size
        self.max_presented = max_presented
        self.kept_malign = 0
        self.kept_benign = 0
        self.presented = 0
        self.malign_presented = 0

    @property
    def done(self) -> bool:
        return (
            self.kept_malign >= self.quota_malign
            and self.kept_benign >= self.quota_benign
        )

    def next_batch(self):
        """Draw the next batch of points to be labeled."""
        if self.done:
            raise RuntimeError("quotas already met")
        if self.presented >= self.max_presented:
            raise RuntimeError(
                f"quota unmet after {self.presented} presented samples "
                f"(kept {self.kept_malign}/{self.quota_malign} malign, "
                f"{self.kept_benign}/{self.quota_benign} benign)"
            )
        return self.sample_fn(self.batch_size, self.rng)

    def submit(self, points, labels, elapsed_seconds, source: str) -> None:
        """Record labels for a presented batch; kept flags fill the quotas.

        When a still-needed class barely shows up in a batch, later
        batches double in size (up to MAX_BATCH): rare-class hunting is
        the expensive part of label collection and big batches amortize
        the chain cost.
        """
        self.presented += len(points)
        batch_malign = 0
        for xi, yi, dt in zip(points, labels, elapsed_seconds):
            yi = int(yi)
            if yi == MALIGN:
                batch_malign += 1
                self.malign_presented += 1
                keep = self.kept_malign < self.quota_malign
                self.kept_malign += keep
            else:
                keep = self.kept_benign < self.quota_benign
                self.kept_benign += keep
            self.buffer.append(
                FeedbackRecord(
                    x=np.asarray(xi, dtype=float),
                    y=yi,
                    round=self.round_idx,
                    source=source,
                    elapsed_label_seconds=float(dt),
                    kept=bool(keep),
                )
            )
        if not self.done:
            batch_benign = len(points) - batch_malign
            scarce = (
                self.kept_malign < self.quota_malign and batch_malign < 4
            ) or (self.kept_benign < self.quota_benign and batch_benign < 4)
            if scarce:
                self.batch_size = min(2 * self.batch_size, self.MAX_BATCH)


def collect_balanced(
    sample_fn,
    annotator,
    quota: tuple[int, int],
    round_idx: int,
    buffer: FeedbackDataset,
    rng,
    batch_size: int = 64,
    max_presented: int = 200_000,
):
    """Present batches until per-class quotas are met; label everything shown.

    Every presented point is labeled and appended (labels cost annotator
    time even past quota); only the first quota-many per class are marked
    kept.  Returns (presented, malign_presented).
    """
    c = BalancedCollector(sample_fn, quota, round_idx, buffer, rng,
                          batch_size=batch_size, max_presented=max_presented)
    while not c.done:
        pts = c.next_batch()
        try:
            labels, elapsed = annotator.label(pts)
        except Exception as exc:  # annotator failure aborts the round
            raise AnnotationAborted(
                f"annotator failed in round {round_idx}: {exc}"
            ) from exc
        c.submit(pts, labels, elapsed, annotator.source)
    return c.presented, c.malign_presented


def collect_until_malign(
    sample_fn,
    annotator,
    n_malign: int,
    round_idx: int,
    buffer: FeedbackDataset,
    rng,
    batch_size: int = 64,
    max_presented: int = 200_000,
):
    """Label a stream until ``n_malign`` malign examples are found.

    Everything presented is labeled and kept: the scarce malign examples
    become the shared ensemble training set and the abundant benign ones
    form the bootstrap pool.  Returns (presented, malign_presented).
    """
    presented = 0
    malign_presented = 0
    while malign_presented < n_malign:
        if presented >= max_presented:
            raise RuntimeError(
                f"only {malign_presented}/{n_malign} malign after {presented} presented"
            )
        pts = sample_fn(batch_size, rng)
        try:
            labels, elapsed = annotator.label(pts)
        except Exception as exc:
            raise AnnotationAborted(
                f"annotator failed in round {round_idx}: {exc}"
            ) from exc
        presented += len(pts)
        for xi, yi, dt in zip(pts, labels, elapsed):
            yi = int(yi)
            malign_presented += yi == MALIGN
            buffer.append(
                FeedbackRecord(
                    x=np.asarray(xi, dtype=float),
                    y=yi,
                    round=round_idx,
                    source=annotator.source,
                    elapsed_label_seconds=float(dt),
                    kept=True,
                )
            )
    return presented, malign_presented


def _eval_fraction(sample_fn, annotator, n: int, rng) -> float:
    pts = sample_fn(n, rng)
    labels, _ = annotator.label(pts)
    return float(np.mean(np.asarray(labels) == MALIGN))


def imitation_loop(
    eps_model,
    grid: DiffusionGrid,
    annotator,
    rounds: int,
    quota: tuple[int, int],
    config: TrainConfig,
    recipe: DataRecipe,
    guidance: GuidanceConfig,
    seed: int,
    buffer: FeedbackDataset | None = None,
    start_round: int = 1,
    eval_n: int = 0,
    eval_annotator=None,
    batch_size: int = 64,
    max_presented: int = 200_000,
) -> ImitationResult:
    """Multi-round label-censor-retrain loop over an abstract annotator.

    Round 1 samples without censoring; later rounds sample with the current
    reward model under ``guidance``.  The model is retrained from scratch on
    the kept buffer each round, with the iteration count proportional to the
    kept-buffer size.  The buffer is mutated in place, so an aborted round
    leaves all collected labels intact and the run resumable.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    buffer = buffer if buffer is not None else FeedbackDataset()
    eval_annotator = eval_annotator or annotator
    round1_kept = sum(quota)
    net = None
    metrics: list[RoundMetrics] = []
    for r in range(start_round, start_round + rounds):
        sampling_rng, eval_rng, train_seed = _round_rngs(seed, r)
        if net is None:
            sample_fn = lambda m, g: sample_unguided(eps_model, grid, m, g).samples
        else:
            reward = NetReward(net)
            sample_fn = lambda m, g: sample_censored(
                eps_model, reward, guidance, grid, m, g
            ).samples
        before = len(buffer)
        presented, malign_presented = collect_balanced(
            sample_fn, annotator, quota, r, buffer, sampling_rng,
            batch_size=batch_size, max_presented=max_presented,
        )
        label_seconds = sum(
            rec.elapsed_label_seconds for rec in buffer.records[before:]
        )
        x, y = buffer.training_arrays(kept_only=True)
        iterations = int(round(config.iterations * x.shape[0] / round1_kept))
        net = train_reward(x, y, grid, config, recipe, seed=train_seed,
                           iterations=iterations)
        m = RoundMetrics(
            round=r,
            presented=presented,
            malign_presented=malign_presented,
            kept_malign=sum(1 for rec in buffer if rec.kept and rec.y == MALIGN),
            kept_benign=sum(1 for rec in buffer if rec.kept and rec.y == BENIGN),
            training_iterations=iterations,
            label_seconds=float(label_seconds),
        )
        if eval_n > 0:
            reward = NetReward(net)
            fn = lambda m_, g: sample_censored(
                eps_model, reward, guidance, grid, m_, g
            ).samples
            m.eval_malign_fraction = _eval_fraction(fn, eval_annotator, eval_n, eval_rng)
            m.eval_n = eval_n
        metrics.append(m)
    return ImitationResult(net=net, rounds=metrics, buffer=buffer)


def non_imitation_baseline(
    eps_model,
    grid: DiffusionGrid,
    annotator,
    quota: tuple[int, int],
    config: TrainConfig,
    recipe: DataRecipe,
    seed: int,
    cumulative_rounds: int = 1,
    buffer: FeedbackDataset | None = None,
    batch_size: int = 64,
    max_presented: int = 200_000,
) -> ImitationResult:
    """Train once on uncensored labels matching an imitation run's totals.

    ``cumulative_rounds`` sets the iteration budget to the sum an imitation
    run of that many rounds would have used.  With one round and the same
    quota this is the identical code path as imitation round 1.
    """
    buffer = buffer if buffer is not None else FeedbackDataset()
    sampling_rng, eval_rng, train_seed = _round_rngs(seed, 1)
    sample_fn = lambda m, g: sample_unguided(eps_model, grid, m, g).samples
    presented, malign_presented = collect_balanced(
        sample_fn, annotator, quota, 1, buffer, sampling_rng,
        batch_size=batch_size, max_presented=max_presented,
    )
    x, y = buffer.training_arrays(kept_only=True)
    iterations = config.iterations * sum(range(1, cumulative_rounds + 1))
    net = train_reward(x, y, grid, config, recipe, seed=train_seed,
                       iterations=iterations)
    m = RoundMetrics(
        round=1,
        presented=presented,
        malign_presented=malign_presented,
        kept_malign=sum(1 for rec in buffer if rec.kept and rec.y == MALIGN),
        kept_benign=sum(1 for rec in buffer if rec.kept and rec.y == BENIGN),
        training_iterations=iterations,
        label_seconds=buffer.label_seconds(),
    )
    return ImitationResult(net=net, rounds=[m], buffer=buffer)
