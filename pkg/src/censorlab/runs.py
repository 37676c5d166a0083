"""Run configuration, experiment bundles, persistence, and replay.

A run is a directory: config.json (the full config snapshot), buffer.jsonl
(labeled feedback), checkpoints/, samples/*.jsonl, metrics/*.csv and
ledger.json (human-time accounting), plus manifest.json with a sha256 per
artifact.  All numbers are serialized with full round-trip precision, so
re-executing a run's config with its seeds reproduces the metric CSVs
byte-for-byte.

Per-world experiment bundles carry the calibrated knobs (reward kind,
ensemble size, loss weight, iteration budget, guidance weights) so CLI
subcommands and the annotation service agree on defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from . import nets, rewards, sampling, world as world_mod
from .nets import Mlp, TrainConfig
from .rewards import (
    BalancedCollector,
    DataRecipe,
    FeedbackDataset,
    NetReward,
    OracleAnnotator,
    RewardEnsemble,
    _round_rngs,
    build_ensemble,
    collect_until_malign,
    train_reward,
    train_union_baseline,
)
from .sampling import (
    AnalyticEps,
    GuidanceConfig,
    rejection_sample,
    sample_censored,
    sample_unguided,
)
from .schedule import DiffusionGrid, NoiseSchedule, build_grid
from .world import LabeledMixture, make_preset


# ----------------------------------------------------------------------
# per-preset experiment bundles
# ----------------------------------------------------------------------

EXPERIMENTS: dict[str, dict] = {
    "benign_dominant": {
        "route": "ensemble",
        "reward_kind": "time_dependent",
        "ensemble_k": 5,
        "n_malign": 10,
        "train": {"iterations": 1000, "alpha": 0.02},
        "recipe": {"time_dependent": True},
        "guidance": {"mode": "time_dependent", "weight": 1.0},
        "single_weight": 5.0,
        "backward_step_size": 2e-4,
    },
    "malign_dominant": {
        "route": "imitation",
        "reward_kind": "time_dependent",
        "rounds": 3,
        "quota": [10, 10],
        "train": {"iterations": 2000, "alpha": 0.5},
        "recipe": {"time_dependent": True, "max_rotation_deg": 8.0},
        "guidance": {"mode": "time_dependent", "weight": 5.0},
        "backward_step_size": 2e-3,
    },
    "bedroom_like": {
        "route": "ensemble",
        "reward_kind": "time_independent",
        "ensemble_k": 5,
        "n_malign": 100,
        "train": {"iterations": 3000, "alpha": 0.1},
        "recipe": {"time_dependent": False, "augment": False},
        "guidance": {"mode": "time_independent", "weight": 2.0},
        "single_weight": 10.0,
        "backward_step_size": 2e-3,
        # boundary-comparison protocol: a single modestly-trained model
        "comparison": {"quota": [30, 30], "train": {"iterations": 1000, "alpha": 1.0}},
    },
    "symmetric_pair": {
        "route": "exact",
        "reward_kind": "time_dependent",
        "guidance": {"mode": "time_dependent", "weight": 1.0},
        "backward_step_size": 2e-4,
    },
}


# ----------------------------------------------------------------------
# run configuration
# ----------------------------------------------------------------------

_KNOWN_KEYS = {
    "preset", "world", "schedule", "reward", "feedback", "guidance",
    "eval", "seed", "out_dir",
}


@dataclass
class RunConfig:
    preset: str | None = None
    world: list[dict] | None = None
    schedule: dict = field(default_factory=dict)
    reward: dict = field(default_factory=dict)
    feedback: dict = field(default_factory=dict)
    guidance: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        errors = []
        for key in raw:
            if key not in _KNOWN_KEYS:
                errors.append(f"unknown key {key!r}")
        known = {k: v for k, v in raw.items() if k in _KNOWN_KEYS}
        cfg = cls(**known)
        errors.extend(cfg.validate())
        if errors:
            raise ValueError("invalid run config: " + "; ".join(errors))
        return cfg

    def validate(self) -> list[str]:
        """Collect every offending key instead of stopping at the first."""
        errors = []
        if self.preset is None and self.world is None:
            errors.append("preset or world: one is required")
        if self.preset is not None and self.preset not in world_mod.list_presets():
            errors.append(f"preset: unknown {self.preset!r}")
        if self.world is not None:
            try:
                LabeledMixture(self.world)
            except Exception as exc:
                errors.append(f"world: {exc}")
        for key, lo in (("beta_min", 0.0), ("beta_max", 0.0), ("horizon", 0.0)):
            v = self.schedule.get(key)
            if v is not None and v <= lo:
                errors.append(f"schedule.{key}: must be > {lo}")
        n = self.schedule.get("num_steps")
        if n is not None and int(n) < 1:
            errors.append("schedule.num_steps: must be >= 1")
        mode = self.guidance.get("mode")
        if mode is not None and mode not in sampling.GUIDANCE_MODES:
            errors.append(f"guidance.mode: unknown {mode!r}")
        ann = self.feedback.get("annotator")
        if ann is not None and ann not in ("oracle", "human"):
            errors.append(f"feedback.annotator: unknown {ann!r}")
        if not isinstance(self.seed, int):
            errors.append("seed: must be an integer")
        return errors

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "world": self.world,
            "schedule": self.schedule,
            "reward": self.reward,
            "feedback": self.feedback,
            "guidance": self.guidance,
            "eval": self.eval,
            "seed": self.seed,
            "out_dir": self.out_dir,
        }


def load_config_file(path) -> RunConfig:
    """Read a YAML or JSON key/value tree."""
    import yaml

    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("config file must hold a mapping")
    return RunConfig.from_dict(raw)


# ----------------------------------------------------------------------
# assembled run context
# ----------------------------------------------------------------------


@dataclass
class RunContext:
    config: RunConfig
    world: LabeledMixture
    schedule: NoiseSchedule
    grid: "DiffusionGrid"
    eps: AnalyticEps
    experiment: dict
    train_config: TrainConfig
    recipe: DataRecipe
    guidance: GuidanceConfig

    @property
    def annotator(self) -> OracleAnnotator:
        return OracleAnnotator(self.world)


def build_context(config: RunConfig) -> RunContext:
    w = (
        make_preset(config.preset)
        if config.preset is not None
        else LabeledMixture(config.world)
    )
    sched = NoiseSchedule.from_dict(config.schedule)
    grid = build_grid(sched, int(config.schedule.get("num_steps", 1000)))
    exp = dict(EXPERIMENTS.get(config.preset or "", {}))
    train_kw = dict(exp.get("train", {}))
    train_kw.update(config.reward.get("train", {}))
    recipe_kw = dict(exp.get("recipe", {}))
    recipe_kw.update(config.reward.get("recipe", {}))
    guid_kw = dict(exp.get("guidance", {}))
    guid_kw.update(config.guidance)
    return RunContext(
        config=config,
        world=w,
        schedule=sched,
        grid=grid,
        eps=AnalyticEps(w, sched),
        experiment=exp,
        train_config=TrainConfig(**train_kw),
        recipe=DataRecipe.from_dict(recipe_kw) if recipe_kw else DataRecipe(),
        guidance=GuidanceConfig.from_dict(guid_kw) if guid_kw else GuidanceConfig(),
    )


# ----------------------------------------------------------------------
# run directory plumbing
# ----------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class RunRecord:
    """A run directory with hash-stamped artifacts."""

    def __init__(self, out_dir, config: RunConfig):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "checkpoints").mkdir(exist_ok=True)
        (self.dir / "samples").mkdir(exist_ok=True)
        (self.dir / "metrics").mkdir(exist_ok=True)
        self.config = config
        self.write_text("config.json", json.dumps(config.to_dict(), indent=2))

    def path(self, rel: str) -> Path:
        return self.dir / rel

    def write_text(self, rel: str, text: str) -> Path:
        p = self.dir / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        return p

    def dump_samples(self, rel: str, output: sampling.SamplerOutput, labels) -> Path:
        lines = []
        accepted = output.accepted is not None
        for i, (pt, lab) in enumerate(zip(output.samples, labels)):
            lines.append(
                json.dumps(
                    {
                        "seed": output.seed,
                        "index": i,
                        "point": [float(pt[0]), float(pt[1])],
                        "oracle_label": int(lab),
                        "accepted": True if accepted else None,
                    }
                )
            )
        return self.write_text(rel, "".join(line + "\n" for line in lines))

    def write_ledger(self, buffer: FeedbackDataset | None, extra: dict | None = None):
        by_source: dict[str, dict] = {}
        total_seconds = 0.0
        count = 0
        if buffer is not None:
            for rec in buffer:
                s = by_source.setdefault(rec.source, {"labels": 0, "seconds": 0.0})
                s["labels"] += 1
                s["seconds"] += rec.elapsed_label_seconds
            total_seconds = buffer.label_seconds()
            count = len(buffer)
        ledger = {
            "labels_count": count,
            "total_label_seconds": total_seconds,
            "by_source": by_source,
        }
        if extra:
            ledger.update(extra)
        self.write_text("ledger.json", json.dumps(ledger, indent=2))

    def finalize(self) -> dict:
        """Hash-stamp every artifact into manifest.json."""
        manifest = {}
        for p in sorted(self.dir.rglob("*")):
            if p.is_file() and p.name != "manifest.json":
                manifest[str(p.relative_to(self.dir))] = _sha256(p)
        self.write_text("manifest.json", json.dumps(manifest, indent=2))
        return manifest


# ----------------------------------------------------------------------
# imitation driver (shared by the CLI and the annotation service)
# ----------------------------------------------------------------------


class ImitationDriver:
    """Stepwise imitation rounds over an abstract label source.

    ``begin_round`` hands out a collector whose batches must be labeled
    (by an in-process annotator or by service clients); ``finish_round``
    trains on the kept buffer and records metrics.  The sample stream,
    seed derivations and training calls match the in-library loop, so an
    oracle-labeled service session reproduces the CLI run byte-for-byte.
    """

    def __init__(
        self,
        ctx: RunContext,
        rounds: int,
        quota: tuple[int, int],
        seed: int,
        record: RunRecord | None = None,
        eval_n: int = 0,
        batch_size: int = 64,
        max_presented: int = 200_000,
    ):
        self.ctx = ctx
        self.rounds = rounds
        self.quota = (int(quota[0]), int(quota[1]))
        self.seed = seed
        self.record = record
        self.eval_n = eval_n
        self.batch_size = batch_size
        self.max_presented = max_presented
        self.buffer = FeedbackDataset()
        self.net: Mlp | None = None
        self.round_metrics: list[rewards.RoundMetrics] = []
        self.current_round = 1
        self._collector: BalancedCollector | None = None

    @property
    def done(self) -> bool:
        return self.current_round > self.rounds

    def _sample_fn(self):
        if self.net is None:
            return lambda m, g: sample_unguided(self.ctx.eps, self.ctx.grid, m, g).samples
        reward = NetReward(self.net)
        return lambda m, g: sample_censored(
            self.ctx.eps, reward, self.ctx.guidance, self.ctx.grid, m, g
        ).samples

    def begin_round(self) -> BalancedCollector:
        if self.done:
            raise RuntimeError("all rounds completed")
        if self._collector is not None:
            return self._collector
        sampling_rng, _, _ = _round_rngs(self.seed, self.current_round)
        self._collector = BalancedCollector(
            self._sample_fn(),
            self.quota,
            self.current_round,
            self.buffer,
            sampling_rng,
            batch_size=self.batch_size,
            max_presented=self.max_presented,
        )
        return self._collector

    def finish_round(self) -> rewards.RoundMetrics:
        c = self._collector
        if c is None or not c.done:
            raise RuntimeError("round quotas not met")
        _, eval_rng, train_seed = _round_rngs(self.seed, self.current_round)
        x, y = self.buffer.training_arrays(kept_only=True)
        iterations = int(
            round(self.ctx.train_config.iterations * x.shape[0] / sum(self.quota))
        )
        self.net = train_reward(
            x, y, self.ctx.grid, self.ctx.train_config, self.ctx.recipe,
            seed=train_seed, iterations=iterations,
        )
        round_records = [r for r in self.buffer if r.round == self.current_round]
        m = rewards.RoundMetrics(
            round=self.current_round,
            presented=c.presented,
            malign_presented=c.malign_presented,
            kept_malign=sum(1 for r in self.buffer if r.kept and r.y == rewards.MALIGN),
            kept_benign=sum(1 for r in self.buffer if r.kept and r.y == rewards.BENIGN),
            training_iterations=iterations,
            label_seconds=float(
                sum(r.elapsed_label_seconds for r in round_records)
            ),
        )
        if self.eval_n > 0:
            reward = NetReward(self.net)
            fn = lambda k, g: sample_censored(
                self.ctx.eps, reward, self.ctx.guidance, self.ctx.grid, k, g
            ).samples
            m.eval_malign_fraction = rewards._eval_fraction(
                fn, self.ctx.annotator, self.eval_n, eval_rng
            )
            m.eval_n = self.eval_n
        self.round_metrics.append(m)
        if self.record is not None:
            nets.save_checkpoint(
                self.net,
                self.record.path(f"checkpoints/round_{self.current_round:02d}.json"),
            )
            self._persist()
        self.current_round += 1
        self._collector = None
        return m

    def run_with_annotator(self, annotator) -> None:
        """Drive every remaining round with an in-process annotator."""
        while not self.done:
            c = self.begin_round()
            while not c.done:
                pts = c.next_batch()
                try:
                    labels, elapsed = annotator.label(pts)
                except Exception as exc:
                    self._persist()
                    raise rewards.AnnotationAborted(
                        f"annotator failed in round {self.current_round}: {exc}"
                    ) from exc
                c.submit(pts, labels, elapsed, annotator.source)
            self.finish_round()

    def rounds_csv(self) -> str:
        header = (
            "round,presented,malign_presented,kept_malign,kept_benign,"
            "training_iterations,label_seconds,eval_malign_fraction,eval_n"
        )
        lines = [header]
        for m in self.round_metrics:
            frac = "" if m.eval_malign_fraction is None else repr(m.eval_malign_fraction)
            lines.append(
                f"{m.round},{m.presented},{m.malign_presented},{m.kept_malign},"
                f"{m.kept_benign},{m.training_iterations},{repr(m.label_seconds)},"
                f"{frac},{m.eval_n}"
            )
        return "\n".join(lines) + "\n"

    def _persist(self) -> None:
        if self.record is None:
            return
        self.buffer.save_jsonl(self.record.path("buffer.jsonl"))
        self.record.write_text("metrics/rounds.csv", self.rounds_csv())
        self.record.write_ledger(self.buffer)


# ----------------------------------------------------------------------
# subcommand bodies (shared by CLI and tests)
# ----------------------------------------------------------------------


def run_sample(config: RunConfig, n: int, guided: bool = False) -> dict:
    """Unguided (or exact-reward guided) sampling with an oracle-labeled dump."""
    ctx = build_context(config)
    record = RunRecord(config.out_dir, config)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5A]))
    if guided:
        reward = rewards.AnalyticReward(
            ctx.world, ctx.schedule,
            time_dependent=ctx.guidance.mode == "time_dependent",
        )
        out = sample_censored(ctx.eps, reward, ctx.guidance, ctx.grid, n, rng,
                              seed=config.seed)
    else:
        out = sample_unguided(ctx.eps, ctx.grid, n, rng, seed=config.seed)
    labels = ctx.world.oracle_annotate(out.samples)
    record.dump_samples("samples/run.jsonl", out, labels)
    frac = float(np.mean(labels == 0))
    record.write_text(
        "metrics/sample.csv",
        "n,malign_fraction\n" + f"{n},{repr(frac)}\n",
    )
    record.write_text("eval_meta.json", json.dumps({"n": n, "guided": guided}))
    record.write_ledger(None)
    record.finalize()
    return {"malign_fraction": frac, "n": n, "dir": str(record.dir)}


def run_imitate(config: RunConfig) -> dict:
    """Oracle-annotated imitation run persisted as a run record."""
    ctx = build_context(config)
    record = RunRecord(config.out_dir, config)
    rounds = int(config.feedback.get("rounds", ctx.experiment.get("rounds", 3)))
    quota = config.feedback.get("quota", ctx.experiment.get("quota", [10, 10]))
    driver = ImitationDriver(
        ctx, rounds, (int(quota[0]), int(quota[1])), config.seed, record=record,
        eval_n=int(config.eval.get("n", 0)),
        batch_size=int(config.feedback.get("batch_size", 64)),
        max_presented=int(config.feedback.get("max_presented", 200_000)),
    )
    driver.run_with_annotator(ctx.annotator)
    record.finalize()
    return {
        "rounds": [m.to_dict() for m in driver.round_metrics],
        "buffer_size": len(driver.buffer),
        "dir": str(record.dir),
    }


def _trained_ensemble(ctx: RunContext, seed: int):
    """Collect oracle labels and build the preset's reward ensemble."""
    n_malign = int(ctx.config.reward.get("n_malign", ctx.experiment.get("n_malign", 10)))
    k = int(ctx.config.reward.get("ensemble_k", ctx.experiment.get("ensemble_k", 5)))
    buffer = FeedbackDataset()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE5]))
    fn = lambda m, g: sample_unguided(ctx.eps, ctx.grid, m, g).samples
    collect_until_malign(fn, ctx.annotator, n_malign, 1, buffer, rng,
                         batch_size=128)
    x, y = buffer.training_arrays()
    malign_x = x[y == rewards.MALIGN][:n_malign]
    pool = x[y == rewards.BENIGN]
    ens = build_ensemble(
        malign_x, pool, k, ctx.train_config, ctx.recipe, ctx.grid,
        np.random.default_rng(np.random.SeedSequence([seed, 0xE6])),
    )
    return ens, malign_x, pool, buffer


def run_ensemble(config: RunConfig) -> dict:
    ctx = build_context(config)
    record = RunRecord(config.out_dir, config)
    ens, malign_x, pool, buffer = _trained_ensemble(ctx, config.seed)
    ens.save(record.path("checkpoints/ensemble"))
    buffer.save_jsonl(record.path("buffer.jsonl"))
    record.write_ledger(buffer)
    record.finalize()
    return {
        "k": ens.k,
        "n_malign": int(malign_x.shape[0]),
        "benign_pool": int(pool.shape[0]),
        "labels": len(buffer),
        "dir": str(record.dir),
    }


def run_train_reward(config: RunConfig) -> dict:
    """Train one reward net on balanced oracle labels (no ensemble)."""
    ctx = build_context(config)
    record = RunRecord(config.out_dir, config)
    quota = config.feedback.get("quota", [10, 10])
    buffer = FeedbackDataset()
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x7E]))
    fn = lambda m, g: sample_unguided(ctx.eps, ctx.grid, m, g).samples
    rewards.collect_balanced(fn, ctx.annotator, (int(quota[0]), int(quota[1])),
                             1, buffer, rng, batch_size=128)
    x, y = buffer.training_arrays(kept_only=True)
    net = train_reward(x, y, ctx.grid, ctx.train_config, ctx.recipe,
                       seed=config.seed)
    nets.save_checkpoint(net, record.path("checkpoints/reward.json"),
                         extra={"trained_on": len(y)})
    buffer.save_jsonl(record.path("buffer.jsonl"))
    record.write_ledger(buffer)
    record.finalize()
    return {"trained_on": int(y.shape[0]), "labels": len(buffer), "dir": str(record.dir)}


def run_reject(config: RunConfig, threshold: float, n_target: int) -> dict:
    """Rejection-sampling baseline with the exact oracle reward."""
    ctx = build_context(config)
    record = RunRecord(config.out_dir, config)
    reward = rewards.AnalyticReward(ctx.world, ctx.schedule, time_dependent=False)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x4E]))
    fn = lambda m, g: sample_unguided(ctx.eps, ctx.grid, m, g).samples
    out = rejection_sample(fn, reward, threshold, n_target, rng,
                           presented_cap=int(config.eval.get("presented_cap", 100_000)),
                           seed=config.seed)
    labels = ctx.world.oracle_annotate(out.samples) if out.samples.size else np.array([])
    record.dump_samples("samples/accepted.jsonl", out, labels)
    frac = float(np.mean(labels == 0)) if labels.size else float("nan")
    record.write_text(
        "metrics/rejection.csv",
        "threshold,accepted,presented,acceptance_ratio,malign_fraction\n"
        f"{repr(threshold)},{out.accepted},{out.presented},"
        f"{repr(out.acceptance_ratio)},{repr(frac)}\n",
    )
    record.write_ledger(None)
    record.finalize()
    return {
        "acceptance_ratio": out.acceptance_ratio,
        "malign_fraction": frac,
        "dir": str(record.dir),
    }


ARMS = ("baseline", "single", "union", "ensemble", "ensemble_universal", "rejection")


def run_eval(config: RunConfig, arms: list[str], trials: int, n: int) -> dict:
    """Multi-arm comparison on a preset; emits the figure-ready CSV."""
    for arm in arms:
        if arm not in ARMS:
            raise ValueError(f"unknown arm {arm!r}; known: {ARMS}")
    ctx = build_context(config)
    record = RunRecord(config.out_dir, config)
    annotator = ctx.annotator
    need_models = any(a != "baseline" for a in arms)
    ens = single = union = None
    buffer = None
    if need_models:
        ens, malign_x, pool, buffer = _trained_ensemble(ctx, config.seed)
        single = NetReward(ens.members[0].net)
        if "union" in arms:
            union = NetReward(
                train_union_baseline(
                    malign_x, pool, ctx.train_config, ctx.recipe, ctx.grid,
                    np.random.default_rng(np.random.SeedSequence([config.seed, 0xE7])),
                )
            )
    single_w = float(ctx.experiment.get("single_weight",
                                        ctx.guidance.weight * (ens.k if ens else 5)))
    bstep = float(ctx.experiment.get("backward_step_size", 2e-4))

    def guided_fn(reward, guidance):
        return lambda m, g: sample_censored(
            ctx.eps, reward, guidance, ctx.grid, m, g
        ).samples

    reports = {}
    for arm in arms:
        seed_arm = np.random.SeedSequence([config.seed, 0xA0, ARMS.index(arm)])
        seed_int = int(seed_arm.generate_state(1)[0] % (2**31 - 1))
        if arm == "baseline":
            fn = lambda m, g: sample_unguided(ctx.eps, ctx.grid, m, g).samples
            rep = metrics_mod.malign_fraction(fn, annotator, trials, n, seed_int)
        elif arm == "ensemble":
            rep = metrics_mod.malign_fraction(
                guided_fn(ens, ctx.guidance), annotator, trials, n, seed_int
            )
        elif arm == "single":
            guid = GuidanceConfig(mode=ctx.guidance.mode, weight=single_w,
                                  jacobian_mode=ctx.guidance.jacobian_mode)
            rep = metrics_mod.malign_fraction(
                guided_fn(single, guid), annotator, trials, n, seed_int
            )
        elif arm == "union":
            guid = GuidanceConfig(mode=ctx.guidance.mode, weight=single_w,
                                  jacobian_mode=ctx.guidance.jacobian_mode)
            rep = metrics_mod.malign_fraction(
                guided_fn(union, guid), annotator, trials, n, seed_int
            )
        elif arm == "ensemble_universal":
            guid = GuidanceConfig(
                mode=ctx.guidance.mode, weight=ctx.guidance.weight,
                backward_steps=5, backward_step_size=bstep, recurrence=4,
                jacobian_mode=ctx.guidance.jacobian_mode,
            )
            rep = metrics_mod.malign_fraction(
                guided_fn(ens, guid), annotator, trials, n, seed_int
            )
        elif arm == "rejection":
            fn_u = lambda m, g: sample_unguided(ctx.eps, ctx.grid, m, g).samples

            def rejected(m, g, fn_u=fn_u):
                out = rejection_sample(fn_u, ens, 0.5, m, g, presented_cap=200_000)
                return out.samples

            rep = metrics_mod.malign_fraction(rejected, annotator, trials, n, seed_int)
        reports[arm] = rep
    rows = metrics_mod.compare_arms(reports)
    record.write_text("metrics/arms.csv", metrics_mod.rows_to_csv(rows))
    record.write_text(
        "eval_meta.json", json.dumps({"arms": list(arms), "trials": trials, "n": n})
    )
    record.write_ledger(buffer)
    record.finalize()
    return {
        "arms": {a: reports[a].malign_fraction_mean for a in reports},
        "dir": str(record.dir),
    }


# ----------------------------------------------------------------------
# plot data and replay
# ----------------------------------------------------------------------


def drift_field_csv(config: RunConfig, times: list[float], resolution: int = 25) -> str:
    """Guided-vs-censored drift fields on a grid, as CSV text."""
    ctx = build_context(config)
    reward = rewards.AnalyticReward(ctx.world, ctx.schedule, time_dependent=True)
    censored = ctx.world.censored_reference()
    eps_c = AnalyticEps(censored, ctx.schedule)
    lo = ctx.world.means.min(axis=0) - 3.0
    hi = ctx.world.means.max(axis=0) + 3.0
    axes = [np.linspace(lo[j], hi[j], resolution) for j in (0, 1)]
    xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    cfg = GuidanceConfig(mode="time_dependent", weight=1.0)
    lines = ["t,x1,x2,guided_d1,guided_d2,censored_d1,censored_d2"]
    for t in times:
        dg = sampling.reverse_drift(ctx.eps, pts, t, ctx.schedule, reward=reward,
                                    config=cfg)
        dc = sampling.reverse_drift(eps_c, pts, t, ctx.schedule)
        for p, a, b in zip(pts, dg, dc):
            lines.append(
                f"{repr(float(t))},{repr(float(p[0]))},{repr(float(p[1]))},"
                f"{repr(float(a[0]))},{repr(float(a[1]))},"
                f"{repr(float(b[0]))},{repr(float(b[1]))}"
            )
    return "\n".join(lines) + "\n"


def replay(run_dir) -> dict:
    """Re-execute a run from its stored config; compare metric CSVs.

    Works for oracle-annotated runs (the label source is deterministic).
    Returns {"identical": bool, "diffs": [relpaths]}.
    """
    run_dir = Path(run_dir)
    raw = dict(json.loads((run_dir / "config.json").read_text()))
    original = {
        p.relative_to(run_dir): p.read_bytes()
        for p in sorted((run_dir / "metrics").glob("*.csv"))
    }
    replay_dir = run_dir.parent / (run_dir.name + "_replay")
    raw["out_dir"] = str(replay_dir)
    cfg = RunConfig.from_dict(raw)
    kind = _infer_kind(run_dir)
    if kind == "imitate":
        run_imitate(cfg)
    elif kind == "eval":
        meta = json.loads((run_dir / "eval_meta.json").read_text())
        run_eval(cfg, meta["arms"], meta["trials"], meta["n"])
    elif kind == "sample":
        meta = json.loads((run_dir / "eval_meta.json").read_text())
        run_sample(cfg, meta["n"], guided=meta.get("guided", False))
    else:
        raise ValueError(f"cannot infer replayable kind for {run_dir}")
    diffs = []
    for rel, blob in original.items():
        other = replay_dir / rel
        if not other.exists() or other.read_bytes() != blob:
            diffs.append(str(rel))
    return {"identical": not diffs, "diffs": diffs, "replay_dir": str(replay_dir)}


def _infer_kind(run_dir: Path) -> str | None:
    if (run_dir / "metrics" / "rounds.csv").exists():
        return "imitate"
    if (run_dir / "metrics" / "arms.csv").exists():
        return "eval"
    if (run_dir / "metrics" / "sample.csv").exists():
        return "sample"
    return None
