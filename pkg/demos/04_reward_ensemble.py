"""Bootstrap reward ensemble on the benign-dominant world.

Collects oracle labels from the uncensored sampler until ten malign
examples are found (everything labeled joins the benign pool), trains the
five-member ensemble, and compares censored generation against the
baseline and a single member at the five-fold guidance weight.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from censorlab import (
    AnalyticEps,
    DataRecipe,
    GuidanceConfig,
    NetReward,
    NoiseSchedule,
    OracleAnnotator,
    TrainConfig,
    build_ensemble,
    build_grid,
    make_preset,
    sample_censored,
    sample_unguided,
)
from censorlab.rewards import FeedbackDataset, collect_until_malign

out_dir = __import__("pathlib").Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

schedule = NoiseSchedule()
grid = build_grid(schedule, 1000)
world = make_preset("benign_dominant")
eps = AnalyticEps(world, schedule)
annotator = OracleAnnotator(world)

buffer = FeedbackDataset()
rng = np.random.default_rng(np.random.SeedSequence([0, 7]))
presented, _ = collect_until_malign(
    lambda m, g: sample_unguided(eps, grid, m, g).samples,
    annotator, 10, 1, buffer, rng, batch_size=32,
)
x, y = buffer.training_arrays()
print(f"labeled {presented} samples to find 10 malign "
      f"(malign rate {np.mean(y == 0):.3f})")

ensemble = build_ensemble(
    x[y == 0][:10], x[y == 1], 5,
    TrainConfig(iterations=1000, alpha=0.02),
    DataRecipe(time_dependent=True),
    grid, np.random.default_rng(np.random.SeedSequence([0, 8])),
)

arms = {
    "baseline (unguided)": sample_unguided(eps, grid, 2000, np.random.default_rng(1)),
    "single member, w=5": sample_censored(
        eps, NetReward(ensemble.members[0].net),
        GuidanceConfig(mode="time_dependent", weight=5.0), grid, 2000,
        np.random.default_rng(2),
    ),
    "ensemble, w=1": sample_censored(
        eps, ensemble, GuidanceConfig(mode="time_dependent", weight=1.0), grid, 2000,
        np.random.default_rng(3),
    ),
}

fig, axes = plt.subplots(1, 3, figsize=(14, 4.3), sharex=True, sharey=True)
for ax, (name, out) in zip(axes, arms.items()):
    frac = np.mean(world.oracle_annotate(out.samples) == 0)
    ax.scatter(out.samples[:, 0], out.samples[:, 1], s=3, alpha=0.4)
    ax.set_title(f"{name}\nmalign fraction {frac:.3f}")
fig.tight_layout()
fig.savefig(out_dir / "04_ensemble_arms.png", dpi=120)
print(f"wrote {out_dir}/04_ensemble_arms.png")
