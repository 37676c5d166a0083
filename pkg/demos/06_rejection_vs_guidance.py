"""Rejection filtering vs guided transport with the same reward model.

On the dense-ring world the benign/malign boundary is graded, so a
modestly trained model's threshold filter keeps whatever sits on the
wrong side of its wobbly boundary, while guidance carries those samples
to high-confidence regions instead.  Also reports the acceptance-ratio
cost of rejection.
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
    build_grid,
    make_preset,
    rejection_sample,
    sample_censored,
    sample_unguided,
)
from censorlab.rewards import FeedbackDataset, collect_balanced, train_reward

out_dir = __import__("pathlib").Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

schedule = NoiseSchedule()
grid = build_grid(schedule, 1000)
world = make_preset("bedroom_like")
eps = AnalyticEps(world, schedule)
annotator = OracleAnnotator(world)

buffer = FeedbackDataset()
rng = np.random.default_rng(np.random.SeedSequence([0, 91]))
collect_balanced(
    lambda m, g: sample_unguided(eps, grid, m, g).samples,
    annotator, (30, 30), 1, buffer, rng, batch_size=128,
)
x, y = buffer.training_arrays(kept_only=True)
net = train_reward(
    x, y, grid, TrainConfig(iterations=1000, alpha=1.0),
    DataRecipe(time_dependent=False, augment=False), seed=1,
)
reward = NetReward(net)

guided = sample_censored(
    eps, reward, GuidanceConfig(mode="time_independent", weight=10.0),
    grid, 2000, np.random.default_rng(10),
)
rejected = rejection_sample(
    lambda m, g: sample_unguided(eps, grid, m, g).samples,
    reward, 0.5, 2000, np.random.default_rng(11), presented_cap=100_000,
)

frac_g = np.mean(world.oracle_annotate(guided.samples) == 0)
frac_r = np.mean(world.oracle_annotate(rejected.samples) == 0)
print(f"guided censoring:   malign fraction {frac_g:.4f}")
print(f"rejection tau=0.5:  malign fraction {frac_r:.4f} "
      f"(acceptance ratio {rejected.acceptance_ratio:.3f})")

fig, axes = plt.subplots(1, 2, figsize=(11, 5), sharex=True, sharey=True)
for ax, (name, pts, frac) in zip(
    axes,
    [("guided transport", guided.samples, frac_g),
     ("rejection filter", rejected.samples, frac_r)],
):
    labels = world.oracle_annotate(pts)
    ax.scatter(pts[labels == 1, 0], pts[labels == 1, 1], s=3, alpha=0.4)
    ax.scatter(pts[labels == 0, 0], pts[labels == 0, 1], s=6, color="tab:red")
    ax.set_title(f"{name}: malign fraction {frac:.4f}")
fig.tight_layout()
fig.savefig(out_dir / "06_rejection_vs_guidance.png", dpi=120)
print(f"wrote {out_dir}/06_rejection_vs_guidance.png")
