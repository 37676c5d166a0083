"""Swapping the analytic score for a learned error network.

Trains the tiny error network on draws from the symmetric pair with the
standard denoising regression, then samples unguided from the learned
network and compares against the analytic-score sampler.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from censorlab import (
    AnalyticEps,
    Mlp,
    NetEps,
    NoiseSchedule,
    TrainConfig,
    build_grid,
    make_preset,
    sample_unguided,
    train_score,
)

out_dir = __import__("pathlib").Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

schedule = NoiseSchedule()
grid = build_grid(schedule, 1000)
world = make_preset("symmetric_pair")

rng = np.random.default_rng(0)
x0, _ = world.sample(8000, rng)
net = Mlp((3, 64, 64, 2), head="linear", time_feature=True, seed=1)
result = train_score(
    net, x0, grid,
    TrainConfig(iterations=4000, seed=2, learning_rate=1e-3, weight_decay=0.0),
)
print(f"denoising loss: first-100 mean {result.loss_trace[:100].mean():.3f} "
      f"-> last-100 mean {result.loss_trace[-100:].mean():.3f}")

learned = sample_unguided(NetEps(net), grid, 4000, np.random.default_rng(3))
exact = sample_unguided(AnalyticEps(world, schedule), grid, 4000,
                        np.random.default_rng(3))

fig, axes = plt.subplots(1, 2, figsize=(10, 4.5), sharex=True, sharey=True)
for ax, (name, pts) in zip(
    axes, [("learned error network", learned.samples), ("analytic score", exact.samples)]
):
    ax.scatter(pts[:, 0], pts[:, 1], s=3, alpha=0.4)
    frac = np.mean(world.oracle_annotate(pts) == 0)
    ax.set_title(f"{name} (malign fraction {frac:.3f})")
fig.tight_layout()
fig.savefig(out_dir / "07_learned_score.png", dpi=120)
print(f"wrote {out_dir}/07_learned_score.png")
