"""Exact scores and benign probabilities of a mixture world.

Contours of log p_t and the time-dependent benign probability r_t for the
benign-dominant world at three diffusion times, plus the score field.
Everything here is closed form; these are the oracles the learned pieces
are tested against.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from censorlab import NoiseSchedule, make_preset

out_dir = __import__("pathlib").Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

schedule = NoiseSchedule()
world = make_preset("benign_dominant")

axis = np.linspace(-9, 9, 220)
xx, yy = np.meshgrid(axis, axis)
pts = np.stack([xx.ravel(), yy.ravel()], axis=1)

fig, axes = plt.subplots(2, 3, figsize=(13, 8))
for col, t in enumerate([0.0, 0.4, 0.8]):
    logp = world.log_density_t(pts, t, schedule).reshape(xx.shape)
    r = world.reward_exact_t(pts, t, schedule).reshape(xx.shape)
    axes[0, col].contourf(xx, yy, logp, levels=30, cmap="viridis")
    axes[0, col].set_title(f"log p_t, t = {t}")
    im = axes[1, col].contourf(xx, yy, r, levels=np.linspace(0, 1, 21), cmap="RdYlGn")
    axes[1, col].set_title(f"benign probability r_t, t = {t}")
fig.colorbar(im, ax=axes[1, :], shrink=0.8, label="r_t(x)")
fig.savefig(out_dir / "02_density_reward.png", dpi=120)

# score field at t = 0.3 (subsampled quiver)
sub = np.linspace(-9, 9, 28)
sx, sy = np.meshgrid(sub, sub)
spts = np.stack([sx.ravel(), sy.ravel()], axis=1)
score = world.score_t(spts, 0.3, schedule)
fig, ax = plt.subplots(figsize=(6, 6))
ax.quiver(spts[:, 0], spts[:, 1], score[:, 0], score[:, 1], angles="xy")
ax.set_title("Exact score of the t = 0.3 marginal")
fig.tight_layout()
fig.savefig(out_dir / "02_score_field.png", dpi=120)
print(f"wrote {out_dir}/02_density_reward.png and 02_score_field.png")
