"""Forward diffusion at a glance.

Noises draws from a labeled two-mode world to a few grid times and plots
how the clouds merge into an isotropic Gaussian, next to the schedule's
closed-form signal coefficient.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from censorlab import NoiseSchedule, build_grid, forward_noise, make_preset

out_dir = __import__("pathlib").Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

schedule = NoiseSchedule()
grid = build_grid(schedule, 1000)
world = make_preset("symmetric_pair")
rng = np.random.default_rng(0)

x0, ids = world.sample(2000, rng)

fig, axes = plt.subplots(1, 5, figsize=(16, 3.2), sharex=True, sharey=True)
for ax, t in zip(axes, [0.0, 0.25, 0.5, 0.75, 1.0]):
    eps = rng.standard_normal(x0.shape)
    xt = forward_noise(x0, t, eps, schedule)
    ax.scatter(xt[:, 0], xt[:, 1], c=np.where(ids == 0, "tab:blue", "tab:red"),
               s=3, alpha=0.4)
    ax.set_title(f"t = {t:.2f}   a(t) = {float(schedule.alpha_bar(t)):.3g}")
    ax.set_xlim(-7, 7)
    ax.set_ylim(-7, 7)
fig.suptitle("Forward noising of the symmetric pair (blue benign, red malign)")
fig.tight_layout()
fig.savefig(out_dir / "01_forward_clouds.png", dpi=120)

fig, ax = plt.subplots(figsize=(5, 3.2))
ts = np.linspace(0, 1, 400)
ax.semilogy(ts, schedule.alpha_bar(ts))
ax.set_xlabel("t")
ax.set_ylabel("a(t)")
ax.set_title("Signal coefficient of the linear-rate schedule")
fig.tight_layout()
fig.savefig(out_dir / "01_alpha_bar.png", dpi=120)
print(f"wrote {out_dir}/01_forward_clouds.png and 01_alpha_bar.png")
