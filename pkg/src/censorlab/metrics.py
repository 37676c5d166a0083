"""Precision and recall-proxy metrics with multi-trial reporting.

Precision is the malign fraction of generated samples under an annotator,
reported per trial with a Wilson 95% interval and aggregated as
mean +/- std across trials.  The recall proxy assigns samples to mixture
modes by posterior argmax and reports the total-variation distance between
the benign-mode occupancy vector and the renormalized benign weights of
the censored reference; a sampler that collapses modes shows up as TV
mass even when its precision is perfect.
"""

from __future__ import annotations

import csv
import io
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

_Z95 = 1.959963984540054


def wilson_interval(successes: int, total: int, z: float = _Z95):
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise ValueError("total must be positive")
    p = successes / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * np.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return float(max(0.0, center - half)), float(min(1.0, center + half))


@dataclass
class TrialResult:
    fraction: float
    ci_low: float
    ci_high: float
    n: int


@dataclass
class TrialReport:
    malign_fraction_mean: float
    malign_fraction_std: float
    trials: list[TrialResult]
    occupancy: np.ndarray | None = None
    occupancy_tv: float | None = None
    acceptance_ratio: float | None = None
    labels_used: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0


def malign_fraction(sample_fn, annotator, trials: int, n: int, seed: int) -> TrialReport:
    """Annotate ``trials`` independent batches of ``n`` generated samples.

    ``sample_fn(n, rng)`` produces points; per-trial rngs derive from the
    seed, so reports are reproducible byte-for-byte.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t0 = time.perf_counter()
    results = []
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), trial]))
        pts = sample_fn(n, rng)
        labels, _ = annotator.label(pts)
        malign = int(np.sum(np.asarray(labels) == 0))
        lo, hi = wilson_interval(malign, n)
        results.append(TrialResult(fraction=malign / n, ci_low=lo, ci_high=hi, n=n))
    fracs = np.array([r.fraction for r in results])
    return TrialReport(
        malign_fraction_mean=float(fracs.mean()),
        malign_fraction_std=float(fracs.std(ddof=1)) if trials > 1 else 0.0,
        trials=results,
        wall_clock_seconds=time.perf_counter() - t0,
    )


def mode_occupancy(samples, world, schedule=None):
    """Benign-mode occupancy and TV distance to the censored reference.

    Samples are assigned to components by posterior argmax at t = 0; the
    occupancy vector holds the fraction of all samples landing in each
    benign component (it sums to <= 1; malign-assigned samples account for
    the rest).  TV is 0.5 * L1 against the renormalized benign weights.
    Worlds with modes closer than 4 sigma get a warning and soft
    (responsibility-weighted) assignment instead of argmax.
    """
    from .schedule import NoiseSchedule

    schedule = schedule or NoiseSchedule()
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    _, _, _, joint = world._prepared(samples, 0.0, schedule)
    benign_idx = np.flatnonzero(world.benign_mask)
    if world.mode_separation() >= 4.0:
        assigned = np.argmax(joint, axis=1)
        occupancy = np.array(
            [np.mean(assigned == j) for j in benign_idx]
        )
    else:
        warnings.warn(
            "modes closer than 4 sigma; using soft assignment", RuntimeWarning
        )
        resp = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        occupancy = resp[:, benign_idx].mean(axis=0)
    ref = world.weights[benign_idx] / world.benign_mass
    tv = 0.5 * float(np.abs(occupancy - ref).sum())
    return occupancy, tv


def compare_arms(arm_reports: dict[str, TrialReport]) -> list[dict]:
    """Figure-ready rows (one per arm per trial plus one aggregate per arm).

    Arms keep their given order; arms with no trials are excluded with a
    warning.  Identical reports yield identical rows.
    """
    if len(arm_reports) < 2:
        raise ValueError("need at least two arms to compare")
    rows = []
    for arm, report in arm_reports.items():
        if not report.trials:
            warnings.warn(f"arm {arm!r} has no trials; excluded", RuntimeWarning)
            continue
        for i, tr in enumerate(report.trials):
            rows.append(
                {
                    "arm": arm,
                    "trial": i,
                    "malign_fraction": tr.fraction,
                    "ci_low": tr.ci_low,
                    "ci_high": tr.ci_high,
                    "n": tr.n,
                }
            )
        rows.append(
            {
                "arm": arm,
                "trial": "mean",
                "malign_fraction": report.malign_fraction_mean,
                "ci_low": "",
                "ci_high": "",
                "n": sum(tr.n for tr in report.trials),
                "std": report.malign_fraction_std,
            }
        )
    return rows


CSV_FIELDS = ["arm", "trial", "malign_fraction", "ci_low", "ci_high", "n", "std"]


def rows_to_csv(rows: list[dict]) -> str:
    """Deterministic CSV text; floats keep full round-trip precision."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, restval="", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(float(v))  # numpy scalars repr differently; normalize
    return v
