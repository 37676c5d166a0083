"""Labeled 2-D Gaussian-mixture worlds with exact scores and rewards.

A :class:`LabeledMixture` is a ground-truth data distribution whose
components carry benign/malign labels.  Because every forward-diffused
marginal of a Gaussian mixture is again a Gaussian mixture,

    p_t = sum_i w_i N(sqrt(a_t) mu_i,  a_t Sigma_i + (1 - a_t) I),

the time-t score, its Jacobian (the Hessian of log p_t), and the
time-dependent benign probability

    r_t(x) = P(benign | X_t = x)
           = sum_{benign i} w_i N_i(x; t) / sum_i w_i N_i(x; t)

are all available in closed form.  These exact quantities are the oracles
against which every learned component of the package is checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtr

from .schedule import NoiseSchedule

BENIGN, MALIGN = 1, 0

_LOG_2PI = np.log(2.0 * np.pi)
_REWARD_HI = np.nextafter(1.0, 0.0)
_REWARD_LO = np.nextafter(0.0, 1.0)


@dataclass(frozen=True)
class Component:
    weight: float
    mean: np.ndarray
    cov: np.ndarray
    label: str  # "benign" | "malign"

    @property
    def benign(self) -> bool:
        return self.label == "benign"


class LabeledMixture:
    """Gaussian mixture with per-component benign/malign labels.

    Components are given as dicts {weight, mean, sigma | cov, label}.
    Isotropic components may pass a scalar ``sigma``; general SPD
    covariances go through ``cov``.
    """

    def __init__(self, components: list[dict], dim: int = 2):
        if not components:
            raise ValueError("mixture needs at least one component")
        comps = []
        for c in components:
            mean = np.asarray(c["mean"], dtype=float)
            if mean.shape != (dim,):
                raise ValueError(f"mean shape {mean.shape} != ({dim},)")
            if "cov" in c:
                cov = np.asarray(c["cov"], dtype=float)
            else:
                cov = float(c.get("sigma", 1.0)) ** 2 * np.eye(dim)
            if cov.shape != (dim, dim) or not np.allclose(cov, cov.T):
                raise ValueError("covariance must be a symmetric (d, d) matrix")
            label = c["label"]
            if label not in ("benign", "malign"):
                raise ValueError(f"label must be benign|malign, got {label!r}")
            w = float(c["weight"])
            if w <= 0:
                raise ValueError("component weights must be positive")
            comps.append(Component(w, mean, cov, label))
        total = sum(c.weight for c in comps)
        if not np.isclose(total, 1.0, atol=1e-9):
            raise ValueError(f"weights must sum to 1, got {total}")
        if not any(c.benign for c in comps):
            raise ValueError("mixture needs at least one benign component")

        self.dim = dim
        self.components = tuple(comps)
        self.weights = np.array([c.weight for c in comps])
        self.means = np.stack([c.mean for c in comps])
        self.covs = np.stack([c.cov for c in comps])
        self.benign_mask = np.array([c.benign for c in comps])
        # eigendecomposition per component; time-t covariances share eigenvectors
        eigvals, eigvecs = [], []
        for c in comps:
            vals, vecs = np.linalg.eigh(c.cov)
            if np.any(vals <= 0):
                raise ValueError("covariances must be positive definite")
            eigvals.append(vals)
            eigvecs.append(vecs)
        self._eigvals = np.stack(eigvals)  # (K, d)
        self._eigvecs = np.stack(eigvecs)  # (K, d, d)

    # ------------------------------------------------------------------
    # basic structure
    # ------------------------------------------------------------------

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def benign_mass(self) -> float:
        return float(self.weights[self.benign_mask].sum())

    @property
    def malign_mass(self) -> float:
        return 1.0 - self.benign_mass

    def to_records(self) -> list[dict]:
        recs = []
        for c in self.components:
            rec = {"weight": c.weight, "mean": c.mean.tolist(), "label": c.label}
            iso = c.cov[0, 0]
            if np.allclose(c.cov, iso * np.eye(self.dim)):
                rec["sigma"] = float(np.sqrt(iso))
            else:
                rec["cov"] = c.cov.tolist()
            recs.append(rec)
        return recs

    @classmethod
    def from_records(cls, records: list[dict], dim: int = 2) -> "LabeledMixture":
        return cls(records, dim=dim)

    # ------------------------------------------------------------------
    # time-t mixture internals
    # ------------------------------------------------------------------

    def _marginal_params(self, t: float, schedule: NoiseSchedule):
        """Per-component (mean, eigvals) of the time-t marginal."""
        a = float(schedule.alpha_bar(t))
        means_t = np.sqrt(a) * self.means  # (K, d)
        vals_t = a * self._eigvals + (1.0 - a)  # (K, d)
        return means_t, vals_t

    def _component_log_pdfs(self, x: np.ndarray, means_t, vals_t):
        """log N(x; mean_k, cov_k(t)) for all components; x is (n, d)."""
        # rotate into each component's eigenbasis: y = V^T (x - m)
        diffs = x[:, None, :] - means_t[None, :, :]  # (n, K, d)
        y = np.einsum("nkd,kde->nke", diffs, self._eigvecs)
        quad = np.sum(y * y / vals_t[None, :, :], axis=2)  # (n, K)
        logdet = np.sum(np.log(vals_t), axis=1)  # (K,)
        return -0.5 * (quad + logdet + self.dim * _LOG_2PI)

    def _component_scores(self, x: np.ndarray, means_t, vals_t):
        """Per-component score -C_k(t)^{-1} (x - m_k); (n, K, d)."""
        diffs = x[:, None, :] - means_t[None, :, :]
        y = np.einsum("nkd,kde->nke", diffs, self._eigvecs)
        y = y / vals_t[None, :, :]
        return -np.einsum("nke,kde->nkd", y, self._eigvecs)

    def _prepared(self, x, t: float, schedule: NoiseSchedule):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        means_t, vals_t = self._marginal_params(t, schedule)
        logpdf = self._component_log_pdfs(x, means_t, vals_t)
        joint = np.log(self.weights)[None, :] + logpdf  # (n, K)
        return x, means_t, vals_t, joint

    # ------------------------------------------------------------------
    # public exact quantities
    # ------------------------------------------------------------------

    def log_density_t(self, x, t: float, schedule: NoiseSchedule):
        """log p_t(x); x may be (d,) or (n, d)."""
        single = np.asarray(x).ndim == 1
        _, _, _, joint = self._prepared(x, t, schedule)
        out = logsumexp(joint, axis=1)
        return float(out[0]) if single else out

    def score_t(self, x, t: float, schedule: NoiseSchedule):
        """Exact score of the time-t marginal, grad_x log p_t(x)."""
        single = np.asarray(x).ndim == 1
        x, means_t, vals_t, joint = self._prepared(x, t, schedule)
        resp = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))  # (n, K)
        comp_scores = self._component_scores(x, means_t, vals_t)
        out = np.einsum("nk,nkd->nd", resp, comp_scores)
        return out[0] if single else out

    def score_jacobian_t(self, x, t: float, schedule: NoiseSchedule):
        """Hessian of log p_t at x; bitwise symmetric (d, d) (or (n, d, d)).

        H = sum_k r_k (g_k g_k^T - Lambda_k) - s s^T with responsibilities
        r_k and per-component scores g_k; every term is assembled from
        outer products of identical vectors so the result is symmetric to
        the last bit.
        """
        single = np.asarray(x).ndim == 1
        x, means_t, vals_t, joint = self._prepared(x, t, schedule)
        resp = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        g = self._component_scores(x, means_t, vals_t)  # (n, K, d)
        u = np.sqrt(resp)[:, :, None] * g
        outer = np.einsum("nkd,nke->nde", u, u)
        # Lambda_k = W_k W_k^T with W = V diag(1/sqrt(vals))
        w = self._eigvecs / np.sqrt(vals_t)[:, None, :]
        lam = np.einsum("kde,kfe->kdf", w, w)
        s = np.einsum("nk,nkd->nd", resp, g)
        out = outer - np.einsum("nk,kde->nde", resp, lam) - np.einsum(
            "nd,ne->nde", s, s
        )
        return out[0] if single else out

    def log_reward_t(self, x, t: float, schedule: NoiseSchedule):
        """log r_t(x) = log P(benign | X_t = x), computed in log domain."""
        single = np.asarray(x).ndim == 1
        _, _, _, joint = self._prepared(x, t, schedule)
        num = logsumexp(joint[:, self.benign_mask], axis=1)
        den = logsumexp(joint, axis=1)
        out = num - den
        return float(out[0]) if single else out

    def reward_exact_t(self, x, t: float, schedule: NoiseSchedule):
        """Exact benign probability r_t(x), strictly inside (0, 1)."""
        r = np.exp(self.log_reward_t(x, t, schedule))
        return np.clip(r, _REWARD_LO, _REWARD_HI)

    def log_reward_grad_t(self, x, t: float, schedule: NoiseSchedule):
        """grad_x log r_t(x) = score of benign sub-mixture minus full score."""
        single = np.asarray(x).ndim == 1
        x, means_t, vals_t, joint = self._prepared(x, t, schedule)
        comp_scores = self._component_scores(x, means_t, vals_t)
        resp_all = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        jb = joint[:, self.benign_mask]
        resp_b = np.exp(jb - logsumexp(jb, axis=1, keepdims=True))
        s_all = np.einsum("nk,nkd->nd", resp_all, comp_scores)
        s_ben = np.einsum("nk,nkd->nd", resp_b, comp_scores[:, self.benign_mask])
        out = s_ben - s_all
        return out[0] if single else out

    # ------------------------------------------------------------------
    # sampling / annotation / censored reference
    # ------------------------------------------------------------------

    def sample(self, n: int, rng: np.random.Generator):
        """Draw n points; returns (points (n, d), component_ids (n,))."""
        if n < 1:
            raise ValueError("n must be >= 1")
        ids = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        chols = np.linalg.cholesky(self.covs)
        points = self.means[ids] + np.einsum("nde,ne->nd", chols[ids], z)
        return points, ids

    def oracle_annotate(self, points, schedule: NoiseSchedule | None = None):
        """Deterministic labels: 1 (benign) iff r(x) >= 0.5 at t = 0.

        The threshold is applied as a benign-vs-malign log-mass comparison
        so that exactly symmetric boundary points tie to benign instead of
        falling to float rounding.
        """
        schedule = schedule or NoiseSchedule()
        if self.benign_mask.all():
            return np.ones(np.atleast_2d(points).shape[0], dtype=int)
        _, _, _, joint = self._prepared(points, 0.0, schedule)
        lse_b = logsumexp(joint[:, self.benign_mask], axis=1)
        lse_m = logsumexp(joint[:, ~self.benign_mask], axis=1)
        return (lse_b >= lse_m).astype(int)

    def censored_reference(self) -> "LabeledMixture":
        """The benign sub-mixture with weights renormalized by benign mass."""
        b = self.benign_mass
        recs = [
            {**rec, "weight": rec["weight"] / b}
            for rec in self.to_records()
            if rec["label"] == "benign"
        ]
        return LabeledMixture(recs, dim=self.dim)

    def mode_separation(self) -> float:
        """Smallest pairwise mode distance in units of the larger sigma."""
        if self.n_components < 2:
            return np.inf
        sig = np.sqrt(self._eigvals.max(axis=1))
        sep = np.inf
        for i in range(self.n_components):
            for j in range(i + 1, self.n_components):
                dist = np.linalg.norm(self.means[i] - self.means[j])
                sep = min(sep, dist / max(sig[i], sig[j]))
        return float(sep)


def sample(world: LabeledMixture, n: int, rng: np.random.Generator):
    return world.sample(n, rng)


def oracle_annotate(world: LabeledMixture, points):
    return world.oracle_annotate(points)


def censored_reference(world: LabeledMixture) -> LabeledMixture:
    return world.censored_reference()


# ----------------------------------------------------------------------
# brute-force integration oracle
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class GridOracle:
    """Midpoint-rule integrator over a rectangle, for exact cross-checks."""

    lo: np.ndarray
    hi: np.ndarray
    resolution: int = 512
    _centers: np.ndarray = field(repr=False, default=None)
    _cell_area: float = field(repr=False, default=0.0)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (2,) or hi.shape != (2,) or np.any(hi <= lo):
            raise ValueError("box must be a non-degenerate rectangle in R^2")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        h = (hi - lo) / self.resolution
        axes = [lo[j] + h[j] * (np.arange(self.resolution) + 0.5) for j in (0, 1)]
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        centers = np.stack([xx.ravel(), yy.ravel()], axis=1)
        object.__setattr__(self, "_centers", centers)
        object.__setattr__(self, "_cell_area", float(h[0] * h[1]))

    @classmethod
    def for_world(
        cls,
        world: LabeledMixture,
        margin_sigmas: float = 7.0,
        resolution: int = 512,
        max_missing_mass: float = 1e-6,
    ) -> "GridOracle":
        sig = np.sqrt(world._eigvals.max(axis=1))
        lo = (world.means - margin_sigmas * sig[:, None]).min(axis=0)
        hi = (world.means + margin_sigmas * sig[:, None]).max(axis=0)
        oracle = cls(lo, hi, resolution)
        missing = oracle.missing_mass(world)
        if missing > max_missing_mass:
            raise ValueError(
                f"box misses {missing:.2e} of mixture mass (> {max_missing_mass:.0e})"
            )
        return oracle

    def missing_mass(self, world: LabeledMixture) -> float:
        """Analytic upper bound on mixture mass outside the box.

        Per component and axis, the coordinate marginal is normal with the
        diagonal covariance entry; a union bound over the two axes is exact
        enough for the 1e-6 coverage check.
        """
        out = 0.0
        for c in world.components:
            bound = 0.0
            for j in range(2):
                sd = np.sqrt(c.cov[j, j])
                bound += ndtr((self.lo[j] - c.mean[j]) / sd)
                bound += 1.0 - ndtr((self.hi[j] - c.mean[j]) / sd)
            out += c.weight * min(1.0, bound)
        return float(out)

    def expectation(self, f) -> float:
        """Midpoint-rule integral of a scalar field over the box."""
        values = np.asarray(f(self._centers), dtype=float)
        if values.shape != (self._centers.shape[0],):
            raise ValueError("field must return one scalar per grid point")
        return float(values.sum() * self._cell_area)


def grid_expectation(oracle: GridOracle, f) -> float:
    return oracle.expectation(f)


# ----------------------------------------------------------------------
# benchmark worlds
# ----------------------------------------------------------------------


def _ring_world(labels: list[str], masses, radius=6.0, sigma=0.5):
    """Equally spaced ring modes.

    ``masses`` is either {label: total mass} (split evenly within a label)
    or an explicit per-mode weight list.
    """
    n = len(labels)
    if isinstance(masses, dict):
        counts = {lab: labels.count(lab) for lab in set(labels)}
        weights = [masses[lab] / counts[lab] for lab in labels]
    else:
        weights = list(masses)
    comps = []
    for k, (lab, w) in enumerate(zip(labels, weights)):
        angle = 2.0 * np.pi * k / n
        comps.append(
            {
                "weight": w,
                "mean": [radius * np.cos(angle), radius * np.sin(angle)],
                "sigma": sigma,
                "label": lab,
            }
        )
    return LabeledMixture(comps)


def make_preset(name: str) -> LabeledMixture:
    """Benchmark worlds covering the benign- and malign-dominant regimes."""
    if name == "symmetric_pair":
        return LabeledMixture(
            [
                {"weight": 0.5, "mean": [3.0, 0.0], "sigma": 0.5, "label": "benign"},
                {"weight": 0.5, "mean": [-3.0, 0.0], "sigma": 0.5, "label": "malign"},
            ]
        )
    if name == "benign_dominant":
        # 11.9% malign: one malign mode among eight on the ring
        labels = ["malign"] + ["benign"] * 7
        return _ring_world(labels, {"malign": 0.119, "benign": 0.881})
    if name == "malign_dominant":
        # 68.6% malign: one heavy malign concept plus seven light ones.
        # Censoring the heavy mode shifts the residual stream toward the
        # light modes, which is what multi-round feedback is for.
        labels = ["malign"] * 12
        for i in (2, 5, 8, 11):
            labels[i] = "benign"
        light = (0.686 - 0.50) / 7
        weights = [0.314 / 4 if lab == "benign" else light for lab in labels]
        weights[0] = 0.50
        return _ring_world(labels, weights)
    if name == "bedroom_like":
        # 12.6% malign over six of thirty-two ring modes; dense spacing
        # makes neighboring modes overlap, so the benign/malign boundary is
        # graded rather than crisp (the hardest preset)
        labels = ["benign"] * 32
        for i in (0, 5, 11, 16, 22, 27):
            labels[i] = "malign"
        weights = [0.126 / 6 if lab == "malign" else (1 - 0.126) / 26 for lab in labels]
        return _ring_world(labels, weights)
    raise KeyError(f"unknown preset {name!r}; see list_presets()")


def list_presets() -> list[str]:
    return ["symmetric_pair", "benign_dominant", "malign_dominant", "bedroom_like"]
