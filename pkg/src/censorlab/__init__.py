"""Desk-scale laboratory for censored sampling of diffusion models.

Analytic Gaussian-mixture worlds provide exact scores and benign
probabilities; tiny MLP reward models are trained from small labeled
sets; guided reverse-SDE samplers censor generation against those
rewards.  Everything is checkable against closed-form oracles.
"""

from .nets import Mlp, TrainConfig, bce_alpha, train, train_score
from .rewards import (
    AnalyticReward,
    DataRecipe,
    FeedbackDataset,
    FeedbackRecord,
    NetReward,
    OracleAnnotator,
    RewardEnsemble,
    augment,
    build_ensemble,
    imitation_loop,
    make_noisy_dataset,
    non_imitation_baseline,
    train_union_baseline,
)
from .sampling import (
    AnalyticEps,
    GuidanceConfig,
    NetEps,
    SamplerOutput,
    backward_refine,
    guided_eps_timedep,
    guided_eps_timeindep,
    recurrent_step,
    rejection_sample,
    sample_censored,
    sample_unguided,
    xhat0,
)
from .schedule import DiffusionGrid, NoiseSchedule, alpha_bar, build_grid, forward_noise
from .world import GridOracle, LabeledMixture, grid_expectation, list_presets, make_preset

__version__ = "0.1.0"
