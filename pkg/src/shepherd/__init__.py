"""Sparse indirect density control on a periodic domain.

A handful of velocity-controlled herders shape the density of a diffusing
target population. The package couples the herder kinematics to a
Fokker-Planck solver, scores herder placements through a closed-form
stationary density, trains a positioning policy with PPO, adapts the
interaction gain online, and ships the experiment harness that measures all
of it.
"""

from .config import Config, EnvConfig, PpoHyperparams, SimConfig, load_config
from .env import ShepherdEnv, StepResult, encode_observation
from .fokker_planck import PdeConfig, pde_step, run_to_steady_state, simulate_window
from .geometry import (
    DensityField,
    PeriodicGrid,
    integrate,
    l2_norm,
    wrap,
    wrapped_signed_distance,
)
from .kernel import (
    HerderConfiguration,
    KernelParams,
    kernel_antiderivative,
    kernel_eval,
    velocity_field,
)
from .micro import (
    HerderState,
    TargetEnsemble,
    empirical_density,
    herder_step,
    target_sde_step,
)
from .ppo import (
    GaussianPolicy,
    NetworkSpec,
    RolloutBuffer,
    compute_gae,
    load_checkpoint,
    load_policy,
    ppo_update,
    sample_action,
    save_checkpoint,
    train,
)
from .steady_state import (
    GainState,
    adapt_gain_step,
    desired_distribution,
    ss_error,
    steady_state_density,
)

__version__ = "0.1.0"
