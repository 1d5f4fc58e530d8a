"""Passive actor-critic learning for continuous linearly-solvable MDPs.

The critic learns Z = exp(-V) and the average-cost factor z_avg from passive
transitions by temporal differences on the linearized Bellman equation; the
actor estimates the control-cost matrix S, giving the policy
u = -S B^T grad V without ever executing exploratory actions.
"""

from .actor import ActorState, ActorTD, act, actor_step, actor_td
from .approximators import (
    MlpZApproximator,
    RbfZApproximator,
    TabularZApproximator,
    ZUnderflowError,
    build_rbf_grid,
    load_snapshot,
    save_snapshot,
    v_and_grad,
)
from .baselines import (
    DiscretizedLMDP,
    discretize,
    estimate_sigma_residual,
    sample_chain,
    solve_principal_eigenpair,
    zlearning_policy,
)
from .config import ExperimentConfig, defaults_for, format_config, load_config, parse_config
from .core import (
    DynamicsModel,
    LMDPProblem,
    PassiveSample,
    SampleSet,
    control_cost,
    policy_action,
    step_controlled,
    step_passive,
    total_cost,
    true_control_cost_matrix,
)
from .critic import CriticState, CriticTD, critic_step, critic_td
from .domains import make_domain, merge_success
from .harness import (
    EvalReport,
    evaluate_average_cost,
    evaluate_merge_success,
    generate_dataset,
    make_policy,
    run_experiment,
    seed_streams,
    train,
)
from .ingest import (
    FoldSplit,
    TrajectoryLog,
    TrajectorySchema,
    generate_replay_dataset,
    kfold_split,
    load_trajectories,
    quantize_lattice,
    reconstruct_passive,
    resample_balanced,
    save_trajectories,
)

__version__ = "0.1.0"

__all__ = [
    "ActorState",
    "ActorTD",
    "CriticState",
    "CriticTD",
    "DiscretizedLMDP",
    "DynamicsModel",
    "EvalReport",
    "ExperimentConfig",
    "FoldSplit",
    "LMDPProblem",
    "MlpZApproximator",
    "PassiveSample",
    "RbfZApproximator",
    "SampleSet",
    "TabularZApproximator",
    "TrajectoryLog",
    "TrajectorySchema",
    "ZUnderflowError",
    "act",
    "actor_step",
    "actor_td",
    "build_rbf_grid",
    "control_cost",
    "critic_step",
    "critic_td",
    "defaults_for",
    "discretize",
    "estimate_sigma_residual",
    "evaluate_average_cost",
    "evaluate_merge_success",
    "format_config",
    "generate_dataset",
    "generate_replay_dataset",
    "kfold_split",
    "load_config",
    "load_snapshot",
    "load_trajectories",
    "make_domain",
    "make_policy",
    "merge_success",
    "parse_config",
    "policy_action",
    "quantize_lattice",
    "reconstruct_passive",
    "resample_balanced",
    "run_experiment",
    "sample_chain",
    "save_snapshot",
    "save_trajectories",
    "seed_streams",
    "solve_principal_eigenpair",
    "step_controlled",
    "step_passive",
    "total_cost",
    "train",
    "true_control_cost_matrix",
    "v_and_grad",
    "zlearning_policy",
]
