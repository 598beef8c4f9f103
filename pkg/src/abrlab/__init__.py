"""Adaptive-bitrate streaming RL testbed with plasticity telemetry and neuron resets."""

from .agent import AgentBundle, PPOConfig, collect_rollout, compute_gae, make_bundle, ppo_update
from .env import QoEWeights, Session, SessionConfig, SessionState, StepOutcome, episode_qoe
from .harness import ExperimentConfig, RunSummary, compute_iqm, load_config, run_experiment
from .net import DenseNetwork, LayerSpec, init_network
from .plasticity import NeuronActivityReport, build_report, overlap_coefficient
from .resin import ResetEvent, ResinConfig, ResinController
from .trace import BandwidthProfile, BandwidthTrace, RegimeSchedule, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AgentBundle",
    "BandwidthProfile",
    "BandwidthTrace",
    "DenseNetwork",
    "ExperimentConfig",
    "LayerSpec",
    "NeuronActivityReport",
    "PPOConfig",
    "QoEWeights",
    "RegimeSchedule",
    "ResetEvent",
    "ResinConfig",
    "ResinController",
    "RunSummary",
    "Session",
    "SessionConfig",
    "SessionState",
    "StepOutcome",
    "build_report",
    "collect_rollout",
    "compute_gae",
    "compute_iqm",
    "episode_qoe",
    "generate_synthetic",
    "init_network",
    "load_config",
    "make_bundle",
    "overlap_coefficient",
    "ppo_update",
    "run_experiment",
]
