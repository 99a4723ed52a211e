"""Differentially private distributed intrusion detection with consensus ADMM."""
from .consensus import NodeState, Trajectory, run
from .dataset import NodeDataset, partition, synthesize
from .dvp import compute_privacy_params, ddp_ratio_check, run_private, sample_noise
from .harness import ExperimentConfig, load_config, run_experiment, sweep_alpha
from .objective import Hyper
from .topology import Topology, TopologySchedule, build_topology
from .tuning import PrivacyUtility, fit_security_curve, optimize_alpha, tune

__all__ = [
    "ExperimentConfig", "Hyper", "NodeDataset", "NodeState", "PrivacyUtility", "Topology",
    "TopologySchedule", "Trajectory", "build_topology", "compute_privacy_params",
    "ddp_ratio_check", "fit_security_curve", "load_config", "optimize_alpha", "partition",
    "run", "run_experiment", "run_private", "sample_noise", "sweep_alpha", "synthesize", "tune",
]
