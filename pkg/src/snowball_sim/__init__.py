"""snowball_sim: a deterministic federated-learning simulator.

Simulates FedAvg-style rounds under backdoor (trigger-injection)
poisoning and compares selection defenses: a two-stage election defense
(bottom-up K-means voting, then VAE-scored progressive enlargement),
its voting-only ablation, multi-Krum, plain FedAvg, and an ideal oracle.
"""

__version__ = "0.1.0"

from .config import parse_config
from .engine import ExperimentConfig, run_experiment
from .outputs import write_outputs

__all__ = ["ExperimentConfig", "parse_config", "run_experiment", "write_outputs", "__version__"]
