"""Confidence-weighted offline policy optimization for binary classification."""
from . import backend
from .config import TrainConfig
from .data import Dataset, NoiseSpec, gen_blobs, gen_rings, gen_xor, load_dataset, save_dataset, split
from .experiment import TaskSpec, compare, noisy_imbalanced_suite
from .evaluate import accuracy, auprc, auroc, confidence_bins
from .linalg import Rng
from .model import FrozenPolicy, Policy, ValueFunction, snapshot
from .objective import LossWeights, total_loss
from .reward import RewardSpec
from .trainer import train, train_sft, train_vanilla_ppo

__version__ = "0.1.0"
BACKEND = backend.NAME

__all__ = [
    "BACKEND", "Dataset", "FrozenPolicy", "LossWeights", "NoiseSpec", "Policy", "RewardSpec", "Rng",
    "TaskSpec",    "TrainConfig", "ValueFunction", "accuracy", "auprc", "auroc", "confidence_bins", "gen_blobs",
    "gen_rings", "gen_xor", "load_dataset", "save_dataset", "snapshot", "split", "total_loss", "train", "compare", "noisy_imbalanced_suite",
    "train_sft", "train_vanilla_ppo",
]
