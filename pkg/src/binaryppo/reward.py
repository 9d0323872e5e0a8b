"""Confidence-weighted reward ``r = kappa * polarity(a, y) * shape(pi_old(a|x))``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractViolation
from .model import DEFAULT_P_MIN

SHAPES = ("literal-log", "one-plus-log", "linear")


@dataclass(frozen=True)
class RewardSpec:
    kappa: float = 1.0
    shape: str = "literal-log"
    p_min: float = DEFAULT_P_MIN

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError(f"reward.kappa must be > 0, got {self.kappa}")
        if self.shape not in SHAPES:
            raise ConfigError(f"reward.shape must be one of {SHAPES}, got {self.shape!r}")
        if not 0.0 < self.p_min < 0.5:
            raise ConfigError(f"reward.p_min must lie in (0, 0.5), got {self.p_min}")


def polarity(a, y):
    """+1 where the action matches the label, -1 otherwise (elementwise)."""
    return np.where(np.asarray(a) == np.asarray(y), 1.0, -1.0)


def shape(spec: RewardSpec, p):
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < spec.p_min) or np.any(p > 1.0):
        raise ContractViolation(f"shape() needs p in [{spec.p_min}, 1]; apply the probability floor first")
    if spec.shape == "literal-log":
        return np.log(p)
    if spec.shape == "one-plus-log":
        return 1.0 + np.log(p)
    return p.copy()


def reward_from_probs(spec: RewardSpec, p_taken, a, y):
    """Reward given the frozen policy's probability of each taken action."""
    return spec.kappa * polarity(a, y) * shape(spec, p_taken)


def reward(spec: RewardSpec, frozen, x, a, y):
    """Rewards for actions ``a`` on inputs ``x``, scored by the frozen policy."""
    p0, p1 = frozen.probs(x)
    a = np.atleast_1d(np.asarray(a))
    p_taken = np.where(a == 1, p1, p0)
    return reward_from_probs(spec, p_taken, a, np.atleast_1d(np.asarray(y)))


def correctness_reward(a, y):
    """Confidence-free +/-1 reward used by the vanilla PPO baseline."""
    return polarity(a, y)
