"""Training configuration and its flat dotted-key representation.

Recognised keys::

    method, epochs, schedule, batch_size, learning_rate, optimizer, sampler, seed,
    loss.alpha, loss.beta, loss.gamma, loss.clip_epsilon, loss.normalize_advantage,
    reward.kappa, reward.shape, reward.p_min, model.hidden

Config files are YAML mappings, either flat (``loss.alpha: 0.5``) or nested.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .errors import ConfigError
from .model import EXPLOIT, EXPLORE
from .objective import LossWeights
from .reward import RewardSpec

METHODS = ("binaryppo", "vanilla_ppo", "sft")
OPTIMIZERS = ("adam", "sgd")
SAMPLERS = ("balanced", "natural")
# Training default; the bare RewardSpec keeps the literal log form.
DEFAULT_SHAPE = "one-plus-log"


@dataclass(frozen=True)
class TrainConfig:
    method: str = "binaryppo"
    epochs: int = 10
    schedule: str = "ee"
    batch_size: int = 256
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    sampler: str = "balanced"
    seed: int = 0
    hidden: tuple = (32, 32)
    loss: LossWeights = field(default_factory=LossWeights)
    reward: RewardSpec = field(default_factory=lambda: RewardSpec(shape=DEFAULT_SHAPE))

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if int(self.epochs) < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError(f"model.hidden must list positive layer widths, got {self.hidden}")
        self.modes()

    def modes(self):
        """Per-epoch sampling mode implied by ``schedule``."""
        sched = self.schedule.strip().lower()
        if sched == "ee":
            n_explore = self.epochs // 2
            return [EXPLORE] * n_explore + [EXPLOIT] * (self.epochs - n_explore)
        if sched == "pe":
            return [EXPLORE] * self.epochs
        modes = [m.strip() for m in sched.split(",") if m.strip()]
        if any(m not in (EXPLORE, EXPLOIT) for m in modes):
            raise ConfigError(f"schedule must be 'ee', 'pe' or a comma list of explore/exploit, got {self.schedule!r}")
        if len(modes) != self.epochs:
            raise ConfigError(f"custom schedule lists {len(modes)} epochs but epochs = {self.epochs}")
        return modes

    def to_flat(self):
        return {
            "method": self.method,
            "epochs": self.epochs,
            "schedule": self.schedule,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "optimizer": self.optimizer,
            "sampler": self.sampler,
            "seed": self.seed,
            "loss.alpha": self.loss.alpha,
            "loss.beta": self.loss.beta,
            "loss.gamma": self.loss.gamma,
            "loss.clip_epsilon": self.loss.clip_epsilon,
            "loss.normalize_advantage": self.loss.normalize_advantage,
            "reward.kappa": self.reward.kappa,
            "reward.shape": self.reward.shape,
            "reward.p_min": self.reward.p_min,
            "model.hidden": list(self.hidden),
        }

    @classmethod
    def from_flat(cls, flat):
        return cls().override(flat)

    def override(self, flat):
        """New config with the given dotted keys replaced (``None`` values ignored)."""
        top, loss, rew = {}, {}, {}
        for key, value in flat.items():
            if value is None:
                continue
            try:
                if key in _TOP:
                    top[key] = _TOP[key](value)
                elif key == "model.hidden":
                    top["hidden"] = _parse_hidden(value)
                elif key.startswith("loss.") and key[5:] in _LOSS:
                    loss[key[5:]] = _LOSS[key[5:]](value)
                elif key.startswith("reward.") and key[7:] in _REWARD:
                    rew[key[7:]] = _REWARD[key[7:]](value)
                else:
                    raise ConfigError(f"unknown config key {key!r}")
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        return replace(self, loss=replace(self.loss, **loss), reward=replace(self.reward, **rew), **top)


def _parse_bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(v)


def _parse_hidden(v):
    if isinstance(v, str):
        v = [t for t in v.replace(" ", "").split(",") if t]
    return tuple(int(t) for t in v)


_TOP = {"method": str, "epochs": int, "schedule": str, "batch_size": int, "learning_rate": float,
        "optimizer": str, "sampler": str, "seed": int}
_LOSS = {"alpha": float, "beta": float, "gamma": float, "clip_epsilon": float, "normalize_advantage": _parse_bool}
_REWARD = {"kappa": float, "shape": str, "p_min": float}


def flatten(mapping, prefix=""):
    out = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def load_config_file(path):
    """Read a YAML config file into a flat dotted-key dict."""
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return flatten(data)
