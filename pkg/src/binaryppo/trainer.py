"""Training loops: BinaryPPO, the vanilla PPO baseline and SFT.

Per epoch: draw minibatches (class-balanced or natural order); for every
example take an action from the frozen policy (sampled when exploring, greedy
when exploiting), score it with the reward, form ``A = r - V(x)``, and take one
optimizer step on the composite loss per minibatch. The frozen policy is
refreshed only at epoch boundaries.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import TrainConfig
from .errors import ConfigError, ContractViolation, NonFiniteLossError
from .evaluate import accuracy, confidence_bins
from .linalg import Rng
from .model import Policy, ValueFunction, sample_actions, snapshot
from .objective import LossBreakdown, StepBatch, entropy, kl_divergence, supervised_loss, total_loss
from .reward import correctness_reward, reward_from_probs

N_EPOCH_BINS = 10


# -- optimizers --------------------------------------------------------------

class SGD:
    def __init__(self, params, lr):
        self.params = list(params)
        self.lr = lr
        self.t = 0

    def step(self, grads):
        _check_shapes(self.params, grads)
        self.t += 1
        for p, g in zip(self.params, grads):
            p -= self.lr * g


class Adam:
    """Bias-corrected Adam; moments mirror the parameter shapes."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        _check_shapes(self.params, grads)
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _check_shapes(params, grads):
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ContractViolation("gradient shapes do not match parameter shapes")


def make_optimizer(name, params, lr):
    if name == "adam":
        return Adam(params, lr)
    if name == "sgd":
        return SGD(params, lr)
    raise ConfigError(f"unknown optimizer {name!r}")


# -- minibatching ------------------------------------------------------------

def balanced_minibatches(labels, batch_size, rng: Rng, n_samples=None):
    """Index batches with each class drawn with probability 1/2, uniformly with
    replacement from that class's pool. Defaults to ``len(labels)`` draws."""
    labels = np.asarray(labels)
    pools = [np.flatnonzero(labels == c) for c in (0, 1)]
    if any(p.size == 0 for p in pools):
        raise ConfigError("balanced sampling needs both classes present in the training set")
    n = len(labels) if n_samples is None else int(n_samples)
    pick_pos = rng.uniforms(n) < 0.5
    u = rng.uniforms(n)
    idx = np.empty(n, dtype=np.int64)
    for cls, mask in ((0, ~pick_pos), (1, pick_pos)):
        pool = pools[cls]
        j = np.minimum(np.floor(u[mask] * pool.size).astype(np.int64), pool.size - 1)
        idx[mask] = pool[j]
    return [idx[i:i + batch_size] for i in range(0, n, batch_size)]


def natural_minibatches(n, batch_size, rng: Rng):
    """A fresh shuffle of all ``n`` examples, cut into consecutive batches."""
    perm = rng.permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


def minibatches(config, labels, rng):
    if config.sampler == "balanced":
        return balanced_minibatches(labels, config.batch_size, rng)
    return natural_minibatches(len(labels), config.batch_size, rng)


# -- reports -----------------------------------------------------------------

@dataclass
class EpochReport:
    epoch: int
    mode: str
    loss: LossBreakdown
    entropy: float
    kl: float
    train_accuracy: float
    wall_time: float = 0.0
    bins: dict = None

    def record(self):
        """Deterministic metrics record (wall time excluded)."""
        return {
            "epoch": self.epoch,
            "mode": self.mode,
            "loss": self.loss.as_dict(),
            "entropy": self.entropy,
            "kl": self.kl,
            "train_accuracy": self.train_accuracy,
            "bins": self.bins,
        }


@dataclass
class TrainResult:
    policy: Policy
    value: ValueFunction = None
    reports: list = field(default_factory=list)


def _mean_breakdown(items):
    keys = ("ppo", "value", "supervised", "entropy_mean", "total")
    return LossBreakdown(*(float(np.mean([getattr(b, k) for b in items])) for k in keys))


def _epoch_summary(policy, frozen, x, y):
    p0, p1 = policy.probs(x)
    q0, q1 = frozen.probs(x)
    return (float(np.mean(entropy(p0, p1))),
            float(np.mean(kl_divergence((q0, q1), (p0, p1)))),
            accuracy(p1, y))


def _check_finite(breakdown, grads, dump):
    if math.isfinite(breakdown.total) and all(np.all(np.isfinite(g)) for g in grads):
        return
    dump = dict(dump, loss=breakdown.as_dict())
    raise NonFiniteLossError(f"non-finite loss in epoch {dump['epoch']}, batch {dump['batch']}", dump)


def _validate(config, dataset):
    if len(dataset) == 0:
        raise ConfigError("training set is empty")
    n_neg, n_pos = dataset.class_counts()
    if config.sampler == "balanced" and (n_neg == 0 or n_pos == 0):
        raise ConfigError("balanced sampling needs both classes present in the training set")


# -- loops -------------------------------------------------------------------

def train(config: TrainConfig, train_set, rng: Rng = None, on_epoch=None, n_bins=N_EPOCH_BINS) -> TrainResult:
    """Train according to ``config.method``; ``rng`` defaults to ``Rng(config.seed)``."""
    rng = Rng(config.seed) if rng is None else rng
    if config.method == "sft":
        return train_sft(config, train_set, rng, on_epoch, n_bins)
    if config.method == "vanilla_ppo":
        return train_vanilla_ppo(config, train_set, rng, on_epoch, n_bins)
    return _ppo_loop(config, train_set, rng, on_epoch, True, n_bins)


def train_binaryppo(config, train_set, rng=None, on_epoch=None, n_bins=N_EPOCH_BINS):
    return train(replace(config, method="binaryppo"), train_set, rng, on_epoch, n_bins)


def train_vanilla_ppo(config, train_set, rng=None, on_epoch=None, n_bins=N_EPOCH_BINS):
    """PPO with a +/-1 correctness reward and no supervised term."""
    rng = Rng(config.seed) if rng is None else rng
    config = replace(config, method="vanilla_ppo", loss=replace(config.loss, beta=0.0))
    return _ppo_loop(config, train_set, rng, on_epoch, False, n_bins)


def _init_models(config, dim, rng):
    init_rng = rng.spawn("init")
    policy = Policy.create(dim, config.hidden, init_rng, config.reward.p_min)
    value = ValueFunction.create(dim, config.hidden, init_rng)
    return policy, value


def _ppo_loop(config, dataset, rng, on_epoch, confidence_reward, n_bins):
    _validate(config, dataset)
    x_all, y_all = dataset.features, dataset.labels
    policy, value = _init_models(config, dataset.dim, rng)
    batch_rng = rng.spawn("batches")
    action_rng = rng.spawn("actions")
    opt = make_optimizer(config.optimizer, policy.network.params() + value.network.params(), config.learning_rate)
    frozen = snapshot(policy)
    reports = []
    for epoch, mode in enumerate(config.modes(), start=1):
        start = time.perf_counter()
        breakdowns, scores, labels, advs = [], [], [], []
        for b, idx in enumerate(minibatches(config, y_all, batch_rng)):
            x, y = x_all[idx], y_all[idx]
            q0, q1 = frozen.probs(x)
            a = sample_actions(q1, mode, action_rng)
            p_old = np.where(a == 1, q1, q0)
            if confidence_reward:
                r = reward_from_probs(config.reward, p_old, a, y)
            else:
                r = correctness_reward(a, y)
            v, _ = value.forward(x)
            batch = StepBatch.build(x, a, y, p_old, r, v)
            breakdown, g_pol, g_val = total_loss(batch, policy, value, config.loss)
            _check_finite(breakdown, g_pol + g_val, {
                "epoch": epoch, "batch": b, "indices": idx.tolist(), "x": x.tolist(), "y": y.tolist(),
                "a": a.tolist(), "p_old": p_old.tolist(), "r": r.tolist(), "v": v.tolist()})
            opt.step(g_pol + g_val)
            policy.network.touch()
            value.network.touch()
            breakdowns.append(breakdown)
            scores.append(q1)
            labels.append(y)
            advs.append(batch.advantage)
        report = _finish_epoch(epoch, mode, breakdowns, policy, frozen, dataset, scores, labels, advs, start, n_bins)
        reports.append(report)
        if on_epoch is not None:
            on_epoch(report)
        frozen = snapshot(policy)
    return TrainResult(policy, value, reports)


def _finish_epoch(epoch, mode, breakdowns, policy, frozen, dataset, scores, labels, advs, start, n_bins):
    h, kl, acc = _epoch_summary(policy, frozen, dataset.features, dataset.labels)
    # frozen-policy confidence of every visited example, with its advantage
    bins = confidence_bins(np.concatenate(scores), np.concatenate(labels), n_bins,
                           advantages=None if advs is None else np.concatenate(advs))
    return EpochReport(epoch, mode, _mean_breakdown(breakdowns), h, kl, acc,
                       time.perf_counter() - start, bins.as_dict())


def train_sft(config, train_set, rng=None, on_epoch=None, n_bins=N_EPOCH_BINS):
    """Cross-entropy only: no sampling, no reward, no value network."""
    rng = Rng(config.seed) if rng is None else rng
    config = replace(config, method="sft")
    _validate(config, train_set)
    x_all, y_all = train_set.features, train_set.labels
    policy, _ = _init_models(config, train_set.dim, rng)
    batch_rng = rng.spawn("batches")
    opt = make_optimizer(config.optimizer, policy.network.params(), config.learning_rate)
    frozen = snapshot(policy)
    reports = []
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        breakdowns, scores, labels = [], [], []
        for b, idx in enumerate(minibatches(config, y_all, batch_rng)):
            x, y = x_all[idx], y_all[idx]
            _, q1 = frozen.probs(x)
            batch = _sft_batch(x, y)
            ce, grads = supervised_loss(batch, policy)
            p0, p1 = policy.probs(x)
            breakdown = LossBreakdown(0.0, 0.0, ce, float(np.mean(entropy(p0, p1))), ce)
            _check_finite(breakdown, grads, {"epoch": epoch, "batch": b, "indices": idx.tolist(),
                                             "x": x.tolist(), "y": y.tolist()})
            opt.step(grads)
            policy.network.touch()
            breakdowns.append(breakdown)
            scores.append(q1)
            labels.append(y)
        report = _finish_epoch(epoch, "supervised", breakdowns, policy, frozen, train_set, scores, labels, None, start, n_bins)
        reports.append(report)
        if on_epoch is not None:
            on_epoch(report)
        frozen = snapshot(policy)
    return TrainResult(policy, None, reports)


def _sft_batch(x, y):
    n = len(y)
    ones = np.ones(n)
    zeros = np.zeros(n)
    return StepBatch.build(x, y, y, ones, zeros, zeros)
