"""Loss terms of the BinaryPPO objective and their analytic gradients.

The descended loss is::

    total = ppo + alpha * value + beta * supervised - gamma * entropy_mean

with ``ppo = -mean(min(rho*A, clip(rho, 1-eps, 1+eps)*A))``, ``value`` the MSE
between V_phi(x) and the stored reward, ``supervised`` the mean negative
log-likelihood of the label, and ``entropy_mean`` the mean Shannon entropy of
the live policy. Rewards and advantages are constants here; the value network
only receives gradient from the value term.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, ContractViolation


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.5
    beta: float = 0.1
    gamma: float = 0.01
    clip_epsilon: float = 0.2
    normalize_advantage: bool = False

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss.{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ConfigError(f"loss.clip_epsilon must lie in (0, 1), got {self.clip_epsilon}")


@dataclass(frozen=True)
class LossBreakdown:
    ppo: float
    value: float
    supervised: float
    entropy_mean: float
    total: float

    def as_dict(self):
        return asdict(self)


def advantage(r, v):
    return np.asarray(r, dtype=np.float64) - np.asarray(v, dtype=np.float64)


@dataclass
class StepBatch:
    """One minibatch of transitions; arrays share the leading dimension.

    ``p_old`` is the frozen policy's probability of the taken action ``a``;
    ``v`` is the value estimate used to form ``advantage = r - v``.
    """

    x: np.ndarray
    a: np.ndarray
    y: np.ndarray
    p_old: np.ndarray
    r: np.ndarray
    v: np.ndarray
    advantage: np.ndarray

    @classmethod
    def build(cls, x, a, y, p_old, r, v):
        r = np.asarray(r, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        return cls(np.asarray(x, dtype=np.float64), np.asarray(a, dtype=np.int64), np.asarray(y, dtype=np.int64),
                   np.asarray(p_old, dtype=np.float64), r, v, advantage(r, v))

    def __post_init__(self):
        n = len(self.a)
        for name in ("x", "y", "p_old", "r", "v", "advantage"):
            if len(getattr(self, name)) != n:
                raise ContractViolation(f"batch field {name!r} has length {len(getattr(self, name))}, expected {n}")
        if not np.array_equal(self.advantage, self.r - self.v):
            raise ContractViolation("advantage must equal r - v")

    def __len__(self):
        return len(self.a)


def _require_batch(batch):
    if len(batch) == 0:
        raise ContractViolation("empty batch")


def clipped_surrogate(ratio, adv, clip_epsilon):
    """Per-sample ``min(rho*A, clip(rho)*A)`` and the mask where rho carries gradient."""
    ratio = np.asarray(ratio, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * adv
    return np.minimum(unclipped, clipped), unclipped <= clipped


def policy_advantage(batch, weights):
    adv = batch.advantage
    if weights.normalize_advantage and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv


# Each *_terms helper returns (loss, dL/dp0, dL/dp1) given live probabilities.

def _ppo_terms(batch, p0, p1, weights, p_min):
    if np.any(batch.p_old < p_min) or np.any(batch.p_old > 1.0):
        raise ContractViolation(f"p_old must lie in [{p_min}, 1]")
    n = len(batch)
    taken = batch.a == 1
    p_live = np.where(taken, p1, p0)
    ratio = p_live / batch.p_old
    adv = policy_advantage(batch, weights)
    surr, active = clipped_surrogate(ratio, adv, weights.clip_epsilon)
    g_taken = np.where(active, -adv / (n * batch.p_old), 0.0)
    g1 = np.where(taken, g_taken, 0.0)
    g0 = np.where(taken, 0.0, g_taken)
    return -surr.mean(), g0, g1


def _ce_terms(batch, p0, p1):
    n = len(batch)
    pos = batch.y == 1
    p_label = np.where(pos, p1, p0)
    g = -1.0 / (n * p_label)
    return -np.log(p_label).mean(), np.where(pos, 0.0, g), np.where(pos, g, 0.0)


def entropy(p0, p1):
    """Shannon entropy in nats of the pair ``(p0, p1)``; elementwise."""
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    return -(p0 * np.log(p0) + p1 * np.log(p1))


def _entropy_terms(p0, p1):
    n = len(p0)
    return entropy(p0, p1).mean(), -(np.log(p0) + 1.0) / n, -(np.log(p1) + 1.0) / n


def kl_divergence(p_old, p_new):
    """KL(p_old || p_new) for two-action distributions given as ``(p0, p1)`` pairs."""
    a0, a1 = (np.asarray(t, dtype=np.float64) for t in p_old)
    b0, b1 = (np.asarray(t, dtype=np.float64) for t in p_new)
    return a0 * np.log(a0 / b0) + a1 * np.log(a1 / b1)


def _policy_grads(policy, cache, g0, g1):
    return policy.backward(cache, policy.logit_grad(cache, g0, g1))


def ppo_clip_loss(batch, policy, weights: LossWeights):
    """Negated mean clipped surrogate and its gradient w.r.t. the policy parameters."""
    _require_batch(batch)
    p0, p1, cache = policy.forward(batch.x)
    loss, g0, g1 = _ppo_terms(batch, p0, p1, weights, policy.p_min)
    return loss, _policy_grads(policy, cache, g0, g1)


def supervised_loss(batch, policy):
    """Mean binary cross-entropy of the labels under the live policy."""
    _require_batch(batch)
    p0, p1, cache = policy.forward(batch.x)
    loss, g0, g1 = _ce_terms(batch, p0, p1)
    return loss, _policy_grads(policy, cache, g0, g1)


def entropy_bonus(batch, policy):
    """Mean policy entropy over the batch and its gradient (ascent direction)."""
    _require_batch(batch)
    p0, p1, cache = policy.forward(batch.x)
    h, g0, g1 = _entropy_terms(p0, p1)
    return h, _policy_grads(policy, cache, g0, g1)


def value_loss(batch, value_fn):
    """Mean squared error between live value predictions and stored rewards."""
    _require_batch(batch)
    v, cache = value_fn.forward(batch.x)
    diff = v - batch.r
    return float(np.mean(diff * diff)), value_fn.backward(cache, 2.0 * diff / len(batch))


def total_loss(batch, policy, value_fn, weights: LossWeights):
    """Composite loss; returns ``(LossBreakdown, policy_grads, value_grads)``.

    ``value_fn`` may be None, in which case the value term is reported as 0.
    """
    _require_batch(batch)
    p0, p1, cache = policy.forward(batch.x)
    ppo, g0, g1 = _ppo_terms(batch, p0, p1, weights, policy.p_min)
    ce, c0, c1 = _ce_terms(batch, p0, p1)
    h, h0, h1 = _entropy_terms(p0, p1)
    g0 = g0 + weights.beta * c0 - weights.gamma * h0
    g1 = g1 + weights.beta * c1 - weights.gamma * h1
    policy_grads = _policy_grads(policy, cache, g0, g1)
    if value_fn is not None:
        vl, value_grads = value_loss(batch, value_fn)
        value_grads = [weights.alpha * g for g in value_grads]
    else:
        vl, value_grads = 0.0, []
    total = ppo + weights.alpha * vl + weights.beta * ce - weights.gamma * h
    return LossBreakdown(float(ppo), float(vl), float(ce), float(h), float(total)), policy_grads, value_grads
