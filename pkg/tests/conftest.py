import numpy as np
import pytest

from binaryppo.linalg import Rng
from binaryppo.model import Policy, ValueFunction
from binaryppo.objective import StepBatch

# Denominator floor for relative errors: gradient entries smaller than this
# are compared in absolute terms, where central differences are ~1e-10 accurate.
REL_FLOOR = 1e-6


def fd_gradient(f, theta, rel_step=1e-5):
    """Central differences with step ``rel_step * max(1, |theta_i|)``."""
    theta = np.array(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        h = rel_step * max(1.0, abs(theta[i]))
        old = theta[i]
        theta[i] = old + h
        fp = f(theta)
        theta[i] = old - h
        fm = f(theta)
        theta[i] = old
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def max_rel_error(analytic, numeric, floor=REL_FLOOR):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def flat(grads):
    return np.concatenate([g.ravel() for g in grads]) if grads else np.zeros(0)


def random_batch(policy, rng, n, clip_epsilon=0.2, margin=0.02, p_old=None):
    """Batch whose ratios stay ``margin`` away from the clip kinks and from 1 +/- eps.

    Rewards and values are random; ``p_old`` is the live probability of the
    taken action divided by a ratio drawn away from the clip boundaries.
    """
    d = policy.network.input_dim
    x = rng.normals(n * d).reshape(n, d)
    a = (rng.uniforms(n) < 0.5).astype(np.int64)
    y = (rng.uniforms(n) < 0.5).astype(np.int64)
    p0, p1 = policy.probs(x)
    live = np.where(a == 1, p1, p0)
    if p_old is None:
        lo, hi = 1 - clip_epsilon, 1 + clip_epsilon
        choices = np.array([0.6, lo + margin + 0.05, 1.0 - 0.03, 1.0 + 0.03, hi - margin - 0.05, 1.45])
        ratio = choices[rng.integers(choices.size, n)]
        p_old = np.clip(live / ratio, 1e-3, 1.0)
    r = rng.normals(n)
    v = rng.normals(n)
    return StepBatch.build(x, a, y, p_old, r, v)


@pytest.fixture
def rng():
    return Rng(12345)


@pytest.fixture
def small_policy(rng):
    return Policy.create(3, (5, 4), rng.spawn("policy"))


@pytest.fixture
def small_value(rng):
    return ValueFunction.create(3, (5, 4), rng.spawn("value"))
