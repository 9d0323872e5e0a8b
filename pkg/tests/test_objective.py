import math

import numpy as np
import pytest

from binaryppo.errors import ConfigError, ContractViolation
from binaryppo.linalg import Rng
from binaryppo.model import Policy, ValueFunction
from binaryppo.objective import (LossWeights, StepBatch, advantage, clipped_surrogate, entropy, entropy_bonus,
                                 kl_divergence, ppo_clip_loss, supervised_loss, total_loss, value_loss)

from conftest import fd_gradient, flat, max_rel_error, random_batch


def direct_surrogate(rho, adv, eps):
    clipped = max(1 - eps, min(rho, 1 + eps))
    return min(rho * adv, clipped * adv)


def test_advantage_examples():
    assert advantage(0.0, 0.0) == 0.0
    assert advantage(-1.5, -1.5) == 0.0
    assert advantage(2.0, 0.5) == 1.5


def test_step_batch_enforces_identity():
    b = StepBatch.build([[0.0]], [1], [1], [0.5], [1.0], [0.25])
    assert b.advantage.tolist() == [0.75]
    with pytest.raises(ContractViolation):
        StepBatch(np.zeros((1, 1)), np.array([1]), np.array([1]), np.array([0.5]), np.array([1.0]),
                  np.array([0.25]), np.array([0.7]))
    with pytest.raises(ContractViolation):
        StepBatch.build([[0.0], [1.0]], [1], [1], [0.5], [1.0], [0.0])


def test_clip_arithmetic_and_grid():
    surr, _ = clipped_surrogate([1.5], [1.0], 0.2)
    assert surr[0] == 1.2
    rhos = [0.5 + 0.2 * i for i in range(6)]
    for rho in rhos:
        for adv in (-2.0, -1.0, 1.0, 2.0):
            assert clipped_surrogate([rho], [adv], 0.2)[0][0] == direct_surrogate(rho, adv, 0.2)


def test_clip_inert_inside_trust_region():
    rng = Rng(0)
    rho = 1 + 0.2 * (2 * rng.uniforms(500) - 1)
    adv = rng.normals(500)
    surr, active = clipped_surrogate(rho, adv, 0.2)
    assert surr.tolist() == (rho * adv).tolist()
    assert active.all()


def test_ratio_one_loss_is_minus_mean_advantage(small_policy):
    x = Rng(1).normals(18).reshape(6, 3)
    a = np.array([0, 1, 1, 0, 1, 0])
    p0, p1 = small_policy.probs(x)
    p_old = np.where(a == 1, p1, p0)
    r = Rng(2).normals(6)
    batch = StepBatch.build(x, a, a, p_old, r, np.zeros(6))
    loss, _ = ppo_clip_loss(batch, small_policy, LossWeights())
    assert abs(loss + r.mean()) < 1e-15


def test_ppo_rejects_bad_batches(small_policy):
    empty = StepBatch.build(np.zeros((0, 3)), [], [], [], [], [])
    with pytest.raises(ContractViolation, match="empty"):
        ppo_clip_loss(empty, small_policy, LossWeights())
    low = StepBatch.build(np.zeros((1, 3)), [1], [1], [1e-9], [1.0], [0.0])
    with pytest.raises(ContractViolation, match="p_old"):
        ppo_clip_loss(low, small_policy, LossWeights())


def test_value_loss_examples(small_value):
    x = Rng(3).normals(15).reshape(5, 3)
    v, _ = small_value.forward(x)
    perfect = StepBatch.build(x, np.zeros(5, int), np.zeros(5, int), np.full(5, 0.5), v, v)
    assert value_loss(perfect, small_value)[0] == 0.0
    zero = ValueFunction.create(3, (2,), Rng(0))
    for p in zero.network.params():
        p[...] = 0.0
    single = StepBatch.build(np.zeros((1, 3)), [0], [0], [0.5], [2.0], [0.0])
    assert value_loss(single, zero)[0] == 4.0
    r = Rng(4).normals(5)
    batch = StepBatch.build(x, np.zeros(5, int), np.zeros(5, int), np.full(5, 0.5), r, np.zeros(5))
    naive = sum((v[i] - r[i]) ** 2 for i in range(5)) / 5
    assert abs(value_loss(batch, small_value)[0] - naive) < 1e-12


def test_supervised_loss_examples(small_policy):
    zero = Policy.create(3, (2,), Rng(0))
    for p in zero.network.params():
        p[...] = 0.0
    single = StepBatch.build(np.zeros((1, 3)), [1], [1], [0.5], [0.0], [0.0])
    assert abs(supervised_loss(single, zero)[0] - math.log(2)) < 1e-12
    x = Rng(5).normals(24).reshape(8, 3)
    y = np.array([0, 1, 1, 0, 0, 1, 0, 1])
    batch = StepBatch.build(x, y, y, np.full(8, 0.5), np.zeros(8), np.zeros(8))
    p0, p1 = small_policy.probs(x)
    naive = sum(-math.log(p1[i] if y[i] else p0[i]) for i in range(8)) / 8
    assert abs(supervised_loss(batch, small_policy)[0] - naive) < 1e-12


def test_entropy_values():
    assert abs(entropy(0.5, 0.5) - math.log(2)) < 1e-12
    assert entropy(1 - 1e-6, 1e-6) < 2e-5
    assert abs(entropy(0.25, 0.75) - 0.562335) < 1e-6
    # independent form: binary entropy in bits times ln 2
    h_bits = -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
    assert abs(entropy(0.25, 0.75) - h_bits * math.log(2)) < 1e-15


def test_kl_values():
    assert kl_divergence((0.3, 0.7), (0.3, 0.7)) == 0.0
    expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
    assert abs(kl_divergence((0.5, 0.5), (0.25, 0.75)) - expected) < 1e-15
    assert abs(expected - 0.143841) < 1e-6
    rng = Rng(0)
    p = rng.uniforms(1000) * (1 - 2e-6) + 1e-6
    q = rng.uniforms(1000) * (1 - 2e-6) + 1e-6
    assert np.all(kl_divergence((1 - p, p), (1 - q, q)) >= 0)


def test_loss_weights_validation():
    with pytest.raises(ConfigError):
        LossWeights(alpha=-1)
    with pytest.raises(ConfigError):
        LossWeights(clip_epsilon=1.0)


def test_weight_zeroing_gives_ppo_alone(small_policy, small_value):
    batch = random_batch(small_policy, Rng(6), 10)
    w = LossWeights(alpha=0, beta=0, gamma=0)
    br, g_pol, g_val = total_loss(batch, small_policy, small_value, w)
    ppo, g = ppo_clip_loss(batch, small_policy, w)
    assert br.total == ppo
    assert flat(g_pol).tobytes() == flat(g).tobytes()
    assert not np.any(flat(g_val))


def test_entropy_gradient_zero_at_uniform():
    zero = Policy.create(3, (4,), Rng(0))
    for p in zero.network.params():
        p[...] = 0.0
    batch = StepBatch.build(Rng(1).normals(12).reshape(4, 3), [0, 1, 0, 1], [0, 1, 1, 0], [0.5] * 4, [0.0] * 4,
                            [0.0] * 4)
    _, g = entropy_bonus(batch, zero)
    assert np.all(flat(g) == 0.0)


def test_gradient_additivity(small_policy, small_value):
    batch = random_batch(small_policy, Rng(7), 12)
    w = LossWeights(alpha=0.7, beta=0.3, gamma=0.05)
    br, g_pol, g_val = total_loss(batch, small_policy, small_value, w)
    _, gp = ppo_clip_loss(batch, small_policy, w)
    _, gc = supervised_loss(batch, small_policy)
    _, gh = entropy_bonus(batch, small_policy)
    _, gv = value_loss(batch, small_value)
    combined = flat(gp) + w.beta * flat(gc) - w.gamma * flat(gh)
    np.testing.assert_allclose(flat(g_pol), combined, rtol=0, atol=1e-12)
    np.testing.assert_allclose(flat(g_val), w.alpha * flat(gv), rtol=0, atol=1e-12)
    parts = br.ppo + w.alpha * br.value + w.beta * br.supervised - w.gamma * br.entropy_mean
    assert abs(br.total - parts) < 1e-15


def composite_fd_error(policy, value, batch, weights):
    n_pol = policy.network.n_params
    theta = np.concatenate([policy.network.flat(), value.network.flat()])

    def f(t):
        policy.network.set_flat(t[:n_pol])
        value.network.set_flat(t[n_pol:])
        return total_loss(batch, policy, value, weights)[0].total

    num = fd_gradient(f, theta)
    policy.network.set_flat(theta[:n_pol])
    value.network.set_flat(theta[n_pol:])
    _, g_pol, g_val = total_loss(batch, policy, value, weights)
    return max_rel_error(np.concatenate([flat(g_pol), flat(g_val)]), num)


@pytest.mark.parametrize("normalize", [False, True])
def test_total_loss_finite_differences(normalize):
    rng = Rng(99)
    pol = Policy.create(3, (6, 5), rng)
    val = ValueFunction.create(3, (6, 5), rng)
    batch = random_batch(pol, rng, 9)
    w = LossWeights(alpha=0.5, beta=0.1, gamma=0.01, normalize_advantage=normalize)
    assert composite_fd_error(pol, val, batch, w) < 1e-4


def test_clipped_samples_carry_no_policy_gradient():
    pol = Policy.create(2, (3,), Rng(0))
    x = np.array([[0.5, -0.5]])
    p0, p1 = pol.probs(x)
    # ratio 1.5 with positive advantage sits on the clipped branch
    batch = StepBatch.build(x, [1], [1], [p1[0] / 1.5], [1.0], [0.0])
    _, g = ppo_clip_loss(batch, pol, LossWeights())
    assert np.all(flat(g) == 0.0)
