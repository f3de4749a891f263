"""Masked policy-gradient internals: softmax, gradients, persistence."""

import numpy as np
import pytest

from fms import MODE_AGV
from fms.environment import EnvConfig, FmsEnv
from fms.solvers.ppo import (ActorCritic, PpoConfig, PpoPolicy, compute_gae,
                             masked_log_softmax, masked_softmax, ppo_act,
                             ppo_loss_and_grads, ppo_train)


def frozen_batch(model, rng, n=16, off_policy=0.05):
    """A micro-batch away from clip kinks for finite-difference checks."""
    masks = rng.random((n, model.n_actions)) < 0.7
    masks[:, 0] = True
    obs = rng.normal(size=(n, model.obs_dim))
    actions = np.array([int(rng.choice(np.flatnonzero(m))) for m in masks])
    logp = masked_log_softmax(model.logits(obs), masks)
    batch = {
        "obs": obs,
        "actions": actions,
        "masks": masks,
        "logp_old": logp[np.arange(n), actions]
        + rng.normal(scale=off_policy, size=n),
        "advantages": rng.normal(size=n),
        "returns": rng.normal(size=n),
        "v_old": rng.normal(size=n),
    }
    return batch


class TestMaskedSoftmax:
    def test_disabled_probability_exactly_zero(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(8, 6)) * 10
        masks = rng.random((8, 6)) < 0.5
        masks[:, 2] = True
        probs = masked_softmax(logits, masks)
        assert (probs[~masks] == 0.0).all()

    def test_enabled_sum_to_one(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(50, 9))
        masks = rng.random((50, 9)) < 0.6
        masks[:, 0] = True
        probs = masked_softmax(logits, masks)
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9

    def test_all_masked_rejected(self):
        with pytest.raises(ValueError):
            masked_softmax(np.zeros((1, 3)), np.zeros((1, 3), dtype=bool))


class TestAct:
    def test_single_enabled_action(self):
        model = ActorCritic(4, 5, hidden=8, seed=0)
        mask = np.array([False, False, True, False, False])
        obs = np.zeros(4)
        for deterministic in (True, False):
            assert ppo_act(model, obs, mask, deterministic,
                           rng=np.random.default_rng(0)) == 2

    def test_logit_shift_invariance(self):
        model = ActorCritic(4, 5, hidden=8, seed=1)
        obs = np.random.default_rng(2).normal(size=4)
        mask = np.array([True, True, False, True, True])
        a = ppo_act(model, obs, mask, deterministic=True)
        model.params["pb3"] = model.params["pb3"] + 7.5
        assert ppo_act(model, obs, mask, deterministic=True) == a

    def test_deterministic_repeatable(self):
        model = ActorCritic(6, 4, hidden=8, seed=3)
        obs = np.random.default_rng(4).normal(size=6)
        mask = np.ones(4, dtype=bool)
        assert (ppo_act(model, obs, mask, True)
                == ppo_act(model, obs, mask, True))

    def test_all_masked_rejected(self):
        model = ActorCritic(3, 3, hidden=8, seed=0)
        with pytest.raises(ValueError):
            ppo_act(model, np.zeros(3), np.zeros(3, dtype=bool))


class TestLoss:
    def test_identity_ratio_before_update(self):
        # fresh rollout: logp_old equals current logp, so every ratio is 1
        model = ActorCritic(5, 4, hidden=12, seed=5)
        rng = np.random.default_rng(6)
        batch = frozen_batch(model, rng, off_policy=0.0)
        n = len(batch["actions"])
        logp = masked_log_softmax(model.logits(batch["obs"]),
                                  batch["masks"])
        ratio = np.exp(logp[np.arange(n), batch["actions"]]
                       - batch["logp_old"])
        assert np.abs(ratio - 1.0).max() < 1e-12
        loss, _, stats = ppo_loss_and_grads(model, batch, PpoConfig())
        assert abs(stats["policy_loss"]
                   + np.mean(batch["advantages"])) < 1e-9
        assert abs(stats["approx_kl"]) < 1e-12

    @pytest.mark.parametrize("value_target", ["returns", "v_old"])
    @pytest.mark.parametrize("entropy_coef", [0.0, 0.03])
    def test_gradients_match_finite_differences(self, value_target,
                                                entropy_coef):
        model = ActorCritic(6, 5, hidden=10, seed=7)
        rng = np.random.default_rng(8)
        config = PpoConfig(value_target=value_target,
                           entropy_coef=entropy_coef)
        batch = frozen_batch(model, rng)
        _, grads, _ = ppo_loss_and_grads(model, batch, config)
        worst = 0.0
        eps = 1e-6
        for name, p in model.params.items():
            flat = p.reshape(-1)
            for k in rng.choice(flat.size, size=min(5, flat.size),
                                replace=False):
                old = flat[k]
                flat[k] = old + eps
                up, _, _ = ppo_loss_and_grads(model, batch, config)
                flat[k] = old - eps
                dn, _, _ = ppo_loss_and_grads(model, batch, config)
                flat[k] = old
                fd = (up - dn) / (2 * eps)
                g = grads[name].reshape(-1)[k]
                denom = max(abs(fd), abs(g), 1e-8)
                worst = max(worst, abs(fd - g) / denom)
        assert worst < 1e-4

    def test_no_gradient_through_masked_logits(self):
        model = ActorCritic(4, 6, hidden=8, seed=9)
        rng = np.random.default_rng(10)
        batch = frozen_batch(model, rng)
        _, grads, _ = ppo_loss_and_grads(model, batch, PpoConfig())
        # a bias unit feeding only disabled actions in every row gets no
        # policy gradient: column j of pb3 is zero if j never enabled
        never = ~batch["masks"].any(axis=0)
        if never.any():
            assert np.allclose(grads["pb3"][never], 0.0)


class TestGae:
    def test_single_step_terminal(self):
        adv, ret = compute_gae(np.array([1.0]), np.array([0.5]),
                               np.array([True]), np.array([0.0]),
                               gamma=0.9, lam=0.95)
        assert adv[0] == pytest.approx(1.0 - 0.5)
        assert ret[0] == pytest.approx(1.0)

    def test_discounting_chain(self):
        rewards = np.array([0.0, 0.0, 1.0])
        values = np.zeros(3)
        dones = np.array([False, False, True])
        adv, ret = compute_gae(rewards, values, dones, np.zeros(3),
                               gamma=0.5, lam=1.0)
        assert ret[0] == pytest.approx(0.25)
        assert ret[2] == pytest.approx(1.0)


class TestPersistence:
    def test_checkpoint_round_trip(self, tmp_path):
        model = ActorCritic(7, 3, hidden=9, seed=11)
        path = tmp_path / "model.npz"
        model.save(path)
        loaded = ActorCritic.load(path)
        assert loaded.obs_dim == 7 and loaded.n_actions == 3
        for name, p in model.params.items():
            assert np.array_equal(loaded.params[name], p)
        obs = np.random.default_rng(1).normal(size=7)
        assert np.array_equal(model.logits(obs), loaded.logits(obs))


class TestTrainingLoop:
    def test_short_masked_training_runs(self, small_instance):
        env_factory = lambda: FmsEnv(
            small_instance, EnvConfig(mode=MODE_AGV, n_agvs=2))
        config = PpoConfig(steps=600, rollout_len=128, epochs=2,
                           minibatch=64, hidden=32, optimizer="adam",
                           seed=0)
        model, log = ppo_train(env_factory, config)
        assert log.timesteps[-1] == 600
        assert len(log.loss) == len(log.timesteps)
        assert all(np.isfinite(v) for v in log.loss)
        # trained policy still respects the mask
        env = env_factory()
        policy = PpoPolicy(model)
        while not env.terminal:
            action = policy.decide(env)
            assert env.action_mask()[action]
            env.step(action)

    def test_training_seed_reproducible(self, small_instance):
        def train_once():
            config = PpoConfig(steps=256, rollout_len=128, epochs=1,
                               minibatch=64, hidden=16, seed=4)
            model, log = ppo_train(
                lambda: FmsEnv(small_instance,
                               EnvConfig(mode=MODE_AGV, n_agvs=2)), config)
            return log.loss

        assert train_once() == train_once()
