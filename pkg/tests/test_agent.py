import json

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from eegdiff import agent as ag
from eegdiff.agent import (
    LossWeights,
    ReplayBuffer,
    RewardBreakdown,
    RewardReference,
    Transition,
    actor_forward,
    actor_objective,
    actor_update,
    build_state,
    compute_reward,
    critic_forward,
    critic_loss,
    critic_update,
    init_actor,
    init_critic,
    select_action,
    td_target,
)
from eegdiff.nets import NetConfig, class_net_forward, init_class_net, init_wavelet_net, wavelet_net_forward
from eegdiff.signal_core import synth_dataset

from conftest import sine

FS = 250.0


def quadratic_critic(states, actions):
    return -(actions[:, 0] - 0.7) ** 2


def constant_critic(value, state_dim=4, hidden=5):
    p = init_critic(state_dim, hidden)
    with torch.no_grad():
        for _, t in p.trainable():
            t.zero_()
        p["out.bias"].fill_(value)
    return p


def tr(state, reward=0.0, action=(0.5, 0.5, 0.5), nxt=None):
    return Transition(np.asarray(state, float), LossWeights(*action), reward,
                      np.asarray(state if nxt is None else nxt, float))


class TestRecords:
    def test_weights_bounds(self):
        LossWeights(0.01, 1.0, 0.5)
        for bad in [(0.0, 0.5, 0.5), (0.5, 1.2, 0.5), (0.5, 0.5, float("nan"))]:
            with pytest.raises(ValueError):
                LossWeights(*bad)
        assert LossWeights.from_array([0.2, 0.3, 0.4]).as_array().tolist() == [0.2, 0.3, 0.4]

    def test_transition_validation(self):
        with pytest.raises(ValueError):
            Transition(np.zeros(3), LossWeights(0.5, 0.5, 0.5), 0.0, np.zeros(4))
        with pytest.raises(ValueError):
            tr(np.zeros(3), reward=float("inf"))


class TestBuffer:
    def test_ring_eviction(self):
        b = ReplayBuffer(2)
        for i in range(3):
            b.push(tr([i]))
        assert len(b) == 2
        assert [r.state[0] for r in b.records()] == [1, 2]

    def test_full_draw_is_permutation(self):
        b = ReplayBuffer(10)
        for i in range(7):
            b.push(tr([i]))
        got = sorted(r.state[0] for r in b.sample(7, seed=3))
        assert got == list(range(7))

    def test_underfilled(self):
        b = ReplayBuffer(10)
        b.push(tr([0]))
        with pytest.raises(ValueError):
            b.sample(2, seed=0)

    def test_uniform_counts(self):
        b = ReplayBuffer(10)
        for i in range(10):
            b.push(tr([i]))
        rng = np.random.default_rng(0)
        counts = np.zeros(10)
        for _ in range(10_000):
            draw = [int(r.state[0]) for r in b.sample(5, rng)]
            assert len(set(draw)) == 5
            counts[draw] += 1
        assert np.all(np.abs(counts / 5000 - 1) < 0.05)

    def test_sample_deterministic_and_arrays(self):
        b = ReplayBuffer(4)
        for i in range(6):
            b.push(tr([i, -i], reward=-i / 10))
        assert [r.state[0] for r in b.sample(3, 5)] == [r.state[0] for r in b.sample(3, 5)]
        back = ReplayBuffer.from_arrays(b.to_arrays())
        assert [r.state.tolist() for r in back.records()] == [r.state.tolist() for r in b.records()]
        assert back.capacity == 4


class TestReward:
    def test_identical_batches(self):
        x = synth_dataset(4, seed=1).data()
        r = compute_reward(x, x)
        assert r == RewardBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)

    def test_spectral_two_vs_ten_hz(self):
        rng = np.random.default_rng(0)
        two = np.stack([[sine(2, 256, phase=p)] for p in rng.uniform(0, 6, 8)])
        ten = np.stack([[sine(10, 256, phase=p)] for p in rng.uniform(0, 6, 8)])
        assert compute_reward(two, ten).spectral_discrepancy >= 0.8

    def test_mixing_toward_reference_shrinks_penalty(self):
        monotone = 0
        for seed in range(20):
            ref = synth_dataset(8, seed=seed).data()
            gen = 10 * np.random.default_rng(seed).standard_normal(ref.shape)
            cached = RewardReference.from_batch(ref, FS)
            totals = [abs(compute_reward((1 - lam) * gen + lam * ref, cached).total)
                      for lam in np.linspace(0, 1, 5)]
            monotone += all(np.diff(totals) <= 0)
        assert monotone >= 18

    def test_symmetric_and_bounded(self):
        a = synth_dataset(4, seed=2).data()
        b = 5 * np.random.default_rng(1).standard_normal(a.shape)
        ab, ba = compute_reward(a, b), compute_reward(b, a)
        assert ab.total == pytest.approx(ba.total, abs=1e-12)
        assert -1 <= ab.total < 0
        groups = (ab.js_statistical + ab.js_informational + ab.js_nonlinear) / 3
        assert ab.total == pytest.approx(-(groups + ab.spectral_discrepancy) / 2, abs=1e-15)

    def test_degenerate_batch(self):
        x = synth_dataset(2, seed=0).data()
        x[0, 1] = 0
        with pytest.raises(ValueError):
            compute_reward(x, synth_dataset(2, seed=1).data())
        with pytest.raises(ValueError):
            compute_reward(np.zeros((0, 2, 256)), x)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_combination_rule(self, a, b, c, d):
        r = RewardBreakdown.combine(a, b, c, d)
        assert -1 <= r.total <= 0
        assert (r.total == 0) == (a == b == c == d == 0)

    def test_trace_file(self, tmp_path):
        rec = dict(iter=0, w_d=0.5, w_tf=0.2, w_c=0.3, js_stat=0.1, js_info=0.2, js_nonlin=0.3,
                   spectral=0.1, total=-0.15, extra=1)
        ag.write_reward_trace(tmp_path / "t.jsonl", [rec, rec])
        lines = (tmp_path / "t.jsonl").read_text().splitlines()
        assert len(lines) == 2
        assert set(json.loads(lines[0])) == {"iter", "w_d", "w_tf", "w_c", "js_stat", "js_info", "js_nonlin",
                                             "spectral", "total"}


class TestState:
    cfg = NetConfig(channels=2, samples=64, base_width=4, depth=2, embed_dim=8, feature_dim=5)

    def test_state_layout(self):
        w, c = init_wavelet_net(self.cfg, 0), init_class_net(self.cfg, 1)
        x = np.random.default_rng(0).standard_normal((1, 2, 64))
        s = build_state(x, w, c, self.cfg)
        wf = wavelet_net_forward(w, self.cfg, x)[0].detach().numpy()[0]
        cf = class_net_forward(c, self.cfg, x)[0].detach().numpy()[0]
        assert s.shape == (10,)
        assert np.allclose(s, np.concatenate([wf, cf]), atol=1e-15)
        assert np.allclose(build_state(np.repeat(x, 3, axis=0), w, c, self.cfg), s, atol=1e-12)
        with pytest.raises(ValueError):
            build_state(np.zeros((0, 2, 64)), w, c, self.cfg)

    def test_default_state_length(self):
        cfg = NetConfig()
        x = np.random.default_rng(0).standard_normal((2, 4, 256))
        assert build_state(x, init_wavelet_net(cfg), init_class_net(cfg), cfg).shape == (32,)

    def test_epoch_features_rows_average_to_state(self):
        w, c = init_wavelet_net(self.cfg, 0), init_class_net(self.cfg, 1)
        x = np.random.default_rng(2).standard_normal((7, 2, 64))
        f = ag.epoch_features(x, w, c, self.cfg, batch=3)
        assert f.shape == (7, 10)
        assert np.allclose(f.mean(axis=0), build_state(x, w, c, self.cfg), atol=1e-12)


class TestStateScaler:
    def test_hand_example(self):
        sc = ag.StateScaler.fit([[0.0, 10.0], [2.0, 10.0], [4.0, 10.0]], clip=5.0)
        assert sc.mean == (2.0, 10.0)
        assert sc.scale[0] == pytest.approx(np.sqrt(8 / 3))
        assert sc.scale[1] == pytest.approx(1e-3 * np.sqrt(8 / 3))  # constant column gets the floor
        z = sc.apply([2.0 + np.sqrt(8 / 3), 10.0 + 1.0])
        assert z[0] == pytest.approx(1.0)
        assert z[1] == 5.0

    @given(arrays(np.float64, (20, 3), elements=st.floats(-1e3, 1e3)),
           arrays(np.float64, 3, elements=st.floats(-1e6, 1e6)))
    def test_output_bounded(self, feats, state):
        sc = ag.StateScaler.fit(feats, clip=4.0)
        z = sc.apply(state)
        assert np.all(np.isfinite(z)) and np.all(np.abs(z) <= 4.0)

    def test_identity(self):
        s = np.array([-300.0, 0.5, 7.0])
        assert np.array_equal(ag.StateScaler.identity(3).apply(s), s)


class TestActions:
    def test_noise_free_action(self):
        a = init_actor(4, hidden=8)
        w = select_action(a, np.ones(4), 0.0, seed=0).as_array()
        assert np.all((w > 0) & (w < 1))
        assert np.array_equal(w, select_action(a, np.ones(4), 0.0, seed=7).as_array())

    def test_saturated_action_clamps(self):
        a = init_actor(4, hidden=8)
        with torch.no_grad():
            a["out.bias"].fill_(1e3)
        for seed in range(20):
            assert np.all(select_action(a, np.ones(4), 0.5, seed).as_array() <= 1.0)

    def test_seeded_noise_reproducible(self):
        a = init_actor(4, hidden=8)
        assert select_action(a, np.ones(4), 0.3, 11) == select_action(a, np.ones(4), 0.3, 11)

    @given(arrays(np.float64, 4, elements=st.floats(-1e3, 1e3)), st.floats(0, 10), st.integers(0, 2**31))
    def test_action_always_in_bounds(self, state, noise, seed):
        w = select_action(init_actor(4, hidden=8), state, noise, seed).as_array()
        assert np.all((w >= 0.01) & (w <= 1))


class TestUpdates:
    def test_td_target_examples(self):
        actor = init_actor(4, hidden=5)
        critic = init_critic(4, hidden=5, seed=3)
        s2 = np.random.default_rng(0).standard_normal((3, 4))
        r = np.array([-0.1, -0.2, -0.3])
        assert np.array_equal(td_target(critic, actor, s2, r, 0.0), r)
        assert np.array_equal(td_target(constant_critic(0.0), actor, s2, r, 0.9), r)
        y = td_target(constant_critic(-0.5), actor, s2[:1], [-0.2], 0.9)
        assert y[0] == pytest.approx(-0.65, abs=1e-12)

    def test_critic_loss_hand_value(self):
        critic = init_critic(2, hidden=4, seed=1)
        rng = np.random.default_rng(0)
        s, a = rng.standard_normal((3, 2)), rng.uniform(0.1, 0.9, (3, 3))
        y = np.array([0.3, -0.4, 0.1])
        v = critic_forward(critic, s, a).detach().numpy()
        expected = sum((yi - vi) ** 2 for yi, vi in zip(y, v)) / (2 * 3)
        assert critic_update(critic, s, a, y, lr=0.01) == pytest.approx(expected, abs=1e-14)

    def test_critic_at_target_is_still(self):
        critic = init_critic(2, hidden=4, seed=1)
        rng = np.random.default_rng(0)
        s, a = rng.standard_normal((3, 2)), rng.uniform(0.1, 0.9, (3, 3))
        y = critic_forward(critic, s, a).detach().numpy()
        before = critic.copy()
        assert critic_update(critic, s, a, y, lr=0.5) == 0
        assert critic.equal(before)

    def test_critic_step_descends(self):
        critic = init_critic(3, hidden=6, seed=2)
        s, a, y = np.ones((1, 3)), np.full((1, 3), 0.5), np.array([1.0])
        pre = critic_update(critic, s, a, y, lr=0.05)
        assert float(critic_loss(critic, s, a, y).detach()) < pre

    def test_actor_reaches_quadratic_optimum(self):
        actor = init_actor(4, hidden=16, seed=0)
        states = np.random.default_rng(0).standard_normal((8, 4))
        for _ in range(200):
            actor_update(actor, quadratic_critic, states, lr=0.5)
        w = actor_forward(actor, states).detach().numpy()[:, 0]
        assert np.all(np.abs(w - 0.7) < 0.05)

    def test_actor_zero_critic_is_still(self):
        actor = init_actor(4, hidden=5)
        before = actor.copy()
        actor_update(actor, constant_critic(0.0), np.ones((2, 4)), lr=1.0)
        assert actor.equal(before)

    def test_actor_objective_increases(self):
        actor = init_actor(4, hidden=8, seed=5)
        critic = init_critic(4, hidden=8, seed=6)
        critic.set_trainable(False)
        states = np.random.default_rng(1).standard_normal((16, 4))
        js = [actor_update(actor, critic, states, lr=0.05) for _ in range(11)]
        assert np.all(np.diff(js) > 0)

    def test_parameter_isolation(self):
        actor, critic = init_actor(4, hidden=5), init_critic(4, hidden=5, seed=1)
        s = np.random.default_rng(2).standard_normal((4, 4))
        a_before, c_before = actor.copy(), critic.copy()
        y = np.full(4, -0.3)
        critic_update(critic, s, actor_forward(actor, s), y, lr=0.1)
        assert actor.equal(a_before) and not critic.equal(c_before)
        c_mid = critic.copy()
        actor_update(actor, critic, s, lr=0.1)
        assert critic.equal(c_mid) and not actor.equal(a_before)
        with torch.no_grad():
            assert float(actor_objective(actor, critic, s)) == pytest.approx(
                float(critic_forward(critic, s, actor_forward(actor, s)).mean()))


class TestWeightAgent:
    def test_waits_for_minibatch(self):
        agent = ag.WeightAgent(4, ag.AgentConfig(minibatch=3), seed=0)
        stores = {k: v.copy() for k, v in agent.stores().items()}
        for i in range(2):
            agent.observe(tr(np.ones(4) * i, reward=-0.5))
            assert agent.update(np.random.default_rng(i)) is None
        assert all(agent.stores()[k].equal(v) for k, v in stores.items())
        agent.observe(tr(np.ones(4), reward=-0.5))
        info = agent.update(np.random.default_rng(0))
        assert set(info) == {"critic_loss", "actor_value"}
        assert not agent.critic_target.equal(stores["critic_target"])

    def test_noise_decay(self):
        agent = ag.WeightAgent(4, ag.AgentConfig(noise_std=0.1, noise_decay=0.5))
        assert agent.noise_std(0) == 0.1 and agent.noise_std(2) == 0.025

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ag.AgentConfig(discount=1.5)
        with pytest.raises(ValueError):
            ag.AgentConfig(minibatch=0)
