import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gradcheck_draws, loop_forward, numeric_grad, oracle_returns, rel_error
from rlharness.agents import (
    Adam,
    DqnAgent,
    DqnHyperparams,
    Episode,
    Mlp,
    ReinforceAgent,
    ReinforceHyperparams,
    ReplayBuffer,
    Sgd,
    compute_returns,
    dqn_update,
    epsilon_greedy,
    load_policy,
    mlp_forward,
    mlp_gradient,
    policy_loss,
    reinforce_update,
    save_policy,
    softmax,
    td_loss,
)
from rlharness.agents.mlp import clip_by_norm
from rlharness.errors import AgentError, CheckpointError


def test_forward_matches_loop_oracle():
    rng = np.random.default_rng(0)
    params = Mlp.init([7, 16, 8, 5], rng)
    for b in params.biases:
        b += rng.normal(size=b.shape)
    obs = rng.normal(size=(20, 7))
    batch = mlp_forward(params, obs)
    for i in range(20):
        assert np.allclose(batch[i], loop_forward(params, obs[i]), rtol=0, atol=1e-12)
        assert np.allclose(mlp_forward(params, obs[i]), batch[i], rtol=0, atol=1e-12)


def test_forward_rejects_wrong_width():
    params = Mlp.init([3, 4, 2], np.random.default_rng(0))
    with pytest.raises(ValueError):
        mlp_forward(params, np.zeros(4))


def test_gradcheck_value_head():
    for rng, params, obs in gradcheck_draws(1):
        actions = rng.integers(4, size=5)
        targets = rng.normal(size=5)
        _, grad_out = td_loss(params, obs, actions, targets)
        analytic = mlp_gradient(params, obs, grad_out).arrays()
        numeric = numeric_grad(params, lambda p: td_loss(p, obs, actions, targets)[0])
        assert rel_error(analytic, numeric) <= 1e-4


def test_gradcheck_policy_head():
    for rng, params, obs in gradcheck_draws(2):
        actions = rng.integers(4, size=5)
        weights = rng.normal(size=5)
        _, grad_out = policy_loss(params, obs, actions, weights, 2)
        analytic = mlp_gradient(params, obs, grad_out).arrays()
        numeric = numeric_grad(params, lambda p: policy_loss(p, obs, actions, weights, 2)[0])
        assert rel_error(analytic, numeric) <= 1e-4


def test_softmax_gradient_analytic():
    logits = np.array([0.3, -1.2, 2.0, 0.0])
    params = Mlp([np.zeros((4, 1))], [logits.copy()])
    obs = np.zeros((1, 1))
    for a in range(4):
        _, grad_out = policy_loss(params, obs, np.array([a]), np.array([1.5]), 1)
        onehot = np.eye(4)[a]
        assert np.allclose(grad_out[0], -1.5 * (onehot - softmax(logits)), atol=1e-15)


def test_clip_by_norm():
    params = Mlp.zeros([2, 2])
    grads = mlp_gradient(Mlp([np.ones((2, 2))], [np.zeros(2)]), np.ones(2), np.array([30.0, 40.0]))
    clipped = clip_by_norm(grads, 10.0)
    assert clipped.norm() == pytest.approx(10.0)
    assert clip_by_norm(clipped, 100.0).norm() == pytest.approx(10.0)
    assert Sgd(1.0).step(params, grads).biases[0] == pytest.approx(-np.array([30, 40]) * 10 / grads.norm())


# -- returns -----------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=60), st.floats(0, 1))
def test_returns_match_quadratic_oracle(rewards, gamma):
    assert np.allclose(compute_returns(rewards, gamma), oracle_returns(rewards, gamma), rtol=1e-12, atol=1e-12)


def test_returns_examples():
    assert list(compute_returns([0, 0, 1], 0.5)) == [0.25, 0.5, 1.0]
    with pytest.raises(ValueError):
        compute_returns([], 0.9)


# -- exploration ---------------------------------------------------------------


def test_epsilon_frequency():
    rng = np.random.default_rng(3)
    q = np.array([0.0, 5.0, 1.0, 2.0, -1.0])
    n = 20_000
    nongreedy = sum(epsilon_greedy(q, 0.25, rng) != 1 for _ in range(n)) / n
    # a random draw picks the greedy action 1/5 of the time
    explore = nongreedy * 5 / 4
    assert 0.23 <= explore <= 0.27


def test_epsilon_extremes_and_ties():
    rng = np.random.default_rng(0)
    assert all(epsilon_greedy([1.0, 3.0, 3.0], 0.0, rng) == 1 for _ in range(100))
    assert len({epsilon_greedy([0.0, 9.0, 0.0], 1.0, rng) for _ in range(200)}) == 3
    with pytest.raises(ValueError):
        epsilon_greedy([1.0], 1.5, rng)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=8), st.floats(-50, 50))
def test_greedy_invariant_to_shift(q, c):
    rng = np.random.default_rng(0)
    q = np.array(q)
    shifted = q + c
    if len(set(shifted.tolist())) == len(shifted) and len(set(q.tolist())) == len(q):
        assert epsilon_greedy(q, 0.0, rng) == epsilon_greedy(shifted, 0.0, rng)


def test_epsilon_schedule():
    hp = DqnHyperparams(epsilon_start=1.0, epsilon_end=0.1, epsilon_decay_steps=100)
    assert hp.epsilon(0) == 1.0
    assert hp.epsilon(50) == pytest.approx(0.55)
    assert hp.epsilon(100) == pytest.approx(0.1) and hp.epsilon(10_000) == pytest.approx(0.1)


# -- replay ------------------------------------------------------------------


def test_replay_ring_overwrites_oldest():
    buf = ReplayBuffer(3, 1)
    for i in range(5):
        buf.add([i], i, float(i), [i + 1], False)
    assert len(buf) == 3
    assert sorted(buf.actions.tolist()) == [2, 3, 4]


def test_replay_sampling_uniform():
    buf = ReplayBuffer(100, 1)
    for i in range(100):
        buf.add([i], 0, 0.0, [i], False)
    rng = np.random.default_rng(5)
    counts = np.zeros(100)
    for _ in range(5000):
        idx = buf.sample_indices(10, rng)
        assert len(set(idx.tolist())) == 10
        counts[idx] += 1
    expected = counts.sum() / 100
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    # chi-square with 99 degrees of freedom: mean 99, sd 14
    assert abs(chi2 - 99) <= 3 * 14


# -- updates -----------------------------------------------------------------


def _tiny_dqn():
    hp = DqnHyperparams(gamma=0.5, learning_rate=0.1, batch_size=1, warmup=1, optimizer="sgd", hidden=[])
    params = Mlp([np.array([[1.0, 0.0], [0.0, 2.0]])], [np.zeros(2)])
    buf = ReplayBuffer(4, 2)
    return hp, params, buf


def test_dqn_hand_derived_step():
    hp, params, buf = _tiny_dqn()
    buf.add([1.0, 0.0], 0, 1.0, [0.0, 1.0], False)
    # Q(s, 0) = 1, target = 1 + 0.5 * max(0, 2) = 2, dL/dQ = 2 * (1 - 2) = -2
    new, loss = dqn_update(buf, params, params.copy(), hp, np.random.default_rng(0))
    assert loss == pytest.approx(1.0)
    assert np.allclose(new.weights[0], [[1.2, 0.0], [0.0, 2.0]], atol=1e-15)
    assert np.allclose(new.biases[0], [0.2, 0.0], atol=1e-15)


def test_dqn_terminal_target_ignores_bootstrap():
    hp, params, buf = _tiny_dqn()
    buf.add([1.0, 0.0], 0, 1.0, [0.0, 1.0], True)
    new, loss = dqn_update(buf, params, params.copy(), hp, np.random.default_rng(0))
    assert loss == 0.0
    assert np.array_equal(new.weights[0], params.weights[0])


def test_dqn_zero_td_error_leaves_params():
    hp, params, buf = _tiny_dqn()
    # Q(s, 1) = 2 = 1 + 0.5 * Q(s', 1)
    buf.add([0.0, 1.0], 1, 1.0, [0.0, 1.0], False)
    new, loss = dqn_update(buf, params, params.copy(), hp, np.random.default_rng(0))
    assert loss == 0.0
    assert all(np.array_equal(a, b) for a, b in zip(new.arrays(), params.arrays()))


def test_dqn_underfull_buffer():
    agent = DqnAgent(3, 2, DqnHyperparams(warmup=10), seed=0)
    for _ in range(9):
        agent.remember(np.zeros(3), 0, 0.0, np.zeros(3), False)
    assert not agent.ready()
    with pytest.raises(AgentError) as err:
        agent.update()
    assert err.value.code == "UNDERFULL_BUFFER"


def test_dqn_target_network_sync():
    agent = DqnAgent(3, 2, DqnHyperparams(warmup=1, batch_size=2, target_update_every=3, optimizer="adam"), seed=0)
    rng = np.random.default_rng(1)
    for _ in range(4):
        agent.remember(rng.normal(size=3), int(rng.integers(2)), 1.0, rng.normal(size=3), False)
    before = agent.target_params.copy()
    agent.update()
    agent.update()
    assert all(np.array_equal(a, b) for a, b in zip(agent.target_params.arrays(), before.arrays()))
    agent.update()
    assert all(np.array_equal(a, b) for a, b in zip(agent.target_params.arrays(), agent.params.arrays()))


def test_bad_hyperparams():
    with pytest.raises(AgentError):
        DqnHyperparams(learning_rate=0)
    with pytest.raises(AgentError):
        DqnHyperparams(epsilon_end=2.0)
    with pytest.raises(AgentError):
        ReinforceHyperparams(batch_episodes=0)


def _episode(rng, n, obs_dim=4):
    ep = Episode()
    for _ in range(n):
        ep.add(rng.normal(size=obs_dim), int(rng.integers(3)), float(rng.normal()))
    return ep


def test_reinforce_empty_batch():
    params = Mlp.init([4, 3], np.random.default_rng(0))
    with pytest.raises(AgentError) as err:
        reinforce_update([], params, ReinforceHyperparams())
    assert err.value.code == "EMPTY_BATCH"
    with pytest.raises(AgentError):
        reinforce_update([Episode()], params, ReinforceHyperparams())


def test_reinforce_zero_gradient_when_returns_equal_baseline():
    rng = np.random.default_rng(0)
    params = Mlp.init([4, 8, 3], rng)
    episodes = []
    for _ in range(3):
        ep = Episode()
        ep.add(rng.normal(size=4), int(rng.integers(3)), 2.0)
        episodes.append(ep)
    hp = ReinforceHyperparams(learning_rate=0.5)
    new, loss = reinforce_update(episodes, params, hp, Sgd(0.5))
    assert loss == 0.0
    assert all(np.array_equal(a, b) for a, b in zip(new.arrays(), params.arrays()))


def test_policy_gradient_linear_in_weights():
    rng = np.random.default_rng(4)
    params = Mlp.init([4, 8, 3], rng)
    obs = rng.normal(size=(6, 4))
    actions = rng.integers(3, size=6)
    w1, w2 = rng.normal(size=6), rng.normal(size=6)
    g1 = mlp_gradient(params, obs, policy_loss(params, obs, actions, w1, 2)[1]).arrays()
    g2 = mlp_gradient(params, obs, policy_loss(params, obs, actions, w2, 2)[1]).arrays()
    g12 = mlp_gradient(params, obs, policy_loss(params, obs, actions, 3 * w1 + w2, 2)[1]).arrays()
    for a, b, c in zip(g1, g2, g12):
        assert np.allclose(3 * a + b, c, rtol=1e-10, atol=1e-12)


def test_reinforce_update_raises_probability_of_good_action():
    agent = ReinforceAgent(2, 2, ReinforceHyperparams(learning_rate=0.1, hidden=[8], optimizer="sgd"), seed=0)
    obs = np.array([1.0, 0.0])
    p0 = agent.probabilities(obs)[1]
    good, bad = Episode(), Episode()
    good.add(obs, 1, 1.0)
    bad.add(obs, 0, -1.0)
    agent.update([good, bad])
    assert agent.probabilities(obs)[1] > p0


def test_agents_deterministic_per_seed():
    def run(seed):
        agent = DqnAgent(4, 3, DqnHyperparams(warmup=8, batch_size=8, hidden=[16], optimizer="adam"), seed=seed)
        rng = np.random.default_rng(99)
        acts = []
        for _ in range(40):
            obs = rng.normal(size=4)
            a = agent.act(obs)
            acts.append(a)
            agent.remember(obs, a, float(rng.normal()), rng.normal(size=4), False)
            if agent.ready():
                agent.update()
        return acts, [x.tolist() for x in agent.params.arrays()]

    assert run(7) == run(7)
    assert run(7) != run(8)


def test_adam_first_step_is_learning_rate_sized():
    params = Mlp([np.zeros((1, 1))], [np.zeros(1)])
    grads = mlp_gradient(Mlp([np.ones((1, 1))], [np.zeros(1)]), np.ones(1), np.array([0.5]))
    new = Adam(0.01).step(params, grads)
    assert new.biases[0][0] == pytest.approx(-0.01, rel=1e-6)


# -- checkpoints -------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    params = Mlp.init([5, 7, 3], np.random.default_rng(2))
    path = save_policy(params, tmp_path / "p.json", ["STOP", "FORWARD", "LEFT"], [f"f{i}" for i in range(5)], "dqn")
    pol = load_policy(path)
    assert pol.algorithm == "dqn" and pol.action_set == ["STOP", "FORWARD", "LEFT"]
    assert all(np.array_equal(a, b) for a, b in zip(pol.params.arrays(), params.arrays()))
    obs = np.random.default_rng(3).normal(size=(10, 5))
    assert np.array_equal(mlp_forward(pol.params, obs), mlp_forward(params, obs))


def test_checkpoint_truncated(tmp_path):
    path = save_policy(Mlp.init([3, 2], np.random.default_rng(0)), tmp_path / "p.json")
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CheckpointError):
        load_policy(path)


def test_checkpoint_version_mismatch(tmp_path):
    path = save_policy(Mlp.init([3, 2], np.random.default_rng(0)), tmp_path / "p.json")
    doc = json.loads(path.read_text())
    doc["version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError, match="version"):
        load_policy(path)


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("weights"),
    lambda d: d.__setitem__("layer_sizes", [3, 4]),
    lambda d: d["biases"][0].append(1.0),
    lambda d: d.__setitem__("action_set", ["STOP"]),
])
def test_checkpoint_malformed(tmp_path, mutate):
    path = save_policy(Mlp.init([3, 2], np.random.default_rng(0)), tmp_path / "p.json", ["STOP", "FORWARD"])
    doc = json.loads(path.read_text())
    mutate(doc)
    path.write_text(json.dumps(doc))
    with pytest.raises(CheckpointError):
        load_policy(path)


def test_checkpoint_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_policy(tmp_path / "none.json")
