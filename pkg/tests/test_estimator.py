import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import A_DI, B_DI
from switchnav.errors import InactiveSensor, NotAddressed, SizeMismatch
from switchnav.estimator import (
    EstimatorBank,
    EstimatorState,
    SwitchMessage,
    consensus_round,
    handle_switch_message,
    local_update,
    network_step,
    predicted_control,
)
from switchnav.network import SensorGraph, ring_adjacency
from switchnav.plant import SensorSpec, SystemModel

MODEL = SystemModel(A_DI, B_DI)
K2 = np.array([[0, 1], [1, 0]], dtype=float)


def test_predicted_control_examples():
    rng = np.random.default_rng(0)
    K = rng.normal(size=(2, 4))
    r = rng.normal(size=4)
    u_r = rng.normal(size=2)
    assert np.allclose(predicted_control(r, r, u_r, K), u_r)
    assert np.allclose(predicted_control(r + 1, r, u_r, np.zeros((2, 4))), u_r)
    e = rng.normal(size=4)
    assert np.allclose(predicted_control(r + e, r, np.zeros(2), K), K @ e)


def test_local_update_examples():
    rng = np.random.default_rng(1)
    C = np.array([[1.0, 0, 0, 0]])
    G = rng.normal(size=(4, 1))
    xh, u = rng.normal(size=4), rng.normal(size=2)
    pred = A_DI @ xh + B_DI @ u
    assert np.allclose(local_update(xh, u, C @ xh, MODEL, G, C), pred)
    assert np.allclose(local_update(xh, u, [3.0], MODEL, np.zeros((4, 1)), C), pred)
    with pytest.raises(InactiveSensor):
        local_update(xh, u, [0.0], MODEL, G, C, active=False)


def test_consensus_round_examples():
    g = SensorGraph([1, 2], K2, alpha=0.5)
    X = np.array([[1.0, 2.0], [3.0, 6.0]])
    assert np.allclose(consensus_round(X, g), [[2.0, 4.0], [2.0, 4.0]])
    same = np.tile([1.0, -1.0], (2, 1))
    assert np.allclose(consensus_round(same, g), same)
    with pytest.raises(SizeMismatch):
        consensus_round(np.zeros((3, 2)), g)


@given(st.integers(0, 10_000), st.integers(3, 8))
def test_consensus_preserves_mean_and_contracts(seed, m):
    rng = np.random.default_rng(seed)
    g = SensorGraph(list(range(m)), ring_adjacency(m))
    X = rng.normal(size=(m, 4))
    Y = consensus_round(X, g)
    assert np.allclose(Y.mean(axis=0), X.mean(axis=0), atol=1e-12)
    dx = np.linalg.norm(X - X.mean(axis=0))
    dy = np.linalg.norm(Y - Y.mean(axis=0))
    assert dy <= g.contraction * dx + 1e-9


def _setup(rounds):
    ids = [1, 2, 3, 4]
    sensors = {i: SensorSpec(i, [[1, 0, 0, 0]] if i % 2 else [[0, 0, 1, 0]]) for i in ids}
    g = SensorGraph(ids, ring_adjacency(4), rounds=rounds)
    rng = np.random.default_rng(7)
    gains = {i: rng.normal(scale=0.3, size=(4, 1)) for i in ids}
    return ids, sensors, g, gains


def test_zero_rounds_skips_mixing():
    ids, sensors, g, gains = _setup(0)
    rng = np.random.default_rng(2)
    states = {i: EstimatorState(i, rng.normal(size=4), active=True) for i in ids}
    ys = {i: rng.normal(size=1) for i in ids}
    K = rng.normal(size=(2, 4))
    r, u_r = rng.normal(size=4), rng.normal(size=2)
    out = network_step(states, ys, r, u_r, K, MODEL, sensors, g, gains)
    for i in ids:
        u = predicted_control(states[i].estimate, r, u_r, K)
        assert np.allclose(out[i].estimate, local_update(states[i].estimate, u, ys[i], MODEL, gains[i], sensors[i].C))


@given(st.integers(0, 10_000), st.integers(0, 6))
def test_bank_matches_reference_composition(seed, rounds):
    ids, sensors, g, gains = _setup(rounds)
    rng = np.random.default_rng(seed)
    X0 = rng.normal(size=(6, 4))
    bank = EstimatorBank([1, 2, 3, 4, 5, 6], X0)
    bank.activate(1, g, 2, gains, sensors)
    states = {i: EstimatorState(i, X0[i - 1], active=True) for i in ids}
    K = rng.normal(size=(2, 4))
    for _ in range(3):
        r, u_r = rng.normal(size=4), rng.normal(size=2)
        ys = {i: rng.normal(size=1) for i in ids}
        states = network_step(states, ys, r, u_r, K, MODEL, sensors, g, gains)
        bank.step(np.concatenate([ys[i] for i in ids]), r, u_r, K, MODEL)
    for i in ids:
        assert np.allclose(bank.estimate(i), states[i].estimate, atol=1e-10)
    # sensors 5 and 6 never joined, so they keep their initial estimates bit for bit
    assert np.array_equal(bank.X[4:], X0[4:])


def test_switch_message_handling():
    handoff = np.array([1.0, 2.0, 3.0, 4.0])
    msg = SwitchMessage(task=2, handoff=handoff, designated=5)
    v1, v2 = range(1, 7), range(3, 9)
    s2 = handle_switch_message(EstimatorState(2, np.zeros(4), True, 1), msg, v1, v2)
    assert not s2.active
    s5 = handle_switch_message(EstimatorState(5, np.zeros(4), True, 1), msg, v1, v2)
    assert s5.active and s5.designated and s5.task == 2
    assert np.array_equal(s5.estimate, handoff)
    s7 = handle_switch_message(EstimatorState(7, np.ones(4)), msg, v1, v2)
    assert s7.active and not s7.designated and np.array_equal(s7.estimate, s5.estimate)
    with pytest.raises(NotAddressed):
        handle_switch_message(EstimatorState(11, np.zeros(4)), msg, v1, v2)
