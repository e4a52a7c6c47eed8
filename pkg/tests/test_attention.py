import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualground.attention import (
    AttnParams,
    EmptySurroundingError,
    GateVector,
    GateWiring,
    confidence_gate,
    gated_cross_attention,
    init_attn,
    text_gate,
    token_confidence,
)
from dualground.numerics import grad_check, param, sigmoid, tensor

from . import oracles

WIRINGS = [w.value for w in GateWiring]


def _inputs(seed, K=2, N=3, D=4, H=1, L=2):
    rng = np.random.default_rng(seed)
    Q = tensor(rng.normal(size=(K, D)))
    X = tensor(rng.normal(size=(N, D)))
    E = tensor(rng.normal(size=(H, K, N)))
    T = tensor(rng.normal(size=(L, D)))
    return Q, X, E, T, init_attn(D, rng)


def test_token_confidence_examples():
    V = tensor(np.eye(4)[:3])
    conf = token_confidence(V, tensor(np.eye(4)[:1]))
    assert conf.data[:, 0].tolist() == [1, 0, 0]
    assert np.all(token_confidence(V, tensor(np.zeros((2, 4)))).data == 0)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(4, 8)), rng.normal(size=(3, 8))
    assert np.allclose(token_confidence(tensor(a), tensor(b)).data, oracles.mm(a.tolist(), oracles.transpose(b.tolist())))


def test_token_confidence_errors():
    with pytest.raises(EmptySurroundingError):
        token_confidence(tensor(np.ones((3, 4))), tensor(np.zeros((0, 4))))
    with pytest.raises(ValueError):
        token_confidence(tensor(np.ones((3, 4))), tensor(np.ones((2, 5))))


def test_confidence_gate_examples():
    g = confidence_gate(tensor(np.zeros((3, 2))))
    assert np.all(g.g.data == 0.5)
    g = confidence_gate(tensor([[2.0, -1.0]]))
    assert g.g.data[0] == pytest.approx(0.88080, abs=1e-5)
    assert g.logits.data[0] == 2.0


def test_gate_monotone_under_random_increases():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        conf = rng.normal(scale=3, size=(4, 3))
        bumped = conf.copy()
        i, j = rng.integers(4), rng.integers(3)
        bumped[i, j] += rng.exponential()
        g0 = confidence_gate(tensor(conf)).g.data
        g1 = confidence_gate(tensor(bumped)).g.data
        assert np.all(g1 >= g0)


def test_uniform_attention_when_logits_vanish():
    Q, X, _, _, p = _inputs(0, K=3, N=5)
    zero = AttnParams(param(np.zeros((4, 4))), p.wk, p.wv, p.wo)
    _, attn = gated_cross_attention(Q, X, X, zero, 1)
    assert np.allclose(attn.data, 1 / 5, atol=1e-15)


@pytest.mark.parametrize("wiring", WIRINGS)
@pytest.mark.parametrize("seed", range(3))
def test_matches_scalar_formula(wiring, seed):
    Q, X, E, T, p = _inputs(seed, K=2, N=3, D=4, H=1)
    gate = text_gate(X, T)
    out, attn = gated_cross_attention(Q, X, X, p, 1, E, gate if wiring != "none" else None, wiring)
    g, logits = oracles.gate_oracle(X.tolist(), T.tolist())
    want_out, want_attn = oracles.attention(
        Q.tolist(), X.tolist(), X.tolist(), *(t.tolist() for t in (p.wq, p.wk, p.wv, p.wo)),
        1, E.tolist(), g, logits, wiring,
    )
    assert np.max(np.abs(attn.data - np.array(want_attn))) < 1e-12
    assert np.max(np.abs(out.data - np.array(want_out))) < 1e-12


def test_multi_head_matches_scalar_formula():
    Q, X, E, T, p = _inputs(5, K=3, N=4, D=8, H=2)
    gate = text_gate(X, T)
    out, attn = gated_cross_attention(Q, X, X, p, 2, E, gate, "gate_on_all")
    g, logits = oracles.gate_oracle(X.tolist(), T.tolist())
    want_out, want_attn = oracles.attention(
        Q.tolist(), X.tolist(), X.tolist(), *(t.tolist() for t in (p.wq, p.wk, p.wv, p.wo)),
        2, E.tolist(), g, logits, "gate_on_all",
    )
    assert np.max(np.abs(attn.data - np.array(want_attn))) < 1e-12
    assert np.max(np.abs(out.data - np.array(want_out))) < 1e-12


def test_gate_of_one_is_bit_identical_to_no_gate():
    Q, X, E, _, p = _inputs(2, K=3, N=5, D=8, H=2)
    ones = GateVector(tensor(np.ones(5)), tensor(np.zeros(5)))
    o1, a1 = gated_cross_attention(Q, X, X, p, 2, E, ones, "gate_on_all")
    o2, a2 = gated_cross_attention(Q, X, X, p, 2, E)
    assert np.array_equal(a1.data, a2.data)
    assert np.array_equal(o1.data, o2.data)


def test_small_gate_shrinks_attention_mass():
    Q, X, _, _, p = _inputs(3, K=2, N=4, D=4, H=1)
    E = tensor(np.tile(np.array([0.0, 5.0, 5.0, 5.0]), (1, 2, 1)))
    E.data[0, :, 0] = 8.0  # seed 0 strongly favoured by the bias
    g = np.ones(4)
    g[0] = 0.01
    gate = GateVector(tensor(g), tensor(np.zeros(4)))
    _, gated = gated_cross_attention(Q, X, X, p, 1, E, gate, "gate_on_all")
    _, plain = gated_cross_attention(Q, X, X, p, 1, E)
    assert np.all(gated.data[0, :, 0] < plain.data[0, :, 0])


def test_scaling_gate_down_moves_toward_uniform():
    Q, X, E, _, p = _inputs(4, K=3, N=6, D=8, H=2)
    g = np.random.default_rng(0).uniform(0.5, 1.0, size=6)

    def kl_to_uniform(scale):
        gate = GateVector(tensor(g * scale), tensor(np.zeros(6)))
        _, a = gated_cross_attention(Q, X, X, p, 2, E, gate, "gate_on_all")
        return float(np.sum(a.data * np.log(a.data * 6)))

    kls = [kl_to_uniform(s) for s in (1.0, 0.5, 0.1, 0.01)]
    assert all(b < a for a, b in zip(kls, kls[1:]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(WIRINGS))
def test_rows_normalise_for_every_wiring(seed, wiring):
    Q, X, E, T, p = _inputs(seed, K=3, N=7, D=8, H=2, L=3)
    E = tensor(E.data * 10)
    gate = text_gate(X, T)
    _, attn = gated_cross_attention(Q, X, X, p, 2, E, gate, wiring)
    assert attn.shape == (2, 3, 7)
    assert np.all(np.abs(attn.data.sum(axis=-1) - 1) < 1e-9)


@pytest.mark.parametrize("wiring", WIRINGS)
def test_gradients_through_every_wiring(wiring):
    rng = np.random.default_rng(9)
    Q, X, E, T, p = _inputs(9, K=4, N=8, D=16, H=2, L=3)
    w = tensor(rng.normal(size=(4, 16)))
    leaves = [Q, X, E, T, p.wq, p.wk, p.wv, p.wo]

    def loss():
        gate = text_gate(X, T) if wiring != "none" else None
        out, _ = gated_cross_attention(Q, X, X, p, 2, E, gate, wiring)
        return (out * w).sum()

    assert grad_check(loss, leaves) < 1e-4


def test_argument_errors():
    Q, X, E, T, p = _inputs(0, K=2, N=3, D=4, H=1)
    with pytest.raises(ValueError, match="divisible"):
        gated_cross_attention(Q, X, X, p, 3)
    with pytest.raises(ValueError, match="needs a gate"):
        gated_cross_attention(Q, X, X, p, 1, E, None, "gate_on_pe")
    with pytest.raises(ValueError, match="bias"):
        gated_cross_attention(Q, X, X, p, 1, tensor(np.zeros((1, 3, 2))))
    with pytest.raises(ValueError):
        gated_cross_attention(Q, X, X, p, 1, E, GateVector(tensor(np.ones(2)), tensor(np.ones(2))), "gate_on_all")
    with pytest.raises(ValueError):
        gated_cross_attention(Q, X, X, p, 1, wiring="gate_everything")


def test_gate_uses_sigmoid_of_row_max():
    rng = np.random.default_rng(3)
    V, T = tensor(rng.normal(size=(5, 4))), tensor(rng.normal(size=(2, 4)))
    g = text_gate(V, T)
    want = sigmoid(tensor((V.data @ T.data.T).max(axis=1))).data
    assert np.array_equal(g.g.data, want)
