import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualground.geometry import offset_field
from dualground.numerics import MlpParams, grad_check, param, tensor
from dualground.posenc import (
    PosEncConfig,
    attention_bias,
    f_nonlinear,
    make_posenc,
    pe_bias,
    pe_cost_model,
)

from . import oracles


def _scene(seed=0, K=2, N=3):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2, 2, size=(N, 3))
    bx = np.c_[rng.uniform(-1, 1, size=(K, 3)), rng.uniform(0.5, 2, size=(K, 3))]
    return pts, bx


def test_config_validation():
    with pytest.raises(ValueError):
        make_posenc("sphere")
    with pytest.raises(ValueError):
        make_posenc("center", f_scale=0.0)
    with pytest.raises(ValueError):
        make_posenc("center", num_heads=0)
    with pytest.raises(ValueError):
        PosEncConfig("vertex", mlps=make_posenc("center").mlps)
    assert len(make_posenc("vertex", num_heads=2).mlps) == 8
    assert len(make_posenc("box_surface", num_heads=2).mlps) == 1


def test_f_examples():
    cfg = make_posenc()
    assert f_nonlinear(np.zeros(3), cfg).tolist() == [0, 0, 0]
    assert f_nonlinear(np.array([0.1]), cfg)[0] == pytest.approx(math.log(2), abs=1e-12)
    d = np.random.default_rng(0).normal(size=(4, 5, 3))
    assert np.array_equal(f_nonlinear(-d, cfg), -f_nonlinear(d, cfg))
    ident = make_posenc(f_kind="identity")
    assert np.array_equal(f_nonlinear(d, ident), d)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(1e-4, 1e-2), st.sampled_from([0.05, 0.1, 1.0]))
def test_signed_log_monotone_with_bounded_slope(d, step, scale):
    cfg = make_posenc(f_scale=scale)
    lo, hi = f_nonlinear(np.array([d, d + step]), cfg)
    assert hi >= lo
    assert (hi - lo) / step <= 1.0 / scale * (1 + 1e-9)


def test_zero_mlp_gives_constant_bias():
    beta = np.array([0.3, -0.7])
    mlp = MlpParams(param(np.zeros((3, 4))), param(np.zeros(4)), param(np.zeros((4, 2))), param(beta))
    cfg = PosEncConfig("box_surface", num_heads=2, hidden_dim=4, mlps=[mlp])
    pts, bx = _scene(1, K=3, N=5)
    E = attention_bias(pts, bx, cfg)
    assert E.shape == (2, 3, 5)
    assert np.array_equal(E.data[0], np.full((3, 5), 0.3))
    assert np.array_equal(E.data[1], np.full((3, 5), -0.7))


@pytest.mark.parametrize("scheme", ["box_surface", "center", "vertex"])
def test_bias_matches_scalar_loop_oracle(scheme):
    pts, bx = _scene(2, K=2, N=3)
    cfg = make_posenc(scheme, num_heads=2, hidden_dim=5, seed=3)
    E = attention_bias(pts, bx, cfg).data
    mlps = [[t.data.tolist() for t in m.parameters()] for m in cfg.mlps]
    want = np.array(oracles.bias_oracle(pts.tolist(), bx.tolist(), scheme, mlps))
    assert np.max(np.abs(E - want)) < 1e-12


def test_single_pair_reduces_to_mlp_scalar():
    pts, bx = _scene(3, K=1, N=1)
    cfg = make_posenc("box_surface", num_heads=1, hidden_dim=4, seed=0)
    off = offset_field(pts, bx)[0, 0]
    f = [oracles.signed_log(v) for v in off]
    want = oracles.mlp([f], *[t.data.tolist() for t in cfg.mlps[0].parameters()])[0][0]
    assert attention_bias(pts, bx, cfg).data[0, 0, 0] == pytest.approx(want, abs=1e-14)


def test_shape_mismatch_vs_scheme():
    cfg = make_posenc("vertex")
    with pytest.raises(ValueError):
        pe_bias(np.zeros((2, 3, 3)), cfg)
    with pytest.raises(ValueError):
        pe_bias(np.zeros((2, 3, 8, 3)), make_posenc("center"))


@pytest.mark.parametrize("scheme", ["box_surface", "center", "vertex"])
def test_bias_gradients_wrt_mlp_params(scheme):
    pts, bx = _scene(4, K=2, N=4)
    cfg = make_posenc(scheme, num_heads=2, hidden_dim=4, seed=5)
    w = np.random.default_rng(6).normal(size=(2, 2, 4))
    err = grad_check(lambda: (attention_bias(pts, bx, cfg) * tensor(w)).sum(), cfg.parameters())
    assert err < 1e-4


@settings(max_examples=50, deadline=None)
@given(st.tuples(*[st.floats(-3, 3)] * 3), st.sampled_from(["box_surface", "center", "vertex"]))
def test_translation_invariance(t, scheme):
    pts, bx = _scene(7, K=3, N=6)
    cfg = make_posenc(scheme, num_heads=2, hidden_dim=4, seed=1)
    shift = np.array(t)
    E1 = attention_bias(pts, bx, cfg).data
    E2 = attention_bias(pts + shift, np.c_[bx[:, :3] + shift, bx[:, 3:]], cfg).data
    assert np.allclose(E1, E2, atol=1e-9)


def test_vertex_corner_mlp_permutation_symmetry():
    pts, bx = _scene(8, K=2, N=5)
    cfg = make_posenc("vertex", num_heads=2, hidden_dim=4, seed=2)
    delta = offset_field(pts, bx, "vertex")
    perm = [3, 0, 7, 1, 6, 2, 5, 4]
    swapped = PosEncConfig("vertex", cfg.f_kind, cfg.f_scale, 2, 4, [cfg.mlps[i] for i in perm])
    E1 = pe_bias(delta, cfg).data
    E2 = pe_bias(delta[:, :, perm, :], swapped).data
    assert np.allclose(E1, E2, atol=1e-12)


def test_cost_model_counts():
    K, N, Dh, H = 16, 64, 32, 4
    box = pe_cost_model("box_surface", K, N, Dh, H)
    ctr = pe_cost_model("center", K, N, Dh, H)
    vtx = pe_cost_model("vertex", K, N, Dh, H)
    assert box == ctr
    assert vtx.mlp_applications / box.mlp_applications == 8
    assert box.bias_buffer_scalars == K * N * 3 + H * K * N
    assert vtx.offset_scalars == 8 * box.offset_scalars
    with pytest.raises(ValueError):
        pe_cost_model("box_surface", 0, N, Dh, H)
