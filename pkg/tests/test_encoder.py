import numpy as np
import pytest

from sslfuse import tensor as T
from sslfuse.encoder import (ConformerBlock, ConformerEncoder, ConvSubsample, InputError, conformer_block,
                             encode, subsampled_length)
from sslfuse.fusion import FusionMode
from sslfuse.nn import sinusoidal_positions
from sslfuse.tensor import ShapeError, Tensor

from oracles import central_difference, rel_err


def small_encoder(mode="none", dims=(), layers=2, seed=0):
    return ConformerEncoder(8, 8, 2, layers, 2, 3, 2, FusionMode(mode), list(dims), seed, np.float64)


@pytest.mark.parametrize("t,want", [(10, 5), (9, 4), (4, 2), (5, 2), (101, 50)])
def test_subsample_length(t, want):
    sub = ConvSubsample(8, 6, 2, np.random.default_rng(0))
    assert subsampled_length(t) == want
    assert sub(np.zeros((t, 8))).shape == (want, 6)


def test_subsample_errors_and_default_width():
    sub = ConvSubsample(80, 256, 4, np.random.default_rng(0))
    assert sub(np.random.default_rng(1).standard_normal((12, 80))).shape == (6, 256)
    with pytest.raises(InputError):
        sub(np.zeros((3, 80)))
    with pytest.raises(ShapeError):
        sub(np.zeros((8, 40)))


def test_block_shape_preserved():
    block = ConformerBlock(256, 4, 4, 15, np.random.default_rng(0))
    x = Tensor(np.random.default_rng(1).standard_normal((7, 256)))
    assert conformer_block(x, block).shape == (7, 256)
    with pytest.raises(ShapeError):
        block(Tensor(np.zeros((7, 8))))


def test_block_zero_parameters_reduce_to_layer_norm():
    block = ConformerBlock(8, 2, 2, 3, np.random.default_rng(0))
    for p in block.parameters():
        p.data[...] = 0.0
    block.out_norm.gain.data[...] = 1.0
    x = Tensor(np.random.default_rng(1).standard_normal((5, 8)))
    want = T.layer_norm(x, Tensor(np.ones(8)), Tensor(np.zeros(8))).data
    assert np.allclose(block(x).data, want, atol=1e-12)


def _check_module_grads(module, loss, tol=1e-4):
    module.zero_grad()
    loss().backward()
    for p in module.parameters():
        num = central_difference(lambda: float(loss().data), p.data)
        assert rel_err(num, p.grad) < tol


def test_block_gradient_miniature():
    r = np.random.default_rng(2)
    block = ConformerBlock(8, 2, 2, 3, r)
    x = Tensor(r.standard_normal((5, 8)))
    w = r.standard_normal((5, 8))
    _check_module_grads(block, lambda: (block(x) * w).sum())


def test_encoder_gradient_two_layers():
    r = np.random.default_rng(3)
    enc = small_encoder("ca", [6])
    u, v = r.standard_normal((10, 8)), r.standard_normal((6, 6))
    w = r.standard_normal((5, 8))
    _check_module_grads(enc, lambda: (enc(u, [v]).h * w).sum())


def test_none_mode_is_plain_conformer():
    enc = small_encoder("none")
    u = np.random.default_rng(4).standard_normal((11, 8))
    x = enc.subsample(u)
    x = x + sinusoidal_positions(x.shape[0], 8)
    for b in enc.blocks:
        x = b(x)
    assert enc(u).h.data.tobytes() == x.data.tobytes()
    assert enc.fusion.num_parameters() == 0


def test_sfa_with_zero_ssl_equals_baseline():
    base, sfa = small_encoder("none"), small_encoder("sfa", [6])
    proj = sfa.fusion.projections[0]
    proj.norm.gain.data[...] = 0
    proj.norm.bias.data[...] = 0
    r = np.random.default_rng(5)
    u, v = r.standard_normal((12, 8)), r.standard_normal((5, 6))
    assert np.array_equal(encode(u, v, sfa).h.data, encode(u, None, base).h.data)


@pytest.mark.parametrize("mode,dims", [("none", []), ("sfa", [6]), ("ca", [6]), ("multi-ca", [6, 4])])
@pytest.mark.parametrize("t", [9, 14])
def test_output_length_all_modes(mode, dims, t):
    enc = small_encoder(mode, dims, layers=1)
    r = np.random.default_rng(6)
    out = enc(r.standard_normal((t, 8)), [r.standard_normal((t // 2, d)) for d in dims])
    assert out.h.shape == (t // 2, 8)
    if mode in ("ca", "multi-ca"):
        assert [a.shape for a in out.attention] == [(t // 2, t // 2)] * len(dims)
