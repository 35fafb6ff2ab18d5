import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from semf import tensor as T
from semf.encoders import (
    ExoConfig,
    ExogenousEncoder,
    MlpExogenousEncoder,
    SpectrogramEncoder,
    VitConfig,
    pad_to_patches,
    patchify,
    revin_denormalize,
    revin_normalize,
    unpatchify,
)
from semf.errors import ShapeError
from semf.gradcheck import gradcheck
from semf.nn import make_rng


def small_vit(**kw):
    base = dict(patch_size=4, d_model=16, n_heads=2, n_layers=1, image_shape=(8, 12), dropout=0.0)
    base.update(kw)
    return SpectrogramEncoder(VitConfig(**base), make_rng(0))


def small_exo(cls=ExogenousEncoder, **kw):
    base = dict(n_vars=3, seq_len=10, d_model=16, n_heads=2, n_layers=1, dropout=0.0)
    base.update(kw)
    return cls(ExoConfig(**base), make_rng(1))


# ------------------------------------------------------------------ RevIN


def test_revin_constant_column_is_zero():
    w = np.random.default_rng(0).standard_normal((20, 3))
    w[:, 1] = 4.2
    z, _ = revin_normalize(w)
    assert np.all(z[:, 1] == 0.0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (15, 4), elements=st.floats(-1e4, 1e4)))
def test_revin_round_trip(w):
    z, stats = revin_normalize(w)
    assert np.abs(revin_denormalize(z, stats) - w).max() <= 1e-9 * max(1.0, np.abs(w).max())


def test_revin_round_trip_with_affine():
    w = np.random.default_rng(1).standard_normal((4, 30, 3)) * 50 + 7
    z, stats = revin_normalize(w, gamma=np.array([2.0, 0.5, 1.5]), beta=np.array([0.1, -1.0, 0.0]))
    assert np.abs(revin_denormalize(z, stats) - w).max() < 1e-9


def test_revin_moments():
    w = np.random.default_rng(2).standard_normal((120, 10)) * 30 + 1000
    z, _ = revin_normalize(w)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(z.std(axis=0), 1.0, atol=1e-9)


# ------------------------------------------------------------------ patches


def test_patch_count_at_default_size():
    tokens = patchify(np.zeros((128, 120)), 8)
    assert tokens.shape == (240, 64)


def test_identity_patch():
    img = np.arange(64.0).reshape(8, 8)
    np.testing.assert_array_equal(patchify(img, 8), img.reshape(1, 64))


def test_patch_order_row_major():
    img = np.arange(16.0).reshape(4, 4)
    tokens = patchify(img, 2)
    np.testing.assert_array_equal(tokens[0], [0, 1, 4, 5])
    np.testing.assert_array_equal(tokens[1], [2, 3, 6, 7])
    np.testing.assert_array_equal(tokens[2], [8, 9, 12, 13])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from([1, 2, 4, 8]))
def test_patchify_bijection(gh, gw, p):
    img = np.random.default_rng(gh * 10 + gw).standard_normal((2, gh * p, gw * p))
    assert np.array_equal(unpatchify(patchify(img, p), p, img.shape[-2:]), img)


def test_indivisible_is_shape_error():
    with pytest.raises(ShapeError):
        patchify(np.zeros((10, 12)), 8)


def test_padding_keeps_newest_columns_aligned():
    img = np.ones((128, 120))
    padded = pad_to_patches(img, 16)
    assert padded.shape == (128, 128)
    assert np.all(padded[:, :8] == 0) and np.all(padded[:, 8:] == 1)


# ------------------------------------------------------------------ spectrogram encoder


def test_vit_output_shapes_default():
    enc = SpectrogramEncoder(VitConfig(d_model=16, n_heads=2, n_layers=1), make_rng(0))
    enc.eval()
    cls, patches = enc(np.random.default_rng(0).standard_normal((2, 128, 120)))
    assert cls.shape == (2, 16) and patches.shape == (2, 240, 16)


def test_vit_attention_rows_sum_to_one():
    enc = small_vit(n_layers=2)
    enc(np.random.default_rng(1).standard_normal((3, 8, 12)))
    for block in enc.blocks:
        np.testing.assert_allclose(block.attn.last_probs.sum(axis=-1), 1.0, atol=1e-6)


def test_vit_positional_sensitivity():
    enc = small_vit()
    for name, p in enc.named_parameters():
        if name.endswith("gamma"):
            p.data[...] = 1.0
        elif name != "pos_table":
            p.data[...] = 0.0
    tokens = np.zeros((1, 6, 16))
    cls_a, seq_a = enc.encode_tokens(tokens)
    np.testing.assert_allclose(seq_a.data[0], T.layer_norm(T.Tensor(enc.pos_table.data[1:])).data, atol=1e-12)
    enc.pos_table.data[...] = make_rng(5).standard_normal(enc.pos_table.shape)
    base = enc.encode_tokens(tokens)[1].data
    perm = enc.pos_table.data.copy()
    perm[1:] = perm[1:][::-1]
    enc.pos_table.data[...] = perm
    assert not np.allclose(base, enc.encode_tokens(tokens)[1].data)


def test_vit_wrong_shape():
    with pytest.raises(ShapeError):
        small_vit()(np.zeros((1, 9, 12)))


def test_vit_gradcheck():
    enc = small_vit()
    images = np.random.default_rng(2).standard_normal((2, 8, 12))

    def f(*_):
        cls, seq = enc(images)
        return T.sum(T.sin(cls)) + T.mean(T.square(seq))

    assert gradcheck(f, enc.parameters()).max_error < 1e-3


# ------------------------------------------------------------------ exogenous encoders


def test_exo_shapes_default_width():
    enc = ExogenousEncoder(ExoConfig(d_model=16, n_heads=2, n_layers=1), make_rng(0))
    summary, tokens = enc(np.random.default_rng(0).standard_normal((2, 120, 10)))
    assert summary.shape == (2, 16) and tokens.shape == (2, 120, 16)


def test_summary_is_token_mean():
    enc = small_exo()
    summary, tokens = enc(np.random.default_rng(3).standard_normal((2, 10, 3)))
    assert np.abs(summary.data - tokens.data.mean(axis=1)).max() < 1e-9


def test_exo_attention_rows_sum_to_one():
    enc = small_exo(n_layers=2)
    enc(np.random.default_rng(4).standard_normal((2, 10, 3)))
    for block in enc.blocks:
        np.testing.assert_allclose(block.attn.last_probs.sum(axis=-1), 1.0, atol=1e-6)


def test_constant_input_symmetric_tokens():
    enc = small_exo()
    enc._pe = np.zeros_like(enc._pe)
    summary, tokens = enc(np.full((1, 10, 3), 5.0))
    assert np.abs(tokens.data - tokens.data[:, :1]).max() < 1e-12
    assert np.abs(summary.data - tokens.data[:, 0]).max() < 1e-12


@pytest.mark.parametrize("cls", [ExogenousEncoder, MlpExogenousEncoder])
def test_affine_rescaling_invariance(cls):
    enc = small_exo(cls)
    rng = np.random.default_rng(5)
    w = rng.standard_normal((2, 10, 3))
    scaled = w * np.array([3.0, 0.01, 250.0]) + np.array([-4.0, 100.0, 1e3])
    a, b = enc(w), enc(scaled)
    assert np.abs(a[0].data - b[0].data).max() < 1e-6
    assert np.abs(a[1].data - b[1].data).max() < 1e-6


def test_one_variable_changes_summary():
    enc = small_exo()
    w = np.random.default_rng(6).standard_normal((1, 10, 3))
    w2 = w.copy()
    w2[0, :, 2] = np.random.default_rng(7).standard_normal(10)
    assert not np.allclose(enc(w)[0].data, enc(w2)[0].data)


def test_mlp_interface_matches_transformer():
    w = np.random.default_rng(8).standard_normal((2, 10, 3))
    a, b = small_exo()(w), small_exo(MlpExogenousEncoder)(w)
    assert a[0].shape == b[0].shape and a[1].shape == b[1].shape


def test_mlp_flat_path_sees_time_order():
    enc = small_exo(MlpExogenousEncoder)
    w = np.random.default_rng(9).standard_normal((1, 10, 3))
    assert not np.allclose(enc(w)[0].data, enc(w[:, ::-1])[0].data)


@pytest.mark.parametrize("cls,tol", [(ExogenousEncoder, 1e-3), (MlpExogenousEncoder, 1e-4)])
def test_exo_gradcheck(cls, tol):
    enc = small_exo(cls, revin_affine=True)
    w = np.random.default_rng(10).standard_normal((2, 10, 3))

    def f(*_):
        summary, tokens = enc(w)
        return T.sum(T.sin(summary)) + T.mean(T.square(tokens))

    assert gradcheck(f, enc.parameters()).max_error < tol


def test_exo_wrong_shape():
    with pytest.raises(ShapeError):
        small_exo()(np.zeros((1, 10, 4)))
    with pytest.raises(ShapeError):
        ExoConfig(d_model=10, n_heads=3)
