import math

import numpy as np
import pytest

from hyperdiff import autodiff as ad
from hyperdiff.models import (MlpSpec, TimeEmbedding, WeightVector,
                              draw_dropout_masks, init_weights, layout_for,
                              mlp_forward, mlp_forward_np, time_embed)
from hyperdiff.rng import stream


def test_parameter_count():
    # (2+1)*4 + (4+1)*3 = 12 + 15 ... weights + biases per layer
    assert MlpSpec((2, 4, 3)).parameter_count == (2 + 1) * 4 + (4 + 1) * 3
    # backbone used throughout: 18 -> 64 x4 -> 1
    assert MlpSpec((18, 64, 64, 64, 64, 1)).parameter_count == 13761


def test_layout_tiles_vector_exactly():
    spec = MlpSpec((3, 5, 2))
    segs = layout_for(spec)
    covered = []
    for w0, w1, b0, b1, n_in, n_out in segs:
        assert w1 - w0 == n_in * n_out
        assert b1 - b0 == n_out
        covered.extend(range(w0, w1))
        covered.extend(range(b0, b1))
    assert covered == list(range(spec.parameter_count))


def test_bad_spec_rejected():
    with pytest.raises(ValueError):
        MlpSpec((4,))
    with pytest.raises(ValueError):
        MlpSpec((4, 0, 1))


def test_weight_vector_length_checked():
    with pytest.raises(ValueError):
        WeightVector(np.zeros(10), MlpSpec((2, 2)))


def test_pack_unpack_roundtrip():
    spec = MlpSpec((3, 4, 2))
    w = init_weights(spec, stream(0, "pack"))
    again = WeightVector.pack(spec, w.unpack())
    assert np.array_equal(again.values, w.values)


def test_init_statistics():
    spec = MlpSpec((100, 200, 1))
    w = init_weights(spec, stream(1, "init-stats"))
    (W0, b0), (W1, b1) = w.unpack()
    assert np.array_equal(b0, np.zeros(200))
    assert np.array_equal(b1, np.zeros(1))
    assert abs(W0.std() - math.sqrt(2.0 / 100)) < 0.01


def test_forward_is_affine_per_layer():
    # single linear layer: forward must equal x @ W + b exactly
    spec = MlpSpec((3, 2))
    w = init_weights(spec, stream(2, "affine"))
    x = stream(2, "affine-x").standard_normal((5, 3))
    (W, b), = w.unpack()
    out = mlp_forward(spec, w, x)
    np.testing.assert_array_equal(out.value, x @ W + b)


def test_forward_np_bit_identical_to_graph():
    spec = MlpSpec((4, 16, 16, 2))
    w = init_weights(spec, stream(3, "np-vs-graph"))
    x = stream(3, "np-x").standard_normal((7, 4))
    graph = mlp_forward(spec, w, x).value
    plain = mlp_forward_np(spec, w.values, x)
    assert np.array_equal(graph, plain)


def test_forward_layered_weights_match_flat():
    from hyperdiff.models import param_leaves
    spec = MlpSpec((4, 8, 2))
    w = init_weights(spec, stream(4, "layered"))
    x = stream(4, "layered-x").standard_normal((3, 4))
    flat = mlp_forward(spec, w, x).value
    layered = mlp_forward(spec, param_leaves(w), x).value
    assert np.array_equal(flat, layered)


def test_forward_rejects_wrong_input_dim():
    spec = MlpSpec((3, 2))
    w = init_weights(spec, stream(5, "dim"))
    with pytest.raises(ad.ShapeMismatch):
        mlp_forward(spec, w, np.zeros((2, 4)))


def test_dropout_mask_values_and_rate():
    spec = MlpSpec((2, 1000, 1000, 1))
    masks = draw_dropout_masks(spec, 0.25, stream(6, "masks"))
    for m in masks:
        assert set(np.unique(m)) <= {0.0, 1.0 / 0.75}
        # keep rate should be near 0.75
        assert abs((m > 0).mean() - 0.75) < 0.05
    with pytest.raises(ValueError):
        draw_dropout_masks(spec, 0.0, stream(6, "bad"))


def test_dropout_batch_shape():
    spec = MlpSpec((2, 8, 8, 1))
    masks = draw_dropout_masks(spec, 0.1, stream(7, "b"), batch=5)
    assert [m.shape for m in masks] == [(5, 8), (5, 8)]


def test_dropout_preserves_expectation():
    # E[mask] = 1, so averaging many masked activations recovers the raw value
    spec = MlpSpec((2, 50000, 1))
    masks = draw_dropout_masks(spec, 0.3, stream(8, "exp"))
    assert abs(masks[0].mean() - 1.0) < 0.01


def test_time_embedding_dim_and_range():
    emb = TimeEmbedding(num_frequencies=8)
    assert emb.dim == 16
    vec = time_embed(37, 100, emb)
    assert vec.shape == (16,)
    assert np.all(np.abs(vec) <= 1.0)


def test_time_embedding_distinguishes_steps():
    emb = TimeEmbedding()
    vals = time_embed(np.arange(100), 100, emb)
    assert vals.shape == (100, 16)
    # all pairwise rows distinct
    assert len({tuple(row) for row in np.round(vals, 12)}) == 100


def test_time_embedding_known_values():
    emb = TimeEmbedding(num_frequencies=2)
    vec = time_embed(50, 100, emb)
    # phases pi/2 and pi
    np.testing.assert_allclose(vec, [1.0, 0.0, 0.0, -1.0], atol=1e-12)


def test_time_embedding_rejects_out_of_range():
    with pytest.raises(ValueError):
        time_embed(-1, 100, TimeEmbedding())
    with pytest.raises(ValueError):
        time_embed(101, 100, TimeEmbedding())
