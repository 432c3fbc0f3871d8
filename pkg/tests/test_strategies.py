import numpy as np
import pytest

from hyperdiff.diffusion import DiffusionConfig, make_schedule
from hyperdiff.hyper import HyperNetConfig
from hyperdiff.models import MlpSpec, TimeEmbedding, init_weights
from hyperdiff.rng import stream
from hyperdiff.strategies import (EnsembleSource, HyperDiffusionSource,
                                  McDropoutSource)
from hyperdiff.uq import build_sample_grid, build_sample_matrix


def tiny_setup():
    diff = DiffusionConfig(make_schedule(20), MlpSpec((6, 8, 1)),
                           time_emb=TimeEmbedding(num_frequencies=2))
    hyper = HyperNetConfig.for_backbone(diff.backbone, latent_dim=4,
                                        hidden=8, depth=2)
    phi = init_weights(hyper.hyper_spec, stream(0, "phi"))
    return diff, HyperDiffusionSource(phi, hyper)


def test_hyper_source_member_deterministic():
    diff, source = tiny_setup()
    assert source.count is None
    a, masks_a = source.member(3, 7)
    b, _ = source.member(3, 7)
    c, _ = source.member(3, 8)
    assert masks_a is None
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (diff.backbone.parameter_count,)


def test_ensemble_source_count_and_lookup():
    diff, _ = tiny_setup()
    members = [init_weights(diff.backbone, stream(1, "m", i)) for i in range(3)]
    source = EnsembleSource(members)
    assert source.count == 3
    vals, masks = source.member(99, 1)
    assert masks is None
    assert np.array_equal(vals, members[1].values)


def test_ensemble_limit_enforced():
    diff, _ = tiny_setup()
    members = [init_weights(diff.backbone, stream(2, "m", i)) for i in range(2)]
    with pytest.raises(ValueError, match="members"):
        build_sample_matrix(EnsembleSource(members), diff, [0.0], 3, 4, 0)


def test_mc_dropout_source():
    diff, _ = tiny_setup()
    w = init_weights(diff.backbone, stream(3, "w"))
    source = McDropoutSource(w, 0.2)
    v0, m0 = source.member(5, 0)
    v1, m1 = source.member(5, 1)
    assert np.array_equal(v0, v1)  # shared weights
    assert not all(np.array_equal(a, b) for a, b in zip(m0, m1))
    again = source.member(5, 0)[1]
    assert all(np.array_equal(a, b) for a, b in zip(m0, again))
    with pytest.raises(ValueError):
        McDropoutSource(w, 0.0)


def test_matrix_shape_and_provenance():
    diff, source = tiny_setup()
    mat = build_sample_matrix(source, diff, [0.5], 3, 5, master_seed=11)
    assert mat.values.shape == (3, 5, 1)
    assert mat.provenance["strategy"] == "hyper-diffusion"
    assert mat.provenance["master_seed"] == 11
    assert mat.provenance["y"] == [0.5]


def test_worker_count_never_changes_results():
    diff, source = tiny_setup()
    y_grid = np.array([[-1.0], [0.0], [2.0]])
    serial = build_sample_grid(source, diff, y_grid, 4, 6, 13, workers=1)
    threaded = build_sample_grid(source, diff, y_grid, 4, 6, 13, workers=3)
    for a, b in zip(serial, threaded):
        assert np.array_equal(a.values, b.values)


def test_grid_conditions_get_distinct_noise():
    diff, source = tiny_setup()
    grid = build_sample_grid(source, diff, np.array([[0.0], [0.0]]), 2, 4, 17)
    # identical y but different condition index -> different streams
    assert not np.array_equal(grid[0].values, grid[1].values)


def test_single_condition_matches_matrix_builder():
    diff, source = tiny_setup()
    mat = build_sample_matrix(source, diff, [1.5], 2, 4, master_seed=19)
    grid = build_sample_grid(source, diff, np.array([[1.5]]), 2, 4, 19)
    assert np.array_equal(mat.values, grid[0].values)
