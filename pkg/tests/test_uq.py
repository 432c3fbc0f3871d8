import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hyperdiff.uq import (SampleMatrix, aleatoric, decompose, epistemic,
                          matrix_to_csv, predict_mean, report_to_csv)


def worked_example():
    # two weight draws, two samples each:
    #   draw 0 -> [0, 2], draw 1 -> [1, 3]
    return SampleMatrix(np.array([[[0.0], [2.0]], [[1.0], [3.0]]]))


def test_worked_example_mean():
    assert predict_mean(worked_example()) == pytest.approx([1.5])


def test_worked_example_aleatoric():
    # per-draw variances are both 1 -> mean 1
    assert aleatoric(worked_example()) == pytest.approx([1.0])


def test_worked_example_epistemic():
    # per-draw means 1 and 2 -> variance 0.25
    assert epistemic(worked_example()) == pytest.approx([0.25])


def test_worked_example_total():
    report = decompose(worked_example())
    assert report.total == pytest.approx([1.25])
    assert report.total == pytest.approx(report.aleatoric + report.epistemic)


def test_shape_validation():
    with pytest.raises(ValueError):
        SampleMatrix(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        SampleMatrix(np.zeros((0, 4, 1)))
    with pytest.raises(ValueError):
        SampleMatrix(np.zeros((3, 1, 1)))


def test_single_draw_epistemic_warns_and_is_zero():
    mat = SampleMatrix(np.random.default_rng(0).standard_normal((1, 10, 2)))
    with pytest.warns(UserWarning):
        report = decompose(mat)
    assert np.array_equal(report.epistemic, np.zeros(2))
    assert report.epistemic_degenerate


finite_matrices = arrays(
    np.float64,
    st.tuples(st.integers(2, 6), st.integers(2, 8), st.integers(1, 3)),
    elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False),
)


@given(finite_matrices)
@settings(max_examples=60, deadline=None)
def test_variance_identity_property(values):
    report = decompose(SampleMatrix(values))
    # absolute term covers two-pass variance cancellation at large magnitudes
    atol = 1e-13 * float((values * values).mean()) + 1e-30
    np.testing.assert_allclose(report.total,
                               report.aleatoric + report.epistemic,
                               rtol=1e-12, atol=atol)


@given(finite_matrices, st.randoms(use_true_random=False))
@settings(max_examples=40, deadline=None)
def test_permutation_invariance(values, rnd):
    """Shuffling draws or samples never changes the decomposition."""
    base = decompose(SampleMatrix(values))
    perm_i = list(range(values.shape[0]))
    perm_j = list(range(values.shape[1]))
    rnd.shuffle(perm_i)
    rnd.shuffle(perm_j)
    shuffled = decompose(SampleMatrix(values[perm_i][:, perm_j]))
    atol = 1e-12 * float((values * values).mean()) + 1e-18
    np.testing.assert_allclose(shuffled.aleatoric, base.aleatoric, rtol=1e-10, atol=atol)
    np.testing.assert_allclose(shuffled.epistemic, base.epistemic, rtol=1e-10, atol=atol)


@given(finite_matrices,
       st.floats(-5, 5, allow_nan=False).filter(lambda a: abs(a) > 1e-3),
       st.floats(-100, 100, allow_nan=False))
@settings(max_examples=40, deadline=None)
def test_affine_equivariance(values, a, b):
    """x -> a x + b shifts the mean and scales both variances by a^2."""
    base = decompose(SampleMatrix(values))
    shifted = a * values + b
    moved = decompose(SampleMatrix(shifted))
    # variance roundoff scales with the mean square of the shifted values
    atol = 1e-12 * float((shifted * shifted).mean()) + 1e-12
    np.testing.assert_allclose(moved.mean, a * base.mean + b, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(moved.aleatoric, a * a * base.aleatoric,
                               rtol=1e-9, atol=atol)
    np.testing.assert_allclose(moved.epistemic, a * a * base.epistemic,
                               rtol=1e-9, atol=atol)


@given(finite_matrices)
@settings(max_examples=40, deadline=None)
def test_collapsed_matrix_has_zero_epistemic(values):
    """Tiling one draw M times leaves only aleatoric variance."""
    tiled = np.tile(values[:1], (values.shape[0], 1, 1))
    report = decompose(SampleMatrix(tiled))
    np.testing.assert_allclose(report.epistemic, 0.0, atol=1e-18)
    np.testing.assert_allclose(report.aleatoric, values[0].var(axis=0),
                               rtol=1e-12, atol=1e-18)


def test_constant_matrix_all_zero():
    report = decompose(SampleMatrix(np.full((4, 5, 1), 7.5)))
    assert report.mean == pytest.approx([7.5])
    assert np.array_equal(report.aleatoric, [0.0])
    assert np.array_equal(report.epistemic, [0.0])


def test_matrix_csv_roundtrip(tmp_path):
    values = np.random.default_rng(1).standard_normal((3, 4, 2))
    mat = SampleMatrix(values)
    path = tmp_path / "matrix.csv"
    matrix_to_csv(mat, path)
    rows = path.read_text().strip().split("\n")
    assert rows[0] == "i,j,v0,v1"
    assert len(rows) == 1 + 3 * 4
    # 17 significant digits round-trip float64 exactly
    parsed = np.array([[float(v) for v in r.split(",")[2:]] for r in rows[1:]])
    assert np.array_equal(parsed.reshape(3, 4, 2), values)


def test_report_csv_contents(tmp_path):
    report = decompose(worked_example())
    path = tmp_path / "report.csv"
    report_to_csv(report, path)
    text = path.read_text()
    assert "aleatoric,1\n" in text
    assert "epistemic,0.25\n" in text
    assert "M,2" in text and "N,2" in text
