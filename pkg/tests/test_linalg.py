import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from snn_sense import linalg
from snn_sense.errors import DimensionError

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def wide_matrices(draw, max_rows=8, max_cols=12):
    rows = draw(st.integers(1, max_rows))
    cols = draw(st.integers(rows, max(rows, max_cols)))
    return draw(arrays(np.float64, (rows, cols), elements=finite))


def check_svd(a, d):
    d1 = a.shape[0]
    assert np.linalg.norm(d.phi.T @ d.phi - np.eye(d1)) <= 1e-10
    assert np.linalg.norm(d.psi.T @ d.psi - np.eye(d1)) <= 1e-10
    assert np.all(d.sigma >= 0)
    assert np.all(np.diff(d.sigma) <= 0)
    assert np.linalg.norm(d.reconstruct() - a) <= 1e-9 * max(1.0, np.linalg.norm(a))
    lead = np.argmax(np.abs(d.phi), axis=0)
    assert np.all(d.phi[lead, np.arange(d1)] >= 0)


def test_svd_rectangular_identity():
    d = linalg.compact_svd(linalg.rect_identity(2, 3))
    np.testing.assert_allclose(d.sigma, [1, 1])
    np.testing.assert_allclose(d.phi, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(d.psi, np.eye(3)[:, :2], atol=1e-15)


def test_svd_diagonal():
    d = linalg.compact_svd(linalg.rect_diag([3.0, 1.0], 2, 3))
    np.testing.assert_allclose(d.sigma, [3, 1])


def test_svd_random_reconstruction():
    a = np.random.default_rng(0).standard_normal((4, 5))
    d = linalg.compact_svd(a)
    assert np.linalg.norm(d.reconstruct() - a) / np.linalg.norm(a) <= 1e-9
    check_svd(a, d)


def test_svd_matches_lapack_values():
    rng = np.random.default_rng(1)
    for shape in [(3, 8), (6, 6), (10, 10), (16, 16), (28, 28)]:
        a = rng.standard_normal(shape)
        np.testing.assert_allclose(linalg.compact_svd(a).sigma, np.linalg.svd(a, compute_uv=False), atol=1e-12)


def test_svd_rejects_tall():
    with pytest.raises(DimensionError):
        linalg.compact_svd(np.ones((3, 2)))


def test_svd_rejects_nonfinite():
    with pytest.raises(ValueError):
        linalg.compact_svd(np.array([[1.0, np.nan]]))


def test_svd_zero_and_rank_deficient():
    check_svd(np.zeros((3, 4)), linalg.compact_svd(np.zeros((3, 4))))
    rng = np.random.default_rng(2)
    a = rng.standard_normal((10, 3)) @ rng.standard_normal((3, 12))
    d = linalg.compact_svd(a)
    check_svd(a, d)
    assert linalg.numerical_rank(d.sigma) == 3


def test_svd_deterministic():
    a = np.random.default_rng(3).standard_normal((5, 7))
    d1, d2 = linalg.compact_svd(a), linalg.compact_svd(a.copy())
    assert all(np.array_equal(x, y) for x, y in zip(d1, d2))


@settings(max_examples=60, deadline=None)
@given(wide_matrices())
def test_svd_invariants_property(a):
    check_svd(a, linalg.compact_svd(a))


def test_khatri_rao_examples():
    np.testing.assert_array_equal(linalg.khatri_rao(np.eye(2), np.eye(2)), [[1, 0], [0, 0], [0, 0], [0, 1]])
    np.testing.assert_array_equal(linalg.khatri_rao(np.array([[2.0]]), np.array([[3.0]])), [[6.0]])


def test_khatri_rao_diag_identity():
    rng = np.random.default_rng(4)
    phi = linalg.haar_orthogonal(rng, 4)
    psi = linalg.haar_orthogonal(rng, 6)[:, :4]
    xbar = rng.standard_normal(4)
    theta = linalg.khatri_rao(psi, phi)
    for i in range(4):
        assert np.array_equal(theta[:, i], linalg.vec(np.outer(phi[:, i], psi[:, i])))
    np.testing.assert_allclose(theta @ xbar, linalg.vec((phi * xbar) @ psi.T), atol=1e-14)


def test_khatri_rao_shape_mismatch():
    with pytest.raises(DimensionError):
        linalg.khatri_rao(np.eye(3), np.eye(2))


def test_vec_is_column_stacking():
    np.testing.assert_array_equal(linalg.vec([[1, 2], [3, 4]]), [1, 3, 2, 4])
    np.testing.assert_array_equal(linalg.unvec([1, 3, 2, 4], 2, 2), [[1, 2], [3, 4]])


def test_rect_diag_examples():
    np.testing.assert_array_equal(linalg.rect_diag([1, 1], 2, 3), [[1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(linalg.diag_of(linalg.rect_identity(2, 3)), [1, 1])
    with pytest.raises(DimensionError):
        linalg.rect_diag([1, 2, 3], 2, 3)


@pytest.mark.parametrize("rows", range(1, 9))
@pytest.mark.parametrize("cols", [1, 4, 8, 12])
def test_diag_roundtrip_all_shapes(rows, cols):
    v = np.arange(1, min(rows, cols) + 1, dtype=float)
    r = linalg.rect_diag(v, rows, cols)
    np.testing.assert_array_equal(linalg.diag_of(r), v)
    np.testing.assert_array_equal(linalg.unvec(linalg.vec(r), rows, cols), r)


def test_frobenius_inner():
    assert linalg.frobenius_inner(np.eye(2), np.eye(2)) == 2
    assert linalg.frobenius_inner([[1, 2], [3, 4]], np.eye(2)) == 5
    rng = np.random.default_rng(5)
    for _ in range(5):
        a, b = rng.standard_normal((2, 5, 7))
        assert abs(linalg.frobenius_inner(a, b) - np.sum(a * b)) <= 1e-12
        assert abs(linalg.frobenius_inner(a, b) - linalg.frobenius_inner(b, a)) <= 1e-12
        assert abs(linalg.frobenius_inner(a, a) - linalg.frobenius_norm(a) ** 2) <= 1e-10
    with pytest.raises(DimensionError):
        linalg.frobenius_inner(np.eye(2), np.eye(3))


def test_nuclear_norm():
    assert linalg.nuclear_norm(np.eye(3)) == pytest.approx(3)
    u = np.array([0.6, 0.8])
    v = np.array([0.0, 1.0, 0.0])
    assert linalg.nuclear_norm(np.outer(u, v)) == pytest.approx(1)
    assert linalg.nuclear_norm(np.zeros((2, 2))) == 0
    a = np.random.default_rng(6).standard_normal((6, 6))
    assert linalg.nuclear_norm(a) >= linalg.frobenius_norm(a)


def test_pinv_apply_min_norm():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((5, 9))
    b = rng.standard_normal(5)
    x = linalg.pinv_apply(a, b)
    np.testing.assert_allclose(a @ x, b, atol=1e-12)
    np.testing.assert_allclose(x, np.linalg.pinv(a) @ b, atol=1e-12)


def test_pinv_apply_least_squares_tall():
    rng = np.random.default_rng(8)
    tall = rng.standard_normal((9, 4))
    b = rng.standard_normal(9)
    np.testing.assert_allclose(linalg.pinv_apply(tall, b), np.linalg.lstsq(tall, b, rcond=None)[0], atol=1e-12)


def test_principal_angles():
    e = np.eye(3)
    assert linalg.max_principal_angle(e[:, :2], e[:, [1, 0]]) == pytest.approx(0, abs=1e-15)
    assert linalg.max_principal_angle(e[:, :1], e[:, 1:2]) == pytest.approx(np.pi / 2)


def test_haar_orthogonal():
    q = linalg.haar_orthogonal(np.random.default_rng(9), 7)
    np.testing.assert_allclose(q.T @ q, np.eye(7), atol=1e-13)
