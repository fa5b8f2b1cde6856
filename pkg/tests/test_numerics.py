import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polylocal.numerics import compose_two_level, gram_schmidt, is_unitary, operator_norm, two_level_decompose


def haar_unitary(d, seed):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def test_gram_schmidt_keeps_orthonormal_input():
    frame, dropped = gram_schmidt([[1, 0], [0, 1]])
    np.testing.assert_allclose(frame, np.eye(2))
    assert dropped == []


def test_gram_schmidt_forced_rotation():
    frame, dropped = gram_schmidt([[1, 0], [1, 1]])
    np.testing.assert_allclose(frame, np.eye(2), atol=1e-15)
    assert dropped == []


def test_gram_schmidt_drops_dependent_vector():
    frame, dropped = gram_schmidt([[1, 0], [2, 0], [0, 1]])
    np.testing.assert_allclose(frame, np.eye(2), atol=1e-15)
    assert dropped == [1]


def test_gram_schmidt_spans_candidates():
    rng = np.random.default_rng(3)
    C = rng.normal(size=(8, 6)) + 1j * rng.normal(size=(8, 6))
    frame, dropped = gram_schmidt(C)
    assert frame.shape == (6, 6) and dropped == [6, 7]
    # column-space oracle from an SVD of the candidate matrix
    rank = np.linalg.matrix_rank(C)
    assert frame.shape[0] == rank
    proj = C @ frame.conj().T @ frame
    assert np.max(np.abs(C - proj)) <= 1e-10


def test_gram_schmidt_frozen_prefix_untouched():
    prefix = np.array([[0, 1, 0], [1, 0, 0]], dtype=complex) / 1.0
    frame, dropped = gram_schmidt(np.vstack([prefix, [[1, 1, 1]]]), frozen_prefix=2)
    assert np.array_equal(frame[:2], prefix)
    np.testing.assert_allclose(np.abs(frame[2]), [0, 0, 1], atol=1e-15)


def test_gram_schmidt_rejects_bad_prefix():
    with pytest.raises(ValueError, match="not orthonormal"):
        gram_schmidt([[1, 0], [1, 1]], frozen_prefix=2)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(1, 9), st.integers(0, 10_000))
def test_gram_schmidt_frame_is_orthonormal(d, m, seed):
    rng = np.random.default_rng(seed)
    C = rng.normal(size=(m, d)) + 1j * rng.normal(size=(m, d))
    frame, dropped = gram_schmidt(C)
    G = frame @ frame.conj().T
    assert np.max(np.abs(G - np.eye(len(frame)))) <= 1e-10
    assert len(frame) + len(dropped) == m


def test_operator_norm_examples():
    assert operator_norm(np.eye(5)) == pytest.approx(1.0)
    assert operator_norm(np.diag([2.0, 1.0])) == pytest.approx(2.0)


def test_operator_norm_matches_eigensolver():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    oracle = np.sqrt(np.max(np.linalg.eigvalsh(A.conj().T @ A)))
    assert abs(operator_norm(A) - oracle) / oracle <= 1e-9


def test_is_unitary_examples():
    ok, res = is_unitary(np.eye(3))
    assert ok and res <= 1e-15
    ok, res = is_unitary(np.diag([1.0, 2.0]))
    assert not ok and res == pytest.approx(3.0)
    with pytest.raises(ValueError):
        is_unitary(np.ones((2, 3)))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 4, 8, 16]), st.integers(0, 10_000))
def test_unitary_has_unit_norm(d, seed):
    U = haar_unitary(d, seed)
    assert is_unitary(U, 1e-10)[0]
    assert abs(operator_norm(U) - 1) <= 1e-9


def test_two_level_2x2_is_single_factor():
    U = haar_unitary(2, 1)
    f = two_level_decompose(U)
    assert len(f) == 1
    np.testing.assert_allclose(f[0].dense(2), U, atol=1e-12)


def test_two_level_identity_is_empty():
    assert two_level_decompose(np.eye(6)) == []


def test_two_level_4x4():
    U = haar_unitary(4, 7)
    f = two_level_decompose(U)
    assert len(f) <= 10
    assert operator_norm(compose_two_level(f, 4) - U) <= 1e-10


def test_two_level_factors_are_two_level():
    U = haar_unitary(8, 2)
    for f in two_level_decompose(U):
        D = f.dense(8) - np.eye(8)
        rows = np.nonzero(np.any(np.abs(D) > 0, axis=1))[0]
        assert set(rows) <= {f.i, f.j}


@pytest.mark.parametrize("d", [2, 4, 8, 16])
def test_two_level_round_trip(d):
    for seed in range(25):
        U = haar_unitary(d, seed)
        f = two_level_decompose(U)
        assert len(f) <= d * (d - 1) // 2 + d
        assert operator_norm(compose_two_level(f, d) - U) <= 1e-10


def test_two_level_handles_diagonal_phases():
    U = np.diag(np.exp(1j * np.array([0.3, -1.2, 2.0, 0.7])))
    assert operator_norm(compose_two_level(two_level_decompose(U), 4) - U) <= 1e-12


def test_two_level_rejects_non_unitary():
    with pytest.raises(ValueError):
        two_level_decompose(np.diag([1.0, 2.0]))
