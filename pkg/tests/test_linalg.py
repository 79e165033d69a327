import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relucert import linalg
from _oracles import frobenius_fsum, matmul_triple_loop, sym_eigvals_3x3


def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(linalg.matmul(np.eye(2), a), a)


def test_matmul_hand_case():
    out = linalg.matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
    assert out.shape == (1, 1)
    assert out[0, 0] == 11.0


def test_matmul_rejects_mismatch():
    with pytest.raises(ValueError):
        linalg.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_rejects_nonfinite():
    bad = np.array([[np.nan, 1.0]])
    with pytest.raises(ValueError):
        linalg.matmul(bad, np.ones((2, 1)))


def test_matmul_against_triple_loop():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((7, 5))
    b = rng.standard_normal((5, 3))
    assert np.max(np.abs(linalg.matmul(a, b) - matmul_triple_loop(a, b))) < 1e-12


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_matmul_associativity(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((4, 6))
    b = rng.standard_normal((6, 5))
    c = rng.standard_normal((5, 3))
    left = linalg.matmul(linalg.matmul(a, b), c)
    right = linalg.matmul(a, linalg.matmul(b, c))
    scale = max(1.0, np.max(np.abs(left)))
    assert np.max(np.abs(left - right)) <= 1e-10 * scale


def test_frobenius_trivial():
    assert linalg.frobenius_norm(np.zeros((3, 4))) == 0.0
    assert linalg.frobenius_norm(np.array([[3.0, 4.0]])) == 5.0


def test_frobenius_against_fsum():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((23, 17))
    ours = linalg.frobenius_norm(a)
    ref = frobenius_fsum(a)
    assert abs(ours - ref) <= 1e-14 * ref


def test_spectral_norm_scalar():
    assert linalg.spectral_norm(np.array([[3.0]])) == pytest.approx(3.0, rel=1e-12)


def test_spectral_norm_nilpotent():
    a = np.array([[0.0, 2.0], [0.0, 0.0]])
    assert linalg.spectral_norm(a) == pytest.approx(2.0, rel=1e-10)


def test_spectral_norm_rejects_bad_tol():
    with pytest.raises(ValueError):
        linalg.spectral_norm(np.eye(2), tol=0.0)


def test_spectral_norm_vs_svd():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((20, 30))
    ref = np.linalg.svd(a, compute_uv=False)[0]
    assert abs(linalg.spectral_norm(a) - ref) <= 1e-8 * ref


def test_spectral_norm_ones_start_orthogonal_to_top():
    # all-ones is the bottom eigenvector here; the seeded restart must recover
    a = np.array([[2.0, -1.0], [-1.0, 2.0]])
    assert linalg.spectral_norm(a) == pytest.approx(3.0, rel=1e-9)


def test_smallest_singular_identity():
    assert linalg.smallest_singular_value(np.eye(3)) == pytest.approx(1.0, rel=1e-12)


def test_smallest_singular_diagonal():
    a = np.array([[2.0, 0.0, 0.0], [0.0, 3.0, 0.0]])
    assert linalg.smallest_singular_value(a) == pytest.approx(2.0, rel=1e-12)


def test_smallest_singular_rejects_tall():
    with pytest.raises(ValueError):
        linalg.smallest_singular_value(np.ones((4, 2)))


def test_smallest_singular_vs_svd():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((10, 40))
    ref = np.linalg.svd(a, compute_uv=False)[-1]
    assert abs(linalg.smallest_singular_value(a) - ref) <= 1e-8 * ref


def test_sym_eig_min_diag():
    assert linalg.sym_eig_min(np.diag([1.0, 5.0])) == pytest.approx(1.0, abs=1e-12)


def test_sym_eig_min_2x2():
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert linalg.sym_eig_min(a) == pytest.approx(1.0, abs=1e-10)


def test_sym_eig_min_rejects_asymmetric():
    with pytest.raises(ValueError):
        linalg.sym_eig_min(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sym_eig_min_3x3_vs_closed_form():
    rng = np.random.default_rng(4)
    for _ in range(25):
        b = rng.standard_normal((3, 5))
        gram = b @ b.T
        ref = sym_eigvals_3x3(gram)[0]
        assert abs(linalg.sym_eig_min(gram) - ref) < 1e-9


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_norm_ordering(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((int(rng.integers(1, 9)), int(rng.integers(1, 9))))
    spec = linalg.spectral_norm(a)
    frob = linalg.frobenius_norm(a)
    assert spec <= frob * (1.0 + 1e-10)
    if a.shape[0] <= a.shape[1]:
        assert linalg.smallest_singular_value(a) <= spec * (1.0 + 1e-10)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_gram_min_eig_nonnegative(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((5, int(rng.integers(2, 9))))
    gram = a.T @ a
    assert linalg.sym_eig_min(gram) >= -1e-10 * linalg.frobenius_norm(gram)


def test_oracle_equivalence_sweep():
    # spectral and smallest singular value versus dense SVD on varied shapes
    rng = np.random.default_rng(5)
    for _ in range(25):
        rows = int(rng.integers(2, 65))
        cols = int(rng.integers(rows, 257))
        a = rng.standard_normal((rows, cols))
        sv = np.linalg.svd(a, compute_uv=False)
        assert abs(linalg.spectral_norm(a) - sv[0]) <= 1e-8 * sv[0]
        assert abs(linalg.smallest_singular_value(a) - sv[-1]) <= 1e-8 * sv[-1]


def test_jacobi_reports_failure_via_exception():
    # one sweep is not enough for a dense random symmetric matrix
    rng = np.random.default_rng(6)
    b = rng.standard_normal((12, 12))
    with pytest.raises(linalg.ConvergenceError) as info:
        linalg.jacobi_eigenvalues(b + b.T, max_sweeps=1)
    assert np.isfinite(info.value.best)
