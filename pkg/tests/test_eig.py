import numpy as np
import pytest

from selmut.eig import eigvals, spectral_bound
from selmut.errors import InputError


def sorted_eigs(vals):
    return np.sort_complex(np.asarray(vals, dtype=np.complex128))


def matching_distance(ours, ref):
    """Greedy closest-pair matching (sort_complex misorders conjugate
    pairs whose real parts differ in the last bit)."""
    ours = list(np.asarray(ours, dtype=np.complex128))
    worst = 0.0
    for lam in ref:
        i = int(np.argmin([abs(lam - mu) for mu in ours]))
        worst = max(worst, abs(lam - ours.pop(i)))
    return worst


def assert_spectra_match(A, rtol=1e-9):
    ours = eigvals(A)
    ref = np.linalg.eigvals(A)
    scale = max(1.0, float(np.max(np.abs(ref))))
    assert matching_distance(ours, ref) <= rtol * scale


def test_trivial_sizes():
    assert eigvals(np.zeros((0, 0))).size == 0
    assert eigvals([[3.5]]).tolist() == [3.5 + 0.0j]


def test_diagonal_and_triangular():
    D = np.diag([3.0, -1.0, 0.5])
    assert np.allclose(sorted_eigs(eigvals(D)), sorted_eigs([3, -1, 0.5]))
    T = np.array([[2.0, 5.0, 1.0], [0.0, -3.0, 2.0], [0.0, 0.0, 7.0]])
    assert np.allclose(sorted_eigs(eigvals(T)), sorted_eigs([2, -3, 7]))


def test_known_2x2_complex_pair():
    # rotation-like block: eigenvalues a +- bi
    A = np.array([[1.0, -2.0], [2.0, 1.0]])
    got = sorted_eigs(eigvals(A))
    assert np.allclose(got, sorted_eigs([1 + 2j, 1 - 2j]), atol=1e-12)


def test_companion_matrix_roots():
    # companion of x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
    C = np.array([[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert np.allclose(sorted_eigs(eigvals(C)), sorted_eigs([1.0, 2.0, 3.0]),
                       atol=1e-9)


@pytest.mark.parametrize("n", [2, 3, 5, 8, 13, 21])
def test_random_dense_vs_reference(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        assert_spectra_match(rng.normal(size=(n, n)))


def test_random_symmetric_vs_reference():
    rng = np.random.default_rng(99)
    for _ in range(5):
        A = rng.normal(size=(6, 6))
        assert_spectra_match(A + A.T, rtol=1e-10)


def test_defective_jordan_block():
    # eigenvalue 2 with a full Jordan chain; accuracy degrades to eps^(1/3)
    J = np.eye(3) * 2.0
    J[0, 1] = J[1, 2] = 1.0
    got = sorted_eigs(eigvals(J))
    assert np.max(np.abs(got - 2.0)) < 1e-4


def test_complex_input():
    A = np.array([[1.0 + 1.0j, 2.0], [0.0, -1.0j]])
    assert np.allclose(sorted_eigs(eigvals(A)), sorted_eigs([1 + 1j, -1j]),
                       atol=1e-12)


def test_spectral_bound():
    T = np.array([[-2.0, 100.0], [0.0, -0.5]])
    assert spectral_bound(T) == pytest.approx(-0.5)
    # complex pair: bound is the shared real part
    A = np.array([[1.0, -2.0], [2.0, 1.0]])
    assert spectral_bound(A) == pytest.approx(1.0)


def test_input_validation():
    with pytest.raises(InputError):
        eigvals(np.zeros((2, 3)))
    with pytest.raises(InputError):
        eigvals(np.array([[np.nan, 0.0], [0.0, 1.0]]))
