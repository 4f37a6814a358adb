import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusgff import DomainError, TorusLattice, build_spectrum, eigenvalue, from_modes, to_modes
from torusgff.spectral import (
    basis_matrix,
    diagonalization_error,
    orthonormality_error,
    site_probe_matrix,
    to_modes_direct,
)


def test_eigenvalue_examples():
    assert eigenvalue(TorusLattice(2, 4), (1, 0)) == pytest.approx(2.0, abs=1e-15)
    assert eigenvalue(TorusLattice(3, 8), (4, 4, 4)) == pytest.approx(12.0, abs=1e-14)
    assert eigenvalue(TorusLattice(1, 3), 1) == pytest.approx(3.0, abs=1e-14)


def test_spectrum_d1_n4():
    sp = build_spectrum(TorusLattice(1, 4))
    assert np.allclose(sp.eigenvalues, [0, 2, 4, 2], atol=1e-15)
    assert list(sp.sorted_view) == [0, 1, 3, 2]


def test_spectrum_d2_n2_multiplicities():
    vals, counts = build_spectrum(TorusLattice(2, 2)).multiplicities()
    assert np.allclose(vals, [0, 4, 8])
    assert list(counts) == [1, 2, 1]


@pytest.mark.parametrize("d,n", [(1, 5), (2, 6), (3, 4), (3, 7), (4, 3)])
def test_spectrum_invariants(d, n):
    L = TorusLattice(d, n)
    sp = build_spectrum(L)
    eta = sp.eigenvalues
    assert np.sum(eta == 0) == 1 and eta[0] == 0
    assert np.all(eta >= 0) and np.all(eta <= 4 * d + 1e-12)
    s = sp.sorted_eigenvalues
    assert np.all(np.diff(s) >= 0)
    # reflection symmetry is bit-exact
    c = L.coord_array
    refl = np.array([L.flat(tuple((-c[i]) % n)) for i in range(L.volume)])
    assert np.array_equal(eta, eta[refl])


def test_multiplicity_of_first_excited_level_is_2d():
    for d in (2, 3, 4):
        vals, counts = build_spectrum(TorusLattice(d, 6)).multiplicities()
        assert counts[1] == 2 * d


@pytest.mark.parametrize("d,n", [(1, 2), (1, 7), (2, 4), (2, 5), (3, 3), (3, 6)])
def test_basis_orthonormal_and_diagonalizing(d, n):
    L = TorusLattice(d, n)
    assert orthonormality_error(L) < 1e-10
    assert diagonalization_error(L) < 1e-10
    assert np.allclose(basis_matrix(L)[:, 0], L.volume ** -0.5)


def test_fast_transform_matches_direct(rng):
    for d, n in [(1, 9), (2, 6), (3, 5)]:
        L = TorusLattice(d, n)
        f = rng.normal(size=L.volume)
        assert np.max(np.abs(to_modes(f, L) - to_modes_direct(f, L))) < 1e-10


def test_constant_and_delta_fields():
    L = TorusLattice(2, 4)
    c = to_modes(np.ones(16), L)
    assert c[0] == pytest.approx(4.0) and np.max(np.abs(c[1:])) < 1e-12
    delta = np.zeros(16)
    delta[0] = 1.0
    assert np.allclose(to_modes(delta, L), 0.25)


def test_site_probe_rows_are_basis_rows():
    L = TorusLattice(2, 5)
    P = site_probe_matrix(L, [0, 7, (3, 4)])
    Q = basis_matrix(L)
    assert np.allclose(P, Q[[0, 7, L.flat((3, 4))]])


def test_length_mismatch_rejected():
    with pytest.raises(DomainError):
        to_modes(np.zeros(15), TorusLattice(2, 4))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_roundtrip_and_parseval(d, n, seed):
    L = TorusLattice(d, n)
    f = np.random.default_rng(seed).normal(size=(L.volume, 2))
    c = to_modes(f, L)
    assert np.max(np.abs(from_modes(c, L) - f)) < 1e-10
    assert np.allclose((c ** 2).sum(0), (f ** 2).sum(0), rtol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_transform_diagonalizes_laplacian(d, n, seed):
    L = TorusLattice(d, n)
    f = np.random.default_rng(seed).normal(size=L.volume)
    lhs = to_modes(L.laplacian() @ f, L)
    rhs = build_spectrum(L).eigenvalues * to_modes(f, L)
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_low_eigenvalue_growth_d3():
    # k-th smallest positive eigenvalue scales like k^{2/3} / n^2, with the
    # Weyl constant (6π²)^{2/3} for large k
    ratios = []
    for n in (8, 16, 32):
        s = build_spectrum(TorusLattice(3, n)).sorted_eigenvalues
        for k in (7, 19, 27, 100, 200):
            if k < s.size:
                ratios.append(s[k] * n ** 2 / k ** (2 / 3))
    ratios = np.array(ratios)
    assert 8.0 < ratios.min() and ratios.max() < 24.0
    assert ratios[-1] == pytest.approx((6 * np.pi ** 2) ** (2 / 3), rel=0.05)
