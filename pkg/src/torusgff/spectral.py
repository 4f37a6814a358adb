"""Spectrum and real eigenbasis of the torus Laplacian.

The eigenvalues of ``-Δ`` on (Z/nZ)^d are

    η_w = 2 Σ_i (1 - cos(2π w_i / n)),    w ∈ [0, n)^d,

and a real orthonormal eigenbasis is given by the separable Hartley
functions

    q^w_x = n^{-d/2} Π_i cas(2π x_i w_i / n),    cas t = cos t + sin t.

The normalised one-dimensional discrete Hartley transform is symmetric and
its own inverse, so the d-dimensional change of basis ``Q`` is an orthogonal
involution and ``to_modes`` and ``from_modes`` are the same map. It is
applied axis by axis through a complex FFT: for a real vector with DFT F,
the Hartley transform is ``Re F - Im F``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import DomainError
from .lattice import TorusLattice

DIRECT_MAX_VOLUME = 4096


def _axis_eigenvalues(n):
    """2(1 - cos(2πw/n)) for w = 0..n-1, exactly symmetric under w -> n - w."""
    w = np.arange(n)
    folded = np.minimum(w, n - w)
    base = 2.0 * (1.0 - np.cos(2.0 * np.pi * np.arange(n // 2 + 1) / n))
    return base[folded]


def eigenvalue(lattice, w):
    """Eigenvalue η_w for a single mode ``w`` (flat index or tuple)."""
    c = _axis_eigenvalues(lattice.side)
    coords = lattice.coords(w)
    folded = sorted(min(a, lattice.side - a) for a in coords)
    return float(sum(c[a] for a in folded))


def eigenvalue_grid(lattice):
    """All eigenvalues, flat array of length n^d.

    Each value is summed over the folded mode coordinates in sorted order, so
    modes related by coordinate permutation or reflection get bit-identical
    eigenvalues and multiplicities can be read off by exact comparison.
    """
    n, d = lattice.side, lattice.dim
    base = 2.0 * (1.0 - np.cos(2.0 * np.pi * np.arange(n // 2 + 1) / n))
    w = np.arange(n)
    folded = np.minimum(w, n - w).astype(np.int32)
    idx = np.stack(np.meshgrid(*([folded] * d), indexing="ij"), axis=-1).reshape(-1, d)
    idx.sort(axis=1)
    out = np.zeros(idx.shape[0])
    for i in range(d):
        out += base[idx[:, i]]
    return out


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Eigenvalues of ``-Δ`` indexed by flat mode index, plus the
    nondecreasing order ``sorted_view`` (ties broken by flat mode index)."""

    lattice: TorusLattice
    eigenvalues: np.ndarray = field(repr=False)
    sorted_view: np.ndarray = field(repr=False)

    @property
    def sorted_eigenvalues(self):
        """η_1 <= η_2 <= ... with η_1 = 0 (one-based in the usual notation,
        zero-based in the returned array)."""
        return self.eigenvalues[self.sorted_view]

    def eta_k(self, k):
        """k-th smallest eigenvalue, one-based (η_1 = 0)."""
        return float(self.sorted_eigenvalues[k - 1])

    def multiplicities(self):
        """(distinct eigenvalues, counts), ascending."""
        return np.unique(self.eigenvalues, return_counts=True)


def build_spectrum(lattice):
    """Eigenvalue table of ``-Δ`` on ``lattice``."""
    eig = eigenvalue_grid(lattice)
    order = np.lexsort((np.arange(eig.size), eig))
    eig.setflags(write=False)
    order.setflags(write=False)
    return SpectrumTable(lattice, eig, order)


# --------------------------------------------------------------- transforms
def _check_field(values, lattice):
    a = np.asarray(values, dtype=float)
    if a.ndim == 0 or a.shape[0] != lattice.volume:
        raise DomainError(
            f"field of leading length {a.shape[0] if a.ndim else 0} does not match "
            f"volume {lattice.volume}"
        )
    return a


def hartley(values, lattice, workers=None):
    """Orthonormal d-dimensional Hartley transform of a flat field.

    ``values`` has shape (n^d,) or (n^d, M); the transform acts on the first
    axis and is applied to each column independently. The map is its own
    inverse.
    """
    a = _check_field(values, lattice)
    extra = a.shape[1:]
    g = a.reshape(lattice.shape + extra)
    for ax in range(lattice.dim):
        f = scipy.fft.fft(g, axis=ax, norm="ortho", workers=workers)
        g = f.real - f.imag
    return np.ascontiguousarray(g.reshape((lattice.volume,) + extra))


def to_modes(values, lattice, workers=None):
    """Coefficients ``v_w = Σ_x q^w_x f(x)`` of a site-space field."""
    return hartley(values, lattice, workers)


def from_modes(coeffs, lattice, workers=None):
    """Site-space field ``f(x) = Σ_w q^w_x v_w``."""
    return hartley(coeffs, lattice, workers)


def site_probe_matrix(lattice, sites, workers=None):
    """Rows ``(q^w_u)_w`` for each site u; ``Q`` is symmetric so these are
    transforms of point masses."""
    sites = [lattice.flat(u) for u in sites]
    e = np.zeros((lattice.volume, len(sites)))
    e[sites, np.arange(len(sites))] = 1.0
    return hartley(e, lattice, workers).T


def basis_matrix(lattice):
    """Dense ``Q`` with ``Q[x, w] = q^w_x``; test oracle for small volumes."""
    if lattice.volume > DIRECT_MAX_VOLUME:
        raise DomainError(f"direct basis limited to volume <= {DIRECT_MAX_VOLUME}")
    n = lattice.side
    t = 2.0 * np.pi * np.outer(np.arange(n), np.arange(n)) / n
    one = (np.cos(t) + np.sin(t)) / np.sqrt(n)
    Q = np.ones((1, 1))
    for _ in range(lattice.dim):
        Q = np.kron(Q, one)
    return Q


def to_modes_direct(values, lattice):
    """O(n^{2d}) reference implementation of ``to_modes``."""
    a = _check_field(values, lattice)
    return basis_matrix(lattice).T @ a


def mode_weights_to_orbit(weights, lattice, workers=None):
    """Translation orbit ``K(0, y) = Σ_w q^w_0 q^w_y weights[w]`` of the kernel
    ``Q diag(weights) Q^T``; uses ``q^w_0 = n^{-d/2}`` for every mode."""
    w = np.asarray(weights, dtype=float) / np.sqrt(lattice.volume)
    return from_modes(w, lattice, workers)


def orthonormality_error(lattice):
    """max |Q^T Q - I| over entries, for volumes within the direct limit."""
    Q = basis_matrix(lattice)
    return float(np.max(np.abs(Q.T @ Q - np.eye(lattice.volume))))


def diagonalization_error(lattice):
    """max |Q^T (-Δ) Q - diag(η)| over entries."""
    Q = basis_matrix(lattice)
    L = lattice.laplacian().toarray()
    D = Q.T @ L @ Q
    return float(np.max(np.abs(D - np.diag(eigenvalue_grid(lattice)))))
