"""Geometry of the discrete torus (Z/nZ)^d.

Sites are addressed either by a flat index in ``[0, n^d)`` or by a coordinate
tuple in ``[0, n)^d``; the two are related by row-major order with axis 0
slowest (``numpy.ravel_multi_index`` order), and that convention is used by
every module so that spectral transforms and tables agree bit for bit.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError

# flat indices are stored in int64 arrays
_MAX_VOLUME = 2**62


@dataclass(frozen=True)
class TorusLattice:
    """The torus of side ``side`` in dimension ``dim``.

    Parameters
    ----------
    dim : int
        Dimension d (d = 1 is accepted for internal spectral checks).
    side : int
        Side length n >= 2.
    """

    dim: int
    side: int

    def __post_init__(self):
        d, n = self.dim, self.side
        if int(d) != d or int(n) != n:
            raise DomainError("dim and side must be integers")
        if d < 1:
            raise DomainError(f"dim must be >= 1, got {d}")
        if n < 2:
            raise DomainError(f"side must be >= 2, got {n}")
        if n**d > _MAX_VOLUME:
            raise DomainError(f"volume {n}^{d} exceeds the safe integer range")

    @property
    def volume(self):
        return self.side**self.dim

    @property
    def shape(self):
        return (self.side,) * self.dim

    def __repr__(self):
        return f"TorusLattice(dim={self.dim}, side={self.side})"

    # ------------------------------------------------------------ indexing
    def coords(self, x):
        """Coordinate tuple of a site given as flat index or tuple."""
        if isinstance(x, (tuple, list, np.ndarray)):
            c = tuple(int(v) for v in x)
            if len(c) != self.dim or any(v < 0 or v >= self.side for v in c):
                raise DomainError(f"invalid site {x!r} for {self!r}")
            return c
        f = int(x)
        if f < 0 or f >= self.volume:
            raise DomainError(f"invalid flat index {x!r} for {self!r}")
        return tuple(int(v) for v in np.unravel_index(f, self.shape))

    def flat(self, x):
        """Flat index of a site given as flat index or tuple."""
        return int(np.ravel_multi_index(self.coords(x), self.shape))

    @cached_property
    def coord_array(self):
        """All coordinates, shape (n^d, d), in flat order."""
        grids = np.indices(self.shape).reshape(self.dim, -1)
        return np.ascontiguousarray(grids.T)

    # ------------------------------------------------------------ geometry
    def neighbors(self, x):
        """The 2d neighbors of ``x`` in the order +axis0, -axis0, +axis1, ...

        For n = 2 the two neighbors along an axis coincide and both entries are
        kept.
        """
        c = self.coords(x)
        out = []
        for i in range(self.dim):
            for step in (1, -1):
                y = list(c)
                y[i] = (y[i] + step) % self.side
                out.append(tuple(y))
        return out

    @cached_property
    def neighbor_table(self):
        """Flat neighbor indices, shape (n^d, 2d), same order as ``neighbors``."""
        grid = np.arange(self.volume).reshape(self.shape)
        cols = []
        for i in range(self.dim):
            # value at x of roll(grid, -1) is grid[x + e_i]
            cols.append(np.roll(grid, -1, axis=i).ravel())
            cols.append(np.roll(grid, 1, axis=i).ravel())
        return np.stack(cols, axis=1)

    def canonical_lift(self, x):
        """Representative of ``x`` in the box [-floor(n/2), n - floor(n/2))^d."""
        n = self.side
        h = n // 2
        return tuple(v - n if v >= n - h else v for v in self.coords(x))

    def canonical_lift_array(self):
        """Lifted coordinates of all sites, shape (n^d, d)."""
        n = self.side
        c = self.coord_array
        return np.where(c >= n - n // 2, c - n, c)

    def graph_distance(self, x, y):
        a = np.array(self.coords(x))
        b = np.array(self.coords(y))
        diff = np.abs(a - b)
        return int(np.minimum(diff, self.side - diff).sum())

    def translate(self, x, shift):
        """Site ``x + shift`` modulo n."""
        c = self.coords(x)
        return tuple((a + int(s)) % self.side for a, s in zip(c, shift))

    def box_boundary(self):
        """Flat indices of the sites whose lift lies on the boundary of the
        symmetric box [-floor(n/2), floor(n/2)]^d, i.e. with some coordinate of
        absolute value floor(n/2)."""
        lift = self.canonical_lift_array()
        on = np.any(np.abs(lift) == self.side // 2, axis=1)
        return np.flatnonzero(on)

    # ------------------------------------------------------------ operators
    def laplacian(self, mass2=0.0):
        """Sparse matrix of ``-Δ + m²``: 2d + m² on the diagonal and -1 for
        every ordered neighbor incidence (so -2 between the two sites of an
        n = 2 multi-edge)."""
        V = self.volume
        nb = self.neighbor_table
        rows = np.repeat(np.arange(V), 2 * self.dim)
        data = -np.ones(rows.size)
        off = sp.coo_matrix((data, (rows, nb.ravel())), shape=(V, V)).tocsr()
        off.sum_duplicates()
        return (sp.identity(V, format="csr") * (2 * self.dim + mass2) + off).tocsr()

    def checkerboard(self):
        """Proper coloring of the nearest-neighbor graph as a list of flat index
        arrays. Two colors by coordinate parity when n is even; for odd n the
        wrap-around edge breaks parity, and a greedy coloring is used."""
        if self.side % 2 == 0:
            par = self.coord_array.sum(axis=1) % 2
            return [np.flatnonzero(par == 0), np.flatnonzero(par == 1)]
        nb = self.neighbor_table
        color = -np.ones(self.volume, dtype=int)
        for x in range(self.volume):
            used = set(color[nb[x]].tolist())
            c = 0
            while c in used:
                c += 1
            color[x] = c
        return [np.flatnonzero(color == c) for c in range(color.max() + 1)]
