"""Green's functions on the torus and on Z^d.

Conventions: ``G = (-Δ + m²)^{-1}`` with ``-Δf(x) = 2d f(x) - Σ_{y~x} f(y)``.
With this normalisation the killed random walk representation reads

    G(x, y) = 1/(2d + m²) Σ_k r^k P^x[X_k = y],    r = 2d/(2d + m²),

for simple random walk X (killed on entering the removed set U in the
Dirichlet case), and ``G_{Z^3}(0,0) ≈ 0.2527``. Beware that much of the
literature uses the ``1/(2d)``-normalised Laplacian, which multiplies Green's
functions by 2d.

Torus kernels are translation invariant and stored as a single orbit
``G(0, ·)`` of length n^d; Dirichlet kernels are stored as a dense matrix
for small volumes and solved column by column otherwise.
"""

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy import integrate, special, stats

from . import rng as rngmod
from .errors import DomainError
from .lattice import TorusLattice
from .spectral import eigenvalue_grid, mode_weights_to_orbit

DENSE_MAX = 4096
CONVENTION = "minus-laplacian=2d-sum-neighbors"


@dataclass(eq=False)
class GreenTable:
    """A covariance kernel.

    ``kind`` is one of ``"massive"``, ``"zero-avg"``, ``"dirichlet"``,
    ``"zd"``. Torus kinds expose ``value(x, y)``, ``row(x)``, ``trace`` and,
    for small volumes, ``matrix()``.
    """

    kind: str
    lattice: TorusLattice = None
    mass2: float = 0.0
    orbit: np.ndarray = field(default=None, repr=False)
    removed: np.ndarray = field(default=None, repr=False)
    dense: np.ndarray = field(default=None, repr=False)
    dim: int = None
    tags: tuple = ()
    _op: object = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def translation_invariant(self):
        return self.orbit is not None

    def _offset(self, x, y):
        L = self.lattice
        a = L.coords(x)
        b = L.coords(y)
        return L.flat(tuple((bi - ai) % L.side for ai, bi in zip(a, b)))

    def value(self, x, y):
        if self.kind == "zd":
            d = np.asarray(y, dtype=int) - np.asarray(x, dtype=int)
            return zd_green(self.dim, self.mass2, d)
        if self.translation_invariant:
            return float(self.orbit[self._offset(x, y)])
        return float(self.row(x)[self.lattice.flat(y)])

    __call__ = value

    def row(self, x):
        """``G(x, ·)`` as a flat array over sites."""
        L = self.lattice
        if self.translation_invariant:
            shift = L.coords(x)
            g = self.orbit.reshape(L.shape)
            return np.roll(g, shift, axis=tuple(range(L.dim))).ravel()
        x = L.flat(x)
        if self.dense is not None:
            return self.dense[x].copy()
        if x not in self._cache:
            self._cache[x] = self._solve_column(x)
        return self._cache[x].copy()

    def matrix(self):
        """Full kernel matrix (small volumes only)."""
        L = self.lattice
        if L.volume > DENSE_MAX:
            raise DomainError(f"full matrix limited to volume <= {DENSE_MAX}")
        if self.dense is not None:
            return self.dense.copy()
        return np.stack([self.row(x) for x in range(L.volume)])

    @property
    def trace(self):
        if self.kind == "zd":
            return np.inf
        if self.translation_invariant:
            return float(self.orbit[0]) * self.lattice.volume
        if self.dense is not None:
            return float(np.trace(self.dense))
        return float(sum(self.row(x)[x] for x in range(self.lattice.volume)))

    def _solve_column(self, x):
        L = self.lattice
        out = np.zeros(L.volume)
        if x in set(self.removed.tolist()):
            return out
        A, keep, M = self._op
        b = np.zeros(keep.size)
        b[np.searchsorted(keep, x)] = 1.0
        sol, info = scipy.sparse.linalg.cg(A, b, rtol=1e-12, atol=0.0, M=M, maxiter=100000)
        if info != 0:
            raise RuntimeError(f"conjugate gradient did not converge (info={info})")
        out[keep] = sol
        return out

    def kernel_rows(self):
        """Rows ``(dx_1, ..., dx_d, value)`` of ``G(0, ·)`` over the canonical
        box, in flat order."""
        L = self.lattice
        lift = L.canonical_lift_array()
        vals = self.row(0)
        return [tuple(int(c) for c in lift[i]) + (float(vals[i]),) for i in range(L.volume)]

    def header(self):
        return {
            "kind": self.kind,
            "n": self.lattice.side if self.lattice else None,
            "d": self.lattice.dim if self.lattice else self.dim,
            "m2": float(self.mass2),
            "convention": CONVENTION,
        }


# ----------------------------------------------------------------- torus
def massive_green(lattice, mass2, workers=None):
    """Massive torus Green's function ``(-Δ + m²)^{-1}`` from the spectrum."""
    if not mass2 > 0:
        raise DomainError(f"massive Green's function needs m² > 0, got {mass2}")
    eta = eigenvalue_grid(lattice)
    orbit = mode_weights_to_orbit(1.0 / (mass2 + eta), lattice, workers)
    orbit.setflags(write=False)
    return GreenTable("massive", lattice, float(mass2), orbit=orbit)


def zero_average_green(lattice, workers=None):
    """Zero-average Green's function ``Q diag(0, 1/η_w) Q^T``.

    Defined for d >= 3; d <= 2 is accepted for internal checks and tagged
    ``nonstandard-dimension``.
    """
    eta = eigenvalue_grid(lattice)
    w = np.zeros_like(eta)
    w[1:] = 1.0 / eta[1:]
    orbit = mode_weights_to_orbit(w, lattice, workers)
    orbit.setflags(write=False)
    tags = () if lattice.dim >= 3 else ("nonstandard-dimension",)
    return GreenTable("zero-avg", lattice, 0.0, orbit=orbit, tags=tags)


def zero_average_green_at(lattice, points, chunk=2**20):
    """``G^{0avg}(0, y)`` for a few points ``y`` by direct mode summation,
    streaming over the modes in slabs so that memory stays bounded. Used for
    volumes where a full orbit table is too large."""
    n, d = lattice.side, lattice.dim
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != d:
        raise DomainError("points must have d coordinates")
    base = 2.0 * (1.0 - np.cos(2.0 * np.pi * np.arange(n // 2 + 1) / n))
    w = np.arange(n)
    ang = 2.0 * np.pi * np.outer(pts.ravel(), w).reshape(pts.shape[0], d, n) / n
    cosw = np.cos(ang)  # (points, d, n)
    tail = max(1, int(np.ceil(np.log(max(chunk, 1)) / np.log(n))))
    tail = min(tail, d)
    head = d - tail
    tw = np.stack(np.meshgrid(*([w] * tail), indexing="ij"), -1).reshape(-1, tail)
    total = np.zeros(pts.shape[0])
    for hw in np.ndindex(*((n,) * head)):
        lead = np.broadcast_to(np.array(hw, dtype=int), (tw.shape[0], head))
        full = np.concatenate([lead, tw], axis=1)
        fold = np.minimum(full, n - full)
        fold.sort(axis=1)
        eta = np.zeros(fold.shape[0])
        for i in range(d):
            eta += base[fold[:, i]]
        inv = np.zeros_like(eta)
        nz = eta > 0
        inv[nz] = 1.0 / eta[nz]
        for p in range(pts.shape[0]):
            ph = np.ones(fold.shape[0])
            for i in range(d):
                ph = ph * cosw[p, i, full[:, i]]
            total[p] += np.dot(inv, ph)
    return total / lattice.volume


def dirichlet_green(lattice, removed, mass2=0.0):
    """Green's function of ``-Δ + m²`` on the torus with the sites in
    ``removed`` (the set U) killed.

    Dense symmetric factorisation when ``|U^c| <= 4096``; otherwise columns are
    solved on demand by Jacobi-preconditioned conjugate gradients.
    """
    U = np.unique(np.asarray([lattice.flat(u) for u in removed], dtype=int))
    if U.size == 0 and not mass2 > 0:
        raise DomainError("Dirichlet Green's function needs U nonempty or m² > 0")
    if mass2 < 0:
        raise DomainError("m² must be nonnegative")
    keep = np.setdiff1d(np.arange(lattice.volume), U)
    A = lattice.laplacian(mass2)[keep][:, keep].tocsr()
    table = GreenTable("dirichlet", lattice, float(mass2), removed=U)
    if keep.size <= DENSE_MAX:
        Ad = A.toarray()
        inv = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Ad), np.eye(keep.size))
        inv = 0.5 * (inv + inv.T)
        full = np.zeros((lattice.volume, lattice.volume))
        full[np.ix_(keep, keep)] = inv
        table.dense = full
    else:
        diag = A.diagonal()
        M = scipy.sparse.linalg.LinearOperator(A.shape, matvec=lambda v: v / diag)
        table._op = (A, keep, M)
    return table


def hitting_distribution(lattice, removed, mass2, K):
    """Matrix ``P[x, k] = P^x[H_K < ∞, X_{H_K} = K[k]]`` for the walk that is
    killed at rate m²/(2d+m²) per step and on entering U \\ K; ``H_K`` counts
    time 0, so rows of sites in K are unit vectors."""
    Kf = np.array([lattice.flat(k) for k in K], dtype=int)
    Uf = np.array([lattice.flat(u) for u in removed], dtype=int)
    if Kf.size == 0:
        raise DomainError("K must be nonempty")
    V = lattice.volume
    inK = np.zeros(V, dtype=bool)
    inK[Kf] = True
    inU = np.zeros(V, dtype=bool)
    inU[Uf] = True
    inU &= ~inK
    free = np.flatnonzero(~inK & ~inU)
    P = np.zeros((V, Kf.size))
    P[Kf, np.arange(Kf.size)] = 1.0
    if free.size:
        A = lattice.laplacian(mass2).tocsr()
        Aff = A[free][:, free]
        rhs = -(A[free][:, Kf]).toarray()
        if free.size <= DENSE_MAX:
            sol = scipy.linalg.solve(Aff.toarray(), rhs, assume_a="sym")
        else:
            lu = scipy.sparse.linalg.splu(Aff.tocsc())
            sol = lu.solve(rhs)
        P[free] = sol
    return P


def harmonic_extension(lattice, removed, mass2, K, boundary_values):
    """Function equal to the data on K, to 0 on U \\ K, and massive-harmonic
    ((-Δ + m²)h = 0) elsewhere. Data on sites of K ∩ U are forced to 0."""
    vals = np.asarray(boundary_values, dtype=float).copy()
    Uf = {lattice.flat(u) for u in removed}
    Kf = [lattice.flat(k) for k in K]
    for i, k in enumerate(Kf):
        if k in Uf:
            vals[i] = 0.0
    P = hitting_distribution(lattice, removed, mass2, K)
    h = P @ vals
    for u in Uf:
        if u not in Kf:
            h[u] = 0.0
    return h


# ----------------------------------------------------------------- Z^d
_ZD_TMAX = 1e8  # scipy's ive loses accuracy for arguments beyond ~1e9


def zd_green(d, mass2, y=None):
    """``G_{Z^d, m²}(0, y)`` by quadrature of the heat-kernel integral

        ∫_0^∞ e^{-m² t} Π_i e^{-2t} I_{y_i}(2t) dt,

    split at ``t1 = max(1, |y|²/d)``; the tail beyond t = 1e8 is added from the
    two-term large-t expansion of the Bessel factors.
    """
    d = int(d)
    if d < 1:
        raise DomainError("dimension must be positive")
    if mass2 < 0:
        raise DomainError("m² must be nonnegative")
    if mass2 == 0 and d <= 2:
        raise DomainError(f"G_Z^{d} diverges at m² = 0 (β_c infinite in d <= 2)")
    y = np.zeros(d) if y is None else np.abs(np.asarray(y, dtype=float)).reshape(-1)
    if y.size != d:
        raise DomainError("y must have d coordinates")
    return _zd_green_cached(d, float(mass2), tuple(float(v) for v in y))


@lru_cache(maxsize=4096)
def _zd_green_cached(d, m2, y):
    y = np.array(y)

    def f(t):
        return np.exp(-m2 * t) * np.prod(special.ive(y, 2.0 * t))

    def g(u):
        t = np.exp(u)
        return f(t) * t

    t1 = max(1.0, float(y @ y) / d)
    T = _ZD_TMAX if m2 * _ZD_TMAX < 60 else max(t1, 60.0 / m2)
    with warnings.catch_warnings():
        # quadpack flags roundoff once the requested 2e-14 is out of reach
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        # large masses concentrate the integrand near 0; give quad the scale
        pts = [p for p in (1.0 / m2, 10.0 / m2, 40.0 / m2) if 0.0 < p < t1] if m2 > 0 else []
        a, _ = integrate.quad(f, 0.0, t1, epsabs=0.0, epsrel=2e-14, limit=500, points=pts or None)
        b, _ = integrate.quad(g, np.log(t1), np.log(T), epsabs=0.0, epsrel=2e-14, limit=1000)
    tail = 0.0
    if m2 * T < 60:
        s = 1.0 - d / 2.0
        c = float(np.sum(4.0 * y * y - 1.0)) / 16.0
        pre = (4.0 * np.pi) ** (-d / 2.0)
        if m2 == 0:
            tail = pre * (T**s / (d / 2.0 - 1.0) - c * T ** (-d / 2.0) / (d / 2.0))
        else:
            mm = mpmath.mpf(m2)
            tail = float(pre * (mm ** (-s) * mpmath.gammainc(s, m2 * T)
                                - c * mm ** (d / 2.0) * mpmath.gammainc(-d / 2.0, m2 * T)))
    return a + b + tail


def zd_table(d, mass2):
    """GreenTable view of ``G_{Z^d, m²}`` (values computed on demand)."""
    zd_green(d, mass2)  # validates the domain
    return GreenTable("zd", None, float(mass2), dim=int(d))


def _walk_1d(N, y):
    m = np.arange(N + 1)
    k = (m + abs(y)) / 2.0
    ok = (k == np.floor(k)) & (m >= abs(y))
    out = np.zeros(N + 1)
    mm = m[ok]
    kk = k[ok]
    out[ok] = np.exp(special.gammaln(mm + 1) - special.gammaln(kk + 1)
                     - special.gammaln(mm - kk + 1) - mm * np.log(2.0))
    return out


def walk_return_probabilities(y, steps):
    """Exact ``P^0[X_k = y]`` for simple random walk on Z^d, k = 0..steps.

    Axes are added one at a time: a step of the walk on the first i+1 axes
    moves along the first i axes with probability i/(i+1), so the law after k
    steps is a binomial mixture of the lower-dimensional laws.
    """
    y = [int(v) for v in y]
    p = _walk_1d(steps, y[0])
    for i in range(1, len(y)):
        q = _walk_1d(steps, y[i])
        new = np.zeros(steps + 1)
        frac = i / (i + 1.0)
        for k in range(steps + 1):
            j = np.arange(k + 1)
            new[k] = np.dot(stats.binom.pmf(j, k, frac) * p[: k + 1], q[k - j])
        p = new
    return p


def zd_green_series(d, mass2, y=None, steps=4000):
    """Independent evaluation of ``G_{Z^d, m²}(0, y)`` from the killed walk
    series ``1/(2d+m²) Σ_k r^k P[X_k = y]``.

    The first ``steps`` terms are summed exactly. For the remainder, the
    parity-matched terms are fitted to ``a0 k^{-d/2} (1 + c1/k + c2/k² + c3/k³)``
    (a0 = 2 (d/2π)^{d/2} is the local limit constant) over the second half of
    the computed range, and the fitted tail is summed in closed form with
    Lerch transcendents.
    """
    d = int(d)
    if mass2 == 0 and d <= 2:
        raise DomainError(f"G_Z^{d} diverges at m² = 0")
    y = [0] * d if y is None else [abs(int(v)) for v in y]
    p = walk_return_probabilities(y, steps)
    r = 2.0 * d / (2.0 * d + mass2)
    k = np.arange(steps + 1)
    head = float(np.sum(p * r**k))
    par = sum(y) % 2
    sel = k[(k % 2 == par) & (k >= steps // 2) & (k > 0)]
    a0 = 2.0 * (d / (2.0 * np.pi)) ** (d / 2.0)
    resid = p[sel] * sel ** (d / 2.0) / a0 - 1.0
    A = np.vstack([sel**-1.0, sel**-2.0, sel**-3.0]).T
    coef, *_ = np.linalg.lstsq(A, resid, rcond=None)
    n0 = steps + 1 if (steps + 1) % 2 == par else steps + 2
    tail = mpmath.mpf(0)
    for j, cj in enumerate([1.0, *coef]):
        s = d / 2.0 + j
        if mass2 == 0:
            ser = mpmath.zeta(s, n0 / 2.0)
        else:
            ser = mpmath.mpf(r) ** n0 * mpmath.lerchphi(mpmath.mpf(r) ** 2, s, n0 / 2.0)
        tail += a0 * cj * mpmath.mpf(2) ** (-s) * ser
    return (head + float(tail)) / (2.0 * d + mass2)


# ----------------------------------------------------------- MC oracles
@dataclass
class RwEstimate:
    value: float
    std_error: float
    paths: int
    seed: dict


def _killed_walks(lattice, x, mass2, removed, paths, gen, target=None, K=None):
    """Simulate ``paths`` killed walks from x; return per-path visit counts
    to ``target`` (before killing), or the index into K of the first hit of K
    (-1 if killed first)."""
    V = lattice.volume
    nb = lattice.neighbor_table
    deg = 2 * lattice.dim
    dead = np.zeros(V, dtype=bool)
    if removed is not None:
        dead[[lattice.flat(u) for u in removed]] = True
    kpos = None
    if K is not None:
        kpos = -np.ones(V, dtype=int)
        for i, k in enumerate(K):
            kpos[lattice.flat(k)] = i
    pos = np.full(paths, lattice.flat(x), dtype=np.int64)
    counts = np.zeros(paths)
    hit = -np.ones(paths, dtype=int)
    pkill = mass2 / (deg + mass2)
    ids = np.arange(paths)
    while ids.size:
        p = pos[ids]
        if kpos is not None:
            kp = kpos[p]
            got = kp >= 0
            hit[ids[got]] = kp[got]
            ids, p = ids[~got], p[~got]
        dd = dead[p]
        ids, p = ids[~dd], p[~dd]
        if target is not None:
            counts[ids] += p == target
        u = gen.random(ids.size)
        survive = u >= pkill
        ids, p = ids[survive], p[survive]
        step = gen.integers(0, deg, ids.size)
        pos[ids] = nb[p, step]
    return counts if target is not None else hit


def rw_green_oracle(lattice, x, y, mass2, paths, seed, removed=None, block=20000):
    """Monte Carlo estimate of the (Dirichlet) torus Green's function at
    (x, y) from killed random walks; blocks of ``block`` walkers use streams
    ``(seed, "rw-green", b)`` so the estimate does not depend on scheduling."""
    if not (mass2 > 0 or removed):
        raise DomainError("walk must die almost surely: need m² > 0 or U nonempty")
    target = lattice.flat(y)
    deg = 2 * lattice.dim
    vals = []
    for b, start in enumerate(range(0, paths, block)):
        g = rngmod.stream(seed, "rw-green", b)
        vals.append(_killed_walks(lattice, x, mass2, removed, min(block, paths - start), g, target=target))
    v = np.concatenate(vals) / (deg + mass2)
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return RwEstimate(float(v.mean()), se, int(paths), rngmod.stream_record(seed, "rw-green"))


def rw_hitting_oracle(lattice, x, removed, mass2, K, boundary_values, paths, seed, block=20000):
    """Monte Carlo estimate of the harmonic extension at x:
    ``E^x[φ(X_{H_K}); H_K < ∞]``."""
    vals = np.asarray(boundary_values, dtype=float).copy()
    Uf = {lattice.flat(u) for u in (removed or ())}
    for i, k in enumerate(K):
        if lattice.flat(k) in Uf:
            vals[i] = 0.0
    out = []
    for b, start in enumerate(range(0, paths, block)):
        g = rngmod.stream(seed, "rw-hit", b)
        hit = _killed_walks(lattice, x, mass2, removed, min(block, paths - start), g, K=K)
        out.append(np.where(hit >= 0, vals[np.maximum(hit, 0)], 0.0))
    v = np.concatenate(out)
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return RwEstimate(float(v.mean()), se, int(paths), rngmod.stream_record(seed, "rw-hit"))
