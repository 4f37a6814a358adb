"""Exact samplers for the Gaussian fields and MCMC for the spherical and
spin O(N) models.

Spherical model
---------------
In the eigenbasis ``v = Q^T θ`` the constraint is ``|v|² = n^d`` and the
Gibbs weight is ``exp(-(β/2) Σ_w η_w v_w²)`` (up to a constant). A pair move
rotates ``(v_i, v_j) = r (cos φ, sin φ)`` and redraws φ from its exact
conditional

    p(φ) ∝ exp(-(β r²/4)(η_i - η_j) cos 2φ),

a von Mises law in the doubled angle. One sweep is two random perfect
matchings of the modes (n^d pair moves) followed by one radial move.

Pair moves alone relax the zero mode slowly once it is macroscopically
occupied: moving weight into v_0 then requires many small exchanges. The
sweep therefore ends with a radial move that resamples the zero-mode share. Writing
``v = √V (x, √(1-x²) u)`` with u a unit vector orthogonal to the zero mode,
the conditional law of x given u has density

    ∝ (1 - x²)^{(V-3)/2} exp(c x²),    c = (β V / 2) Σ_{w≠0} η_w u_w²,

which is drawn by numerical inversion on an adaptive grid.

Spin O(N) model
---------------
Heat bath with checkerboard updates: the conditional law of ``S_x/√N`` given
its neighbors is von Mises-Fisher with mean direction ``h = Σ_{y~x} S_y``
and concentration ``β √N |h|``, sampled with Wood's rejection scheme. Each
sweep ends with a global Householder reflection along a uniform random
direction, which leaves the O(N)-invariant Gibbs measure unchanged and
decorrelates the direction of the magnetization.
"""

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import rng as rngmod
from .errors import ConfigError, DomainError
from .spectral import eigenvalue_grid, from_modes


class LawTag(str, enum.Enum):
    MASSIVE_GFF = "MassiveGFF"
    ZERO_AVG_GFF = "ZeroAvgGFF"
    ZERO_AVG_PLUS_CONSTANT = "ZeroAvgPlusConstant"
    SPHERICAL = "Spherical"
    SPIN_ON = "SpinON"


@dataclass
class FieldSample:
    """One field configuration: ``values`` has shape (n^d, M)."""

    lattice: object
    values: np.ndarray = field(repr=False)
    law: LawTag
    params: dict
    provenance: dict

    @property
    def components(self):
        return self.values.shape[1]


@dataclass
class ChainDiagnostics:
    sweeps: int
    burn_in: int
    moves: int
    observable: str
    tau_int: float
    ess: float
    max_norm_drift: float = 0.0


def resolve_workers(threads):
    if threads is None:
        return 1
    threads = int(threads)
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


def map_ordered(fn, items, threads=1):
    """``[fn(i) for i in items]``, optionally on a thread pool; results are
    returned in input order so the merge is deterministic."""
    items = list(items)
    if resolve_workers(threads) == 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ------------------------------------------------------------ autocorrelation
def integrated_autocorr_time(x, c=5.0):
    """Integrated autocorrelation time ``τ = 1/2 + Σ_{k≥1} ρ_k`` with Sokal's
    self-consistent window (smallest M with M >= c τ(M)). Clamped below at
    1/2, so the effective sample size ``N/(2τ)`` never exceeds N."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return 0.5
    y = x - x.mean()
    var = np.dot(y, y) / n
    if var <= 0:
        return 0.5
    m = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(y, m)
    acf = np.fft.irfft(f * np.conjugate(f), m)[:n] / (n * var)
    taus = np.cumsum(acf) - 0.5
    for M in range(1, n):
        if M >= c * taus[M]:
            return float(max(taus[M], 0.5))
    return float(max(taus[-1], 0.5))


def chain_mean_se(series):
    """Mean over chains and autocorrelation-corrected standard error.

    ``series`` has shape (chains, samples). Each chain contributes its own
    variance estimate ``var/(N/2τ)``; the pooled error is the error of the
    average of chain means. Returns (mean, se, total ess)."""
    s = np.atleast_2d(np.asarray(series, dtype=float))
    means = s.mean(axis=1)
    var_means = []
    ess_total = 0.0
    for row in s:
        tau = integrated_autocorr_time(row)
        ess = row.size / (2.0 * tau)
        ess_total += ess
        var_means.append(row.var(ddof=1) / ess if row.size > 1 else 0.0)
    se = float(np.sqrt(np.sum(var_means)) / s.shape[0])
    return float(means.mean()), se, float(ess_total)


# ------------------------------------------------------------ exact GFFs
_BATCH = 512


def _gff_batches(lattice, weights, count, M, seed, tag, const_sd=None):
    """Draw ``count`` fields with mode standard deviations ``weights`` and
    return an array (count, n^d, M). Samples are produced in fixed batches of
    512 with streams (seed, tag, batch), independent of threading."""
    V = lattice.volume
    out = np.empty((count, V, M))
    for b, start in enumerate(range(0, count, _BATCH)):
        k = min(_BATCH, count - start)
        g = rngmod.stream(seed, tag, b)
        z = g.standard_normal((V, k * M)) * weights[:, None]
        if const_sd is not None:
            z[0] = g.standard_normal(k * M) * const_sd
        f = from_modes(z, lattice)
        out[start:start + k] = f.reshape(V, k, M).transpose(1, 0, 2)
    return out


def massive_gff_batch(lattice, mass2, count, seed, components=1):
    """``count`` independent massive GFF samples, shape (count, n^d, M)."""
    if not mass2 > 0:
        raise DomainError("massive GFF needs m² > 0")
    w = 1.0 / np.sqrt(mass2 + eigenvalue_grid(lattice))
    return _gff_batches(lattice, w, count, components, seed, "massive-gff")


def zero_avg_gff_batch(lattice, count, seed, components=1, constant_sd=None):
    """Zero-average GFF samples (mode 0 removed). With ``constant_sd`` the zero
    mode is instead a centered normal constant field of that standard
    deviation per site (coefficient sd ``constant_sd * sqrt(n^d)``)."""
    eta = eigenvalue_grid(lattice)
    w = np.zeros_like(eta)
    w[1:] = 1.0 / np.sqrt(eta[1:])
    csd = None if constant_sd is None else constant_sd * np.sqrt(lattice.volume)
    tag = "zero-avg-gff" if constant_sd is None else "zero-avg-plus-constant"
    out = _gff_batches(lattice, w, count, components, seed, tag, const_sd=csd)
    if constant_sd is None:
        # remove the O(1e-16) residual of the transform exactly
        out -= out.mean(axis=1, keepdims=True)
    return out


def sample_massive_gff(lattice, mass2, components=1, seed=0):
    vals = massive_gff_batch(lattice, mass2, 1, seed, components)[0]
    return FieldSample(lattice, vals, LawTag.MASSIVE_GFF, {"m2": float(mass2)},
                       rngmod.stream_record(seed, "massive-gff"))


def sample_zero_avg_gff(lattice, seed=0, components=1):
    vals = zero_avg_gff_batch(lattice, 1, seed, components)[0]
    return FieldSample(lattice, vals, LawTag.ZERO_AVG_GFF, {},
                       rngmod.stream_record(seed, "zero-avg-gff"))


# ------------------------------------------------------------ spherical
def doubled_angle_vonmises(gen, beta, r2, deta):
    """Exact draw of φ from ``p(φ) ∝ exp(-(β r²/4) deta cos 2φ)`` on [0, 2π).

    ψ = 2φ is von Mises with concentration ``β r² |deta| / 4`` centred at π
    when deta > 0 and at 0 otherwise; the two preimages φ = ψ/2 and ψ/2 + π
    are equally likely."""
    r2 = np.asarray(r2, dtype=float)
    deta = np.asarray(deta, dtype=float)
    kappa = beta * r2 * np.abs(deta) / 4.0
    mu = np.where(deta > 0, np.pi, 0.0)
    psi = gen.vonmises(mu, kappa)
    phi = psi / 2.0 + np.pi * gen.integers(0, 2, size=np.shape(psi))
    return np.mod(phi, 2.0 * np.pi)


def _radial_draw(gen, V, c, grid=4097):
    """Draw x in [0, 1] from ∝ (1 - x²)^{(V-3)/2} exp(c x²) by inversion of
    a trapezoidal CDF on a grid refined to the region carrying the mass."""
    a1 = (V - 3) / 2.0

    def logh(x):
        with np.errstate(divide="ignore"):
            return a1 * np.log1p(-x * x) + c * x * x

    x = np.linspace(0.0, 1.0, grid)
    lh = logh(x)
    lh -= lh.max()
    keep = np.flatnonzero(lh > -45.0)
    lo = x[max(keep[0] - 1, 0)]
    hi = x[min(keep[-1] + 1, grid - 1)]
    x = np.linspace(lo, hi, grid)
    lh = logh(x)
    h = np.exp(lh - lh.max())
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (h[1:] + h[:-1]))])
    cdf /= cdf[-1]
    return float(np.interp(gen.random(), cdf, x))


class SphericalGibbs:
    """Eigenbasis Gibbs chain for the spherical model on ``lattice``."""

    def __init__(self, lattice, beta, gen, radial=True):
        if beta < 0:
            raise DomainError("beta must be nonnegative")
        self.lattice = lattice
        self.beta = float(beta)
        self.gen = gen
        self.radial = radial
        self.V = lattice.volume
        self.eta = eigenvalue_grid(lattice)
        v = gen.standard_normal(self.V)
        self.v = v * np.sqrt(self.V) / np.linalg.norm(v)
        self.moves = 0
        self.max_drift = 0.0

    def _matching(self):
        V = self.V
        p = self.gen.permutation(V)
        h = V // 2
        i, j = p[:h], p[h:2 * h]
        vi, vj = self.v[i], self.v[j]
        r2 = vi * vi + vj * vj
        phi = doubled_angle_vonmises(self.gen, self.beta, r2, self.eta[i] - self.eta[j])
        r = np.sqrt(r2)
        self.v[i] = r * np.cos(phi)
        self.v[j] = r * np.sin(phi)
        self.moves += h

    def _radial(self):
        V = self.V
        v = self.v
        rest2 = float(np.dot(v[1:], v[1:]))
        if rest2 <= 0:
            return
        eu = float(np.dot(self.eta[1:], v[1:] ** 2)) / rest2
        c = self.beta * V * eu / 2.0
        x = _radial_draw(self.gen, V, c)
        sgn = 1.0 if self.gen.random() < 0.5 else -1.0
        v[1:] *= np.sqrt(V * (1.0 - x * x) / rest2)
        v[0] = sgn * np.sqrt(V) * x

    def sweep(self):
        self._matching()
        self._matching()
        if self.radial:
            self._radial()
        nrm2 = float(np.dot(self.v, self.v))
        self.max_drift = max(self.max_drift, abs(nrm2 / self.V - 1.0))
        self.v *= np.sqrt(self.V / nrm2)

    def field(self):
        return from_modes(self.v, self.lattice)


def site_probes(lattice, sites):
    """Rows ``q^·_x`` for the given sites, so that θ_x = probe @ v."""
    n = lattice.side
    out = []
    for s in sites:
        c = lattice.coords(s)
        row = np.ones(1)
        for ci in c:
            t = 2.0 * np.pi * ci * np.arange(n) / n
            row = np.kron(row, np.cos(t) + np.sin(t))
        out.append(row / np.sqrt(lattice.volume))
    return np.array(out)


def spherical_observables(lattice, probe_sites):
    """Per-sweep observables of the mode vector v: θ at probe sites, the
    site-averaged neighbor product along axis 0, the energy per site and
    the magnetization."""
    P = site_probes(lattice, probe_sites)
    eta = eigenvalue_grid(lattice)
    n, d, V = lattice.side, lattice.dim, lattice.volume
    w0 = lattice.coord_array[:, 0]
    cos0 = np.cos(2.0 * np.pi * w0 / n)

    def obs(v):
        th = P @ v
        v2 = v * v
        return {
            "theta": th,
            "nbr_avg": float(np.dot(v2, cos0)) / V,
            "energy": float(np.dot(v2, 2 * d - eta)) / V,
            "mag": float(v[0]) / np.sqrt(V),
        }

    return obs


def low_mode_energy(lattice):
    eta = eigenvalue_grid(lattice)
    low = np.flatnonzero(eta <= np.unique(eta)[1] + 1e-12)

    def f(v):
        return float(np.dot(v[low], v[low])) / lattice.volume

    return f


def run_spherical_chain(lattice, beta, sweeps, burn_in, seed, chain=0,
                        probe_sites=(0,), radial=True, record_every=1):
    """Run one spherical chain.

    Returns (FieldSample, ChainDiagnostics, records) where ``records`` maps
    observable names to arrays over recorded sweeps after burn-in. With
    ``burn_in=None`` the burn-in is 20 times the autocorrelation time of the
    low-mode occupation measured on a pilot of 200 sweeps (at least 100).
    """
    if sweeps <= 0:
        raise ConfigError("sweeps must be positive")
    gen = rngmod.stream(seed, "spherical", chain)
    ch = SphericalGibbs(lattice, beta, gen, radial=radial)
    lme = low_mode_energy(lattice)
    if burn_in is None:
        pilot = []
        for _ in range(200):
            ch.sweep()
            pilot.append(lme(ch.v))
        burn_in = int(max(100, np.ceil(20 * integrated_autocorr_time(pilot)))) + 200
        done = 200
    else:
        done = 0
    if sweeps <= burn_in:
        raise ConfigError(f"sweeps ({sweeps}) must exceed burn_in ({burn_in})")
    for _ in range(burn_in - done):
        ch.sweep()
    obs = spherical_observables(lattice, probe_sites)
    rec = {"theta": [], "nbr_avg": [], "energy": [], "mag": [], "low_mode": []}
    for s in range(sweeps - burn_in):
        ch.sweep()
        if s % record_every == 0:
            o = obs(ch.v)
            for k in ("theta", "nbr_avg", "energy", "mag"):
                rec[k].append(o[k])
            rec["low_mode"].append(lme(ch.v))
    rec = {k: np.asarray(v) for k, v in rec.items()}
    tau = integrated_autocorr_time(rec["low_mode"])
    diag = ChainDiagnostics(int(sweeps), int(burn_in), int(ch.moves), "low_mode",
                            tau, rec["low_mode"].size / (2.0 * tau), ch.max_drift)
    fs = FieldSample(lattice, ch.field()[:, None], LawTag.SPHERICAL, {"beta": float(beta)},
                     dict(rngmod.stream_record(seed, "spherical", chain), sweeps=int(sweeps)))
    return fs, diag, rec


def sample_spherical_gibbs(params, sweeps, burn_in, seed, chain=0):
    """Final configuration and diagnostics of one spherical chain."""
    fs, diag, _ = run_spherical_chain(params.lattice, params.beta, sweeps, burn_in, seed, chain)
    return fs, diag


def spherical_exact_tiny(params, samples, seed, observables=None):
    """Importance-sampling oracle for tiny volumes (n^d <= 16).

    Proposals are uniform on the sphere of radius sqrt(n^d), weighted by
    ``exp((β/2) Σ_{x~y} θ_x θ_y)``. Returns a dict of observable ->
    (estimate, standard error) plus ``ess`` and ``low_ess`` (ESS < 100).
    """
    L = params.lattice
    V = L.volume
    if V > 16:
        raise DomainError("importance-sampling oracle limited to n^d <= 16")
    gen = rngmod.stream(seed, "spherical-is", 0)
    nb = L.neighbor_table
    acc = {}
    w_all = []
    f_all = {}
    for start in range(0, samples, 100000):
        k = min(100000, samples - start)
        z = gen.standard_normal((k, V))
        th = z * np.sqrt(V) / np.linalg.norm(z, axis=1, keepdims=True)
        e = np.einsum("kx,kxj->k", th, th[:, nb])
        lw = 0.5 * params.beta * e
        w_all.append(lw)
        fs = _tiny_observables(th, L) if observables is None else observables(th)
        for key, val in fs.items():
            f_all.setdefault(key, []).append(val)
    lw = np.concatenate(w_all)
    w = np.exp(lw - lw.max())
    sw = w.sum()
    ess = sw**2 / np.dot(w, w)
    for key, parts in f_all.items():
        f = np.concatenate(parts)
        mu = float(np.dot(w, f) / sw)
        se = float(np.sqrt(np.dot(w * w, (f - mu) ** 2)) / sw)
        acc[key] = (mu, se)
    acc["ess"] = float(ess)
    acc["low_ess"] = bool(ess < 100)
    return acc


def _tiny_observables(th, lattice):
    e0 = lattice.flat(lattice.neighbors(0)[0])
    return {
        "theta0": th[:, 0],
        "theta0^2": th[:, 0] ** 2,
        "theta0*theta_e": th[:, 0] * th[:, e0],
        "theta0^4": th[:, 0] ** 4,
    }


def spherical_rejection_exact(params, samples, seed, max_tries=10**7):
    """Independent exact sampler for small volumes (n^d <= 64): rejection
    from an angular central Gaussian envelope (Kent, Ganeiber and Mardia's
    construction for Bingham laws). Returns an array (samples, n^d) of
    site-space configurations."""
    L = params.lattice
    V = L.volume
    if V > 64:
        raise DomainError("rejection sampler limited to n^d <= 64")
    lam = 0.5 * params.beta * V * eigenvalue_grid(L)  # density exp(-u^T diag(lam) u)
    q = V
    if np.all(lam == 0):
        b = float(q)
    else:
        b = optimize.brentq(lambda b: np.sum(1.0 / (b + 2.0 * lam)) - 1.0, 1e-12, q)
    omega = 1.0 + 2.0 * lam / b
    logM = -(q - b) / 2.0 + (q / 2.0) * np.log(q / b)
    gen = rngmod.stream(seed, "spherical-acg", 0)
    out = []
    tries = 0
    while len(out) < samples and tries < max_tries:
        k = 4096
        y = gen.standard_normal((k, V)) / np.sqrt(omega)
        u = y / np.linalg.norm(y, axis=1, keepdims=True)
        quad = (u * u) @ lam
        acg = (u * u) @ omega
        log_ratio = -quad + (q / 2.0) * np.log(acg) - logM
        ok = np.log(gen.random(k)) < log_ratio
        out.extend(u[ok])
        tries += k
    if len(out) < samples:
        raise RuntimeError("rejection sampler acceptance too low")
    modes = np.sqrt(V) * np.array(out[:samples])
    return from_modes(modes.T, L).T


# ------------------------------------------------------------ spin O(N)
def sample_vmf(gen, mu, kappa):
    """von Mises-Fisher draws on the unit sphere S^{p-1}.

    ``mu`` has shape (m, p) (unit rows), ``kappa`` shape (m,). Wood's
    rejection scheme for the cosine w = <x, mu>, plus a uniform tangent
    direction."""
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    m, p = mu.shape
    b = (p - 1.0) / (2.0 * kappa + np.sqrt(4.0 * kappa**2 + (p - 1.0) ** 2))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + (p - 1.0) * np.log(1.0 - x0 * x0)
    w = np.empty(m)
    todo = np.arange(m)
    while todo.size:
        z = gen.beta((p - 1.0) / 2.0, (p - 1.0) / 2.0, size=todo.size)
        bb = b[todo]
        ww = (1.0 - (1.0 + bb) * z) / (1.0 - (1.0 - bb) * z)
        u = gen.random(todo.size)
        ok = kappa[todo] * ww + (p - 1.0) * np.log(1.0 - x0[todo] * ww) - c[todo] >= np.log(u)
        w[todo[ok]] = ww[ok]
        todo = todo[~ok]
    v = gen.standard_normal((m, p))
    v -= np.sum(v * mu, axis=1, keepdims=True) * mu
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return w[:, None] * mu + np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * v


class SpinONHeatBath:
    """Checkerboard heat bath for the spin O(N) model; spins S_x have
    |S_x|² = N."""

    def __init__(self, lattice, beta, N, gen, householder=True):
        if N < 2:
            raise DomainError("N must be >= 2")
        if beta < 0:
            raise DomainError("beta must be nonnegative")
        self.lattice = lattice
        self.beta = float(beta)
        self.N = int(N)
        self.gen = gen
        self.householder = householder
        self.nb = lattice.neighbor_table
        self.colors = lattice.checkerboard()
        s = gen.standard_normal((lattice.volume, N))
        self.S = s * np.sqrt(N) / np.linalg.norm(s, axis=1, keepdims=True)
        self.max_drift = 0.0

    def sweep(self):
        sq = np.sqrt(self.N)
        for sites in self.colors:
            h = self.S[self.nb[sites]].sum(axis=1)
            hn = np.linalg.norm(h, axis=1)
            mu = np.zeros_like(h)
            pos = hn > 0
            mu[pos] = h[pos] / hn[pos, None]
            mu[~pos, 0] = 1.0
            self.S[sites] = sq * sample_vmf(self.gen, mu, self.beta * sq * hn)
        if self.householder:
            a = self.gen.standard_normal(self.N)
            a /= np.linalg.norm(a)
            self.S -= 2.0 * np.outer(self.S @ a, a)
        nrm = np.sum(self.S * self.S, axis=1)
        self.max_drift = max(self.max_drift, float(np.max(np.abs(nrm / self.N - 1.0))))


def run_spin_chain(lattice, beta, N, sweeps, burn_in, seed, chain=0, components=1,
                   pair_offsets=None, record_every=1):
    """Run one spin O(N) chain.

    Records per sweep: the magnetization vector's first ``components``
    entries, the energy per site and per component, the single-pair products
    ``S¹_x S¹_y`` for the pairs in ``pair_offsets`` (list of site pairs), their
    translation averages for the first component, and their translation and
    component averages.
    """
    if sweeps <= burn_in:
        raise ConfigError(f"sweeps ({sweeps}) must exceed burn_in ({burn_in})")
    gen = rngmod.stream(seed, f"spin-on-{N}", chain)
    ch = SpinONHeatBath(lattice, beta, N, gen)
    for _ in range(burn_in):
        ch.sweep()
    V = lattice.volume
    pairs = list(pair_offsets or [])
    shifts = []
    for x, y in pairs:
        a, b = lattice.coords(x), lattice.coords(y)
        shifts.append(tuple((bi - ai) % lattice.side for ai, bi in zip(a, b)))
    pflat = [(lattice.flat(x), lattice.flat(y)) for x, y in pairs]
    grid_idx = np.arange(V).reshape(lattice.shape)
    shifted = [np.roll(grid_idx, tuple(-s for s in sh), axis=tuple(range(lattice.dim))).ravel()
               for sh in shifts]
    rec = {"mag": [], "energy": [], "pair": [], "pair1": [], "pair_avg": [], "cross": []}
    for s in range(sweeps - burn_in):
        ch.sweep()
        if s % record_every:
            continue
        S = ch.S
        rec["mag"].append(S[:, :components].mean(axis=0))
        e = np.sum(S * S[ch.nb].sum(axis=1)) / (V * ch.N)
        rec["energy"].append(e)
        rec["pair"].append([S[a, 0] * S[b, 0] for a, b in pflat])
        rec["pair1"].append([np.mean(S[:, 0] * S[ix, 0]) for ix in shifted])
        rec["pair_avg"].append([np.sum(S * S[ix]) / (V * ch.N) for ix in shifted])
        rec["cross"].append(float(np.mean(S[:, 0] * S[:, 1])) if ch.N > 1 else 0.0)
    rec = {k: np.asarray(v) for k, v in rec.items()}
    tau = integrated_autocorr_time(rec["energy"])
    diag = ChainDiagnostics(int(sweeps), int(burn_in), int(sweeps * V), "energy",
                            tau, rec["energy"].size / (2.0 * tau), ch.max_drift)
    fs = FieldSample(lattice, ch.S[:, :components].copy(), LawTag.SPIN_ON,
                     {"beta": float(beta), "N": int(N), "M": int(components)},
                     dict(rngmod.stream_record(seed, f"spin-on-{N}", chain), sweeps=int(sweeps)))
    return fs, diag, rec


def sample_spin_on_gibbs(params, N, sweeps, burn_in, seed, project_to=1, chain=0):
    if project_to > N:
        raise DomainError("cannot project to more components than N")
    fs, diag, _ = run_spin_chain(params.lattice, params.beta, N, sweeps, burn_in, seed,
                                 chain, components=project_to)
    return fs, diag
