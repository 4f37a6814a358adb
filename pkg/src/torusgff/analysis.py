"""Estimators and spectral analytics.

* exact finite-volume moments of the spherical model (characteristic
  function inversion of a Gaussian conditioned on its norm),
* the conditioned zero-average covariance ``Ξ`` (Schur complement) and its
  spectrum, computed by deflation in the eigenspaces of the Laplacian,
* norm statistics of zero-average fields,
* local CLT diagnostics: kernel density estimates of normalised weighted
  chi-square sums compared with the standard normal density, plus exact
  densities by Fourier inversion.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import rng as rngmod
from .errors import DomainError
from .greens import zero_average_green
from .lattice import TorusLattice
from .mass import solve_torus_mass
from .spectral import eigenvalue_grid, site_probe_matrix

GRID = np.linspace(-4.0, 4.0, 321)


@dataclass
class MomentEstimate:
    observable: str
    value: float
    std_error: float
    n_eff: float


def estimate(observable, x):
    """Mean of independent draws with its standard error."""
    x = np.asarray(x, dtype=float)
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return MomentEstimate(observable, float(x.mean()), se, float(x.size))


# ------------------------------------------------------------------ exact spherical
def spherical_exact_moments(lattice, beta, width=40.0, points_per_period=48):
    """Exact ``E[v_w²]`` for the spherical model on a finite torus.

    The spherical law is the law of ``v ~ N(0, diag(λ))`` conditioned on
    ``|v|² = n^d`` for ``λ_w = 1/(β (η_w + m²))`` and any m² > 0; taking m² from
    the mass equation puts the saddle point of the inversion integral at
    t = 0. With ``f`` the density of ``|v|²`` and ``f_w`` the same density with
    the w-th term size-biased (an extra factor ``(1 - 2iλ_w t)^{-1}`` in the
    characteristic function),

        E[v_w²] = λ_w f_w(n^d) / f(n^d).

    Returns a dict with the per-mode second moments (flat, length n^d), the
    neighbor covariance ``E[θ_0 θ_e]``, ``E[m̄²]`` and a normalisation check
    ``Σ_w E[v_w²] / n^d`` (exactly 1 in exact arithmetic).
    """
    eta = eigenvalue_grid(lattice)
    V = lattice.volume
    ev, inv, mult = np.unique(eta, return_inverse=True, return_counts=True)
    if beta == 0:
        ew = np.ones(V)
        norm = 1.0
    else:
        m2 = solve_torus_mass(lattice, beta).m_squared
        lam = 1.0 / (beta * (ev + m2))
        rest = np.sum(mult[1:] * lam[1:] ** 2)
        tmax = width / np.sqrt(rest if rest > 0 else np.sum(mult * lam**2))
        npts = int(max(20001, points_per_period * lam.max() * tmax / np.pi)) | 1
        t = np.linspace(0.0, tmax, npts)
        logmod = np.zeros_like(t)
        phase = -t * V
        for lv, mv in zip(lam, mult):
            logmod -= 0.25 * mv * np.log1p(4.0 * lv * lv * t * t)
            phase += 0.5 * mv * np.arctan(2.0 * lv * t)
        base = np.exp(logmod + 1j * phase)
        f0 = np.trapezoid(base.real, t)
        e_group = np.array([lv * np.trapezoid((base / (1.0 - 2j * lv * t)).real, t) / f0 for lv in lam])
        ew = e_group[inv]
        norm = float(np.sum(mult * e_group) / V)
    cos0 = np.cos(2.0 * np.pi * lattice.coord_array[:, 0] / lattice.side)
    return {
        "mode_second_moments": ew,
        "neighbor_cov": float(np.dot(ew, cos0) / V),
        "mag_sq": float(ew[0] / V),
        "norm_check": norm,
    }


# ------------------------------------------------------------------ Schur spectrum
@dataclass
class CriticalSpectrumReport:
    n: int
    d: int
    U: list
    mu: np.ndarray = field(repr=False)
    eta_sorted: np.ndarray = field(repr=False)
    var_gamma: float = 0.0
    var_gamma_hat: float = 0.0
    trace_power_ratios: dict = field(default_factory=dict)
    T_n_statistic: float = 0.0
    eta2_sq_var_gamma: float = 0.0
    interlacing_ok: bool = True
    interlacing_violation: float = 0.0
    min_mu: float = 0.0
    h: np.ndarray = field(default=None, repr=False)
    nu: np.ndarray = field(default=None, repr=False)
    shifted_array: tuple = field(default=None, repr=False)


def _group_bases(eta):
    """Indices of the modes in each exact eigenspace."""
    order = np.argsort(eta, kind="stable")
    vals = eta[order]
    cuts = np.flatnonzero(np.diff(vals) != 0) + 1
    return np.split(order, cuts)


def conditioned_covariance_spectrum(lattice, U, y=None, check=True):
    """Spectrum of the conditional covariance of the zero-average GFF off U
    given its values on U.

    ``Ξ = G - G P_U (G_UU)^{-1} P_U^T G`` is a rank-|U| downdate of ``G``.
    In the eigenbasis of the Laplacian, G is diagonal and the downdate acts
    inside each eigenspace only through the span of the columns ``G e_u``,
    so the problem deflates to a dense matrix of size at most
    |U| x (number of distinct eigenvalues). ``mu`` holds the |U^c| eigenvalues
    of Ξ on U^c in nonincreasing order (including the zero eigenvalue of the
    direction fixed by the zero-sum constraint).
    """
    L = lattice
    V = L.volume
    if L.dim < 3:
        raise DomainError("the zero-average field is defined for d >= 3")
    Uf = sorted({L.flat(u) for u in U})
    k = len(Uf)
    eta = eigenvalue_grid(L)
    g = np.zeros(V)
    g[1:] = 1.0 / eta[1:]
    eta_sorted = np.sort(eta)
    if k == 0:
        mu = np.sort(g)[::-1]
        nu_modes = np.zeros(V)
        Wc = None
        basis = None
        P = None
    else:
        Qu = site_probe_matrix(L, Uf)  # rows q^·_u, shape (k, V)
        W = (Qu * g).T  # columns G e_u in mode coordinates
        Guu = Qu @ W
        M = np.linalg.inv(Guu)
        diag_vals, blocks = [], []
        mu_list = []
        for grp in _group_bases(eta):
            gv = g[grp[0]]
            Wg = W[grp]
            if gv == 0 or not np.any(Wg):
                mu_list.extend([gv] * grp.size)
                continue
            qmat, rmat = np.linalg.qr(Wg)
            rank = int(np.sum(np.abs(np.diag(rmat)) > 1e-12 * max(1.0, np.abs(rmat).max())))
            rank = max(rank, 1)
            mu_list.extend([gv] * (grp.size - rank))
            blocks.append((grp, qmat[:, :rank]))
            diag_vals.extend([gv] * rank)
        # compressed coordinates: stacked orthonormal bases of span(W_g)
        dim = len(diag_vals)
        Wc = np.zeros((dim, k))
        pos = 0
        for grp, qb in blocks:
            r = qb.shape[1]
            Wc[pos:pos + r] = qb.T @ W[grp]
            pos += r
        Xi_c = np.diag(diag_vals) - Wc @ M @ Wc.T
        Xi_c = 0.5 * (Xi_c + Xi_c.T)
        evals, P = np.linalg.eigh(Xi_c)
        full = np.concatenate([evals, np.array(mu_list)])
        # the k directions e_u (u in U) carry exact zeros; drop k smallest-|.|
        order = np.argsort(np.abs(full), kind="stable")
        full = np.delete(full, order[:k])
        mu = np.sort(full)[::-1]
        basis = blocks
    # conditional mean and its coordinates in the eigenbasis of Ξ
    h = None
    nu = None
    if k and y is not None:
        yv = np.asarray(y, dtype=float).reshape(k)
        alpha = M @ yv
        nu = site_field_from_modes_columns(L, W @ alpha)
        hc = P.T @ (Wc @ alpha)
        h = hc
        mu_c = evals
        var_hat = 2.0 * (np.sum(mu**2) + 2.0 * np.sum(hc**2 * mu_c))
        # (μ_k, h_k) over the nonzero eigenvalues; directions outside the
        # deflated block carry no shift
        rest = np.array(mu_list)
        weights = np.concatenate([evals, rest])
        shifts = np.concatenate([hc, np.zeros(rest.size)])
        keep = weights > 1e-12 * max(1.0, weights.max())
        shifted = (weights[keep], shifts[keep])
    else:
        var_hat = 2.0 * np.sum(mu**2)
        shifted = None
    var_gamma = 2.0 * np.sum(g**2)
    ratios = {}
    for l in range(2, 7):
        ratios[l] = float(np.sum(mu**l) / np.sum(g[1:] ** l))
    rep = CriticalSpectrumReport(
        n=L.side, d=L.dim, U=Uf, mu=mu, eta_sorted=eta_sorted,
        var_gamma=float(var_gamma), var_gamma_hat=float(var_hat),
        trace_power_ratios=ratios, T_n_statistic=ratios[3],
        eta2_sq_var_gamma=float(eta_sorted[1] ** 2 * var_gamma),
        min_mu=float(mu.min()), h=h, nu=nu, shifted_array=shifted,
    )
    if check:
        ok, worst = interlacing_check(mu, eta_sorted, k)
        rep.interlacing_ok = ok
        rep.interlacing_violation = worst
    return rep


def site_field_from_modes_columns(lattice, modes):
    from .spectral import from_modes
    return from_modes(modes, lattice)


def interlacing_check(mu, eta_sorted, k, tol=1e-10):
    """Check ``1/η_{2k+j+1} <= μ_j <= 1/η_{j+1}`` (one-based j, η ascending
    with η_1 = 0, bounds beyond the spectrum read as 0). Returns (ok, worst
    violation)."""
    V = eta_sorted.size
    inv = np.zeros(V + 1)
    inv[2:] = 1.0 / eta_sorted[1:]  # inv[i] = 1/η_i, one-based
    worst = 0.0
    scale = max(1.0, float(np.max(np.abs(mu))))
    for j in range(1, mu.size + 1):
        up = inv[j + 1] if j + 1 <= V else 0.0
        lo_idx = 2 * k + j + 1
        lo = inv[lo_idx] if lo_idx <= V else 0.0
        worst = max(worst, mu[j - 1] - up, lo - mu[j - 1])
    return bool(worst <= tol * scale), float(worst)


# ------------------------------------------------------------------ norm statistics
def norm_statistics(sq_norms, exact_mean, exact_var, volume, dim):
    """Moments of ``‖γ‖²`` samples.

    Returns MomentEstimates for ``‖γ‖²/n^d``, ``‖γ‖²`` and its sample variance,
    the standardised ``X_n`` mean and variance, and the excess kurtosis of
    X_n with a normal-theory standard error sqrt(24/N). For d >= 4 an
    Anderson-Darling statistic of X_n against N(0,1) is added."""
    s = np.asarray(sq_norms, dtype=float)
    if s.size < 100:
        raise DomainError("norm statistics need at least 100 samples")
    X = (s - exact_mean) / np.sqrt(exact_var)
    N = s.size
    out = {
        "norm_per_site": estimate("|gamma|^2/n^d", s / volume),
        "norm": estimate("|gamma|^2", s),
        "X_mean": estimate("X_n", X),
        "X_var": MomentEstimate("Var X_n", float(X.var(ddof=1)),
                                float(X.var(ddof=1) * np.sqrt(2.0 / (N - 1))), float(N)),
        "sample_var": MomentEstimate("Var |gamma|^2", float(s.var(ddof=1)),
                                     float(_var_se(s)), float(N)),
        "excess_kurtosis": MomentEstimate("excess kurtosis X_n", float(stats.kurtosis(X)),
                                          float(np.sqrt(24.0 / N)), float(N)),
    }
    if dim >= 4:
        ad = stats.anderson(X, dist="norm")
        out["anderson_darling"] = MomentEstimate("AD statistic", float(ad.statistic), 0.0, float(N))
    return out


def _var_se(x):
    """Standard error of the sample variance (fourth-moment formula)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    m2 = np.mean((x - x.mean()) ** 2)
    m4 = np.mean((x - x.mean()) ** 4)
    return np.sqrt(max(m4 - m2 * m2 * (n - 3) / (n - 1), 0.0) / n)


def sample_zero_avg_norms(lattice, count, seed, tag="zero-avg-norm"):
    """Exact draws of ``‖γ‖² = Σ_{w≠0} Z_w²/η_w``, grouped by eigenspace:
    a group of multiplicity m contributes ``χ²_m / η``."""
    ev, mult = np.unique(eigenvalue_grid(lattice), return_counts=True)
    gen = rngmod.stream(seed, tag, 0)
    out = np.zeros(count)
    for e, m in zip(ev[1:], mult[1:]):
        out += gen.chisquare(m, size=count) / e
    return out


# ------------------------------------------------------------------ local CLT
@dataclass
class DensityDiagnostic:
    grid: np.ndarray = field(repr=False)
    empirical_density: np.ndarray = field(repr=False)
    reference_density: np.ndarray = field(repr=False)
    sup_distance: float
    bandwidth: float
    samples: int
    integral: float
    label: str = ""
    lindeberg_ratio: float = None
    conditions: dict = None


def _grouped(weights, multiplicity=None):
    w = np.asarray(weights, dtype=float).ravel()
    if multiplicity is None:
        vals, mult = np.unique(w, return_counts=True)
    else:
        vals, mult = w, np.asarray(multiplicity, dtype=int).ravel()
    if np.any(vals <= 0):
        raise DomainError("weights must be positive")
    return vals, mult


def weighted_chisq_samples(weights, count, seed, multiplicity=None, tag="local-clt", shifts=None):
    """Draws of ``Σ_i λ_i (Y_i² - 1) / s_n`` with ``s_n² = 2 Σ λ_i²``; equal
    weights are merged into one chi-square variable with the summed degrees of
    freedom. With ``shifts`` h_i the summands are ``(h_i + √λ_i Y_i)² - λ_i - h_i²``
    (drawn as scaled noncentral chi-squares)."""
    gen = rngmod.stream(seed, tag, 0)
    if shifts is None:
        vals, mult = _grouped(weights, multiplicity)
        s = np.sqrt(2.0 * np.sum(mult * vals**2))
        if s == 0:
            raise DomainError("degenerate weights")
        out = np.zeros(count)
        for v, m in zip(vals, mult):
            out += v * (gen.chisquare(m, size=count) - m)
        return out / s
    lam = np.asarray(weights, dtype=float).ravel()
    h = np.asarray(shifts, dtype=float).ravel()
    s = np.sqrt(np.sum(2.0 * lam**2 + 4.0 * h**2 * lam))
    out = np.zeros(count)
    for v in np.unique(lam):
        sel = lam == v
        m = int(sel.sum())
        nc = float(np.sum(h[sel] ** 2) / v)
        draw = gen.noncentral_chisquare(m, nc, size=count) if nc > 0 else gen.chisquare(m, size=count)
        out += v * draw - v * m - v * nc
    return out / s


def silverman_bandwidth(x):
    """Silverman's rule of thumb ``0.9 min(sd, IQR/1.34) N^{-1/5}``."""
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    a = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * a * x.size ** (-0.2)


def kde(x, grid=GRID, bandwidth=None, chunk=20000):
    """Gaussian kernel density estimate on ``grid``."""
    x = np.asarray(x, dtype=float)
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    dens = np.zeros(grid.size)
    for start in range(0, x.size, chunk):
        z = (grid[:, None] - x[None, start:start + chunk]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    return dens / (x.size * h * np.sqrt(2.0 * np.pi)), h


def density_diagnostic(x, reference, label="", grid=GRID):
    dens, h = kde(x, grid)
    ref = reference(grid) if callable(reference) else np.asarray(reference)
    return DensityDiagnostic(grid, dens, ref, float(np.max(np.abs(dens - ref))), float(h),
                             int(np.size(x)), float(np.trapezoid(dens, grid)), label)


def local_clt_diagnostic(weights, samples, seed, multiplicity=None, shifts=None, label="",
                         eps=0.1, conditions=True):
    """KDE of the normalised weighted chi-square sum against N(0,1)."""
    if samples < 10_000:
        raise DomainError("local CLT diagnostic needs at least 1e4 samples")
    x = weighted_chisq_samples(weights, samples, seed, multiplicity, shifts=shifts)
    diag = density_diagnostic(x, stats.norm.pdf, label)
    if shifts is None:
        vals, mult = _grouped(weights, multiplicity)
        diag.lindeberg_ratio = lindeberg_ratio(vals, mult, eps)
        if conditions:
            diag.conditions = structural_conditions(vals, mult)
    return diag


def chisq2_closed_form(x):
    """Density of ``(Y_1² + Y_2² - 2)/2``: a unit exponential shifted by -1."""
    x = np.asarray(x, dtype=float)
    return np.where(x >= -1.0, np.exp(-(x + 1.0)), 0.0)


def chisq2_smoothed(x, h):
    """``chisq2_closed_form`` convolved with a centred Gaussian of sd h (the
    expectation of a Gaussian KDE with bandwidth h)."""
    x = np.asarray(x, dtype=float)
    u = x + 1.0
    return np.exp(-u + 0.5 * h * h) * stats.norm.cdf(u / h - h)


def _chi1_tail_moment(k, a):
    """E[W^k ; W > a] for W ~ chi-square with one degree of freedom."""
    a = np.maximum(a, 0.0)
    c = 2.0**k * special.gamma(k + 0.5) / special.gamma(0.5)
    return c * special.gammaincc(k + 0.5, a / 2.0)


def _tail_second_moment(lam, t):
    """E[X² ; |X| > t] for X = λ(Y² - 1), elementwise in λ."""
    lam = np.asarray(lam, dtype=float)
    up = 1.0 + t / lam
    lo = 1.0 - t / lam

    def part(a):
        return _chi1_tail_moment(2, a) - 2.0 * _chi1_tail_moment(1, a) + _chi1_tail_moment(0, a)

    upper = part(up)
    # lower tail {Y² < lo}, present only when t < λ
    lower = np.where(lo > 0, (3.0 - 2.0 + 1.0) - part(np.maximum(lo, 0.0)), 0.0)
    return lam**2 * (upper + lower)


def lindeberg_ratio(vals, mult, eps):
    """``Σ E[X_i² 1{|X_i| > ε s_n}] / s_n²`` for X_i = λ_i (Y_i² - 1)."""
    s = np.sqrt(2.0 * np.sum(mult * vals**2))
    return float(np.sum(mult * _tail_second_moment(vals, eps * s)) / s**2)


def structural_conditions(vals, mult, r=1.5, l_lower=1, l_upper=None, K=10.0, delta=0.5,
                          gap_factor=10.0):
    """Numerical check of the structural hypotheses of the local limit
    theorem for the array ``λ_i (Y_i² - 1)`` with one concrete choice of the
    constants (defaults: r = 3/2, l_* = 1, l^* = 2 ceil(r/(r-1)), K = 10,
    δ = 1/2; "≫" in (c) is read as a factor ``gap_factor``). Returns a dict of
    the computed quantities and booleans."""
    lam = np.repeat(vals, mult)
    lam = np.sort(lam)[::-1]
    n = lam.size
    sig2 = 2.0 * lam**2
    if l_upper is None:
        l_upper = 2 * int(np.ceil(r / (r - 1.0)))
    # L^r norm of the density of λ(Y²-1): λ^{(1-r)/r} ||f_chi1||_r
    fr = ((2.0 * np.pi) ** (-r / 2.0) * special.gamma(1.0 - r / 2.0) * (r / 2.0) ** (r / 2.0 - 1.0)) ** (1.0 / r)
    Lr = float(np.max(lam ** ((1.0 - r) / r)) * fr)
    tail = sig2[l_lower - 1:]
    a = float(tail.sum() / sig2.sum())
    b = float(np.sum(_tail_second_moment(lam[l_lower - 1:], K)) / tail.sum())
    if n > l_upper and sig2.sum() > 1.0:
        c = float((n - l_upper) / max(sig2[l_upper - 1], K * K) / np.log(sig2.sum()))
    else:
        c = float("nan")  # array too short for the chosen l^*
    return {
        "r": r, "Lr_bound": Lr, "l_lower": l_lower, "l_upper": l_upper, "K": K, "delta": delta,
        "a_ratio": a, "a_holds": bool(a >= delta),
        "b_ratio": b, "b_holds": bool(b <= 0.125),
        "c_ratio": c, "c_holds": bool(c >= gap_factor),
    }


def weighted_chisq_density(weights, x, multiplicity=None, shifts=None, tmax=None, npts=200001):
    """Exact density of the normalised sum on points ``x`` by Fourier
    inversion of its characteristic function (trapezoid rule on [0, tmax])."""
    if shifts is None:
        vals, mult = _grouped(weights, multiplicity)
        h2 = np.zeros_like(vals)
    else:
        vals = np.asarray(weights, dtype=float).ravel()
        mult = np.ones(vals.size, dtype=int)
        h2 = np.asarray(shifts, dtype=float).ravel() ** 2
    s = np.sqrt(np.sum(mult * 2.0 * vals**2 + 4.0 * h2 * vals))
    lv = vals / s
    hv = h2 / s
    if tmax is None:
        tmax = 40.0 / np.sqrt(np.sum(mult * lv * lv))
        while np.sum(mult * 0.25 * np.log1p(4.0 * lv * lv * tmax * tmax)) < 40.0:
            tmax *= 2.0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if tmax / (npts - 1) > 0.5 / max(1.0, float(np.max(np.abs(x)))):
        raise DomainError("characteristic function decays too slowly for trapezoid "
                          "inversion on this grid (too few terms)")
    t = np.linspace(0.0, tmax, npts)
    logmod = np.zeros_like(t)
    phase = np.zeros_like(t)
    for v, m, hh in zip(lv, mult, hv):
        den = 1.0 + 4.0 * v * v * t * t
        logmod += -0.25 * m * np.log1p(4.0 * v * v * t * t) - 2.0 * hh * v * t * t * 2.0 / den
        phase += 0.5 * m * np.arctan(2.0 * v * t) - m * v * t + hh * t / den - hh * t
    phi = np.exp(logmod + 1j * phase)
    out = np.empty(x.size)
    for i, xi in enumerate(x):
        out[i] = np.trapezoid((phi * np.exp(-1j * t * xi)).real, t) / np.pi
    return out


def moment_table(theta_series, label):
    """Moments of single-site spherical values: second, fourth, odd ones."""
    th = np.asarray(theta_series, dtype=float)
    return {
        "m1": estimate(f"{label} theta", th),
        "m2": estimate(f"{label} theta^2", th**2),
        "m3": estimate(f"{label} theta^3", th**3),
        "m4": estimate(f"{label} theta^4", th**4),
    }


def even_moment_bound(p):
    """The moment ceiling ``E[θ_0^{2p}] <= (2p)!``."""
    return float(special.factorial(2 * p))
