"""Named verification suites.

Each experiment returns an ``ExperimentReport`` whose rows compare an
estimate with a reference value. Every reference carries a provenance tag
from ``PROVENANCE``; a row's verdict is one of

* ``pass`` / ``fail`` - a gated comparison,
* ``inconclusive`` - a gated Monte Carlo comparison whose effective sample
  size is below ``MIN_ESS`` (under-mixed chains are flagged, not failed),
* ``recorded`` - reported for information, not gated.

A report passes iff no row failed. Reports are deterministic for fixed
(seed, parameters); wall-clock time is kept out of the serialized report.
"""

import platform
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy
from scipy import optimize, stats

from . import __version__
from . import analysis as an
from . import samplers as sm
from .greens import (massive_green, zd_green, zd_green_series, zero_average_green,
                     zero_average_green_at)
from .lattice import TorusLattice
from .mass import ModelParams, Regime, beta_c, solve_torus_mass, solve_zd_mass
from .spectral import (build_spectrum, diagonalization_error, eigenvalue_grid,
                       orthonormality_error)

MIN_ESS = 200
SIGMA_GATE = 4.0

PROVENANCE = {
    "exact-identity": "algebraic identity evaluated in floating point",
    "enumeration": "direct enumeration of a small case",
    "spectral-sum": "finite sum over the torus spectrum",
    "quadrature": "Bessel-integral quadrature of the lattice Green's function",
    "walk-series": "random-walk return-probability series",
    "mass-solver": "root of the mass equation",
    "finite-volume-exact": "exact finite-volume expectation (characteristic function inversion)",
    "importance-sampling": "importance-sampling oracle on a tiny volume",
    "closed-form": "closed-form density or moment",
    "limit-law": "infinite-volume limit value derived from the Green's function",
    "frozen-constant": "constant fitted once on a first run and frozen in code",
    "trend": "monotonicity or scaling across sizes",
    "exploratory": "recorded only",
}


@dataclass
class Row:
    observable: str
    estimate: float
    std_error: float
    reference: float
    provenance: str
    gate: str
    verdict: str

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance tag {self.provenance!r}")


@dataclass
class ExperimentReport:
    experiment: str
    params: dict
    rows: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def passed(self):
        return all(r.verdict != "fail" for r in self.rows)

    @property
    def counts(self):
        out = {}
        for r in self.rows:
            out[r.verdict] = out.get(r.verdict, 0) + 1
        return out

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "params": self.params,
            "environment": self.environment,
            "passed": self.passed,
            "rows": [vars(r) for r in self.rows],
        }

    def to_text(self):
        lines = [f"== {self.experiment}: {'PASS' if self.passed else 'FAIL'} "
                 + " ".join(f"{k}={v}" for k, v in sorted(self.counts.items()))]
        w = max([len(r.observable) for r in self.rows] + [10])
        for r in self.rows:
            se = "" if r.std_error is None else f"± {r.std_error:.3g}"
            ref = "" if r.reference is None else f"{r.reference:.8g}"
            lines.append(f"  {r.verdict:<12} {r.observable:<{w}}  {_num(r.estimate):>14} {se:<12}"
                         f" ref {ref:<14} [{r.provenance}] {r.gate}")
        return "\n".join(lines) + "\n"

    def csv_rows(self):
        return [(r.observable, r.estimate, r.std_error, r.reference, r.provenance, r.gate, r.verdict)
                for r in self.rows]


CSV_COLUMNS = ["observable", "estimate", "std_error", "reference", "provenance", "gate", "verdict"]


def _num(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    return f"{x:.8g}"


def environment_fingerprint():
    import mpmath

    return {
        "torusgff": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "mpmath": mpmath.__version__,
        "machine": platform.machine(),
        "system": platform.system(),
    }


@dataclass
class RunConfig:
    seed: int = 1234
    threads: int = 1
    chains: int = None
    sweeps: int = None
    burnin: int = None

    def pick(self, name, default):
        v = getattr(self, name)
        return default if v is None else v


# ------------------------------------------------------------------ row helpers
def _f(x):
    return None if x is None else float(x)


def sigma_row(obs, est, se, ref, prov, ess=None, k=SIGMA_GATE, extra_se=0.0):
    """|est - ref| <= k * combined standard error."""
    tot = float(np.hypot(se, extra_se))
    ok = abs(est - ref) <= k * tot
    verdict = "pass" if ok else "fail"
    if ess is not None and ess < MIN_ESS:
        verdict = "inconclusive"
    return Row(obs, _f(est), _f(tot), _f(ref), prov, f"|est-ref| <= {k:g} sigma", verdict)


def abs_row(obs, est, ref, tol, prov, se=None):
    ok = abs(est - ref) <= tol
    return Row(obs, _f(est), _f(se), _f(ref), prov, f"|est-ref| <= {tol:g}", "pass" if ok else "fail")


def bound_row(obs, est, bound, prov, upper=True, strict=False, se=None):
    if upper:
        ok = est < bound if strict else est <= bound
        gate = f"est {'<' if strict else '<='} {bound:.8g}"
    else:
        ok = est > bound if strict else est >= bound
        gate = f"est {'>' if strict else '>='} {bound:.8g}"
    return Row(obs, _f(est), _f(se), _f(bound), prov, gate, "pass" if ok else "fail")


def bool_row(obs, ok, gate, prov, est=None, ref=None, se=None):
    return Row(obs, _f(est) if est is not None else float(bool(ok)), _f(se), _f(ref), prov, gate,
               "pass" if ok else "fail")


def rec_row(obs, est, prov="exploratory", ref=None, se=None, note="recorded"):
    return Row(obs, _f(est), _f(se), _f(ref), prov, note, "recorded")


def _stack(results, key):
    """Stack one record over chains, truncated to the shortest chain (chains
    with adaptive burn-in keep different numbers of sweeps)."""
    arrs = [r[2][key] for r in results]
    k = min(a.shape[0] for a in arrs)
    return np.stack([a[:k] for a in arrs])


def _iid_mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


# ------------------------------------------------------------------ 1. exact algebra
def exp_exact_algebra(cfg):
    rows = []
    cases = {(2, 2): [0, 4, 4, 8], (3, 2): [0, 4, 4, 4, 8, 8, 8, 12], (1, 3): [0, 3, 3]}
    for (d, n), expect in cases.items():
        got = np.sort(build_spectrum(TorusLattice(d, n)).eigenvalues)
        err = float(np.max(np.abs(got - np.array(expect, dtype=float))))
        rows.append(bound_row(f"spectrum multiset n={n} d={d} max error", err, 1e-12, "enumeration"))
    worst_o = worst_d = 0.0
    for d in (1, 2, 3):
        for n in range(2, 7):
            L = TorusLattice(d, n)
            worst_o = max(worst_o, orthonormality_error(L))
            worst_d = max(worst_d, diagonalization_error(L))
    rows.append(bound_row("max |Q^T Q - I|, n<=6, d<=3", worst_o, 1e-10, "exact-identity"))
    rows.append(bound_row("max |Q^T(-Lap)Q - diag(eta)|, n<=6, d<=3", worst_d, 1e-10, "exact-identity"))
    worst_t = worst_l = worst_z = 0.0
    for d, n, m2 in ((2, 2, 1.0), (3, 8, 1.0), (3, 8, 0.05), (2, 16, 0.3), (4, 6, 2.0), (3, 5, 0.7)):
        L = TorusLattice(d, n)
        G = massive_green(L, m2)
        tr = float(np.sum(1.0 / (m2 + eigenvalue_grid(L))))
        worst_t = max(worst_t, abs(tr - L.volume * G.value(0, 0)) / tr)
        row = G.row(0)
        lap = (2 * d + m2) * row[0] - sum(row[L.flat(y)] for y in L.neighbors(0))
        worst_l = max(worst_l, abs(lap - 1.0))
    for d, n in ((3, 4), (3, 8), (4, 6), (3, 7), (5, 4)):
        L = TorusLattice(d, n)
        worst_z = max(worst_z, abs(float(np.sum(zero_average_green(L).orbit))))
    rows.append(bound_row("trace identity relative error", worst_t, 1e-12, "spectral-sum"))
    rows.append(bound_row("(2d+m2)G(0,0) - sum_nbr G(0,y) - 1", worst_l, 1e-10, "exact-identity"))
    rows.append(bound_row("zero-average row sum", worst_z, 1e-10, "exact-identity"))
    L = TorusLattice(2, 2)
    G = massive_green(L, 1.0)
    rows.append(abs_row("n=2 d=2 m2=1 trace", G.trace, 1 + 2 / 5 + 1 / 9, 1e-12, "enumeration"))
    rows.append(abs_row("n=2 d=2 zero-average G(0,0)", zero_average_green(L).value(0, 0), 5 / 32, 1e-12,
                        "enumeration"))
    return ExperimentReport("exp_exact_algebra", {"tolerances": [1e-10, 1e-12]}, rows)


# ------------------------------------------------------------------ 2. beta_c
def exp_beta_c(cfg):
    rows = []
    q = zd_green(3, 0.0)
    s = zd_green_series(3, 0.0)
    rows.append(abs_row("beta_c(3): quadrature vs walk series", q, s, 1e-8, "walk-series"))
    rows.append(abs_row("beta_c(3) quadrature", q, 0.2527310098, 1e-6, "quadrature"))
    rows.append(abs_row("beta_c(3) walk series", s, 0.2527310098, 1e-6, "walk-series"))
    ge = zd_green(3, 0.0, (1, 0, 0))
    rows.append(abs_row("G_Z3(0,e) vs (6 beta_c - 1)/6", ge, (6 * q - 1) / 6, 1e-10, "exact-identity"))
    rows.append(abs_row("G_Z3,m2=0.5(0,e): quadrature vs series", zd_green(3, 0.5, (1, 0, 0)),
                        zd_green_series(3, 0.5, (1, 0, 0)), 1e-8, "walk-series"))
    for d in (4, 5):
        rows.append(rec_row(f"beta_c({d})", zd_green(d, 0.0), "quadrature"))
    return ExperimentReport("exp_beta_c", {"d": 3}, rows)


# ------------------------------------------------------------------ 3. mass solver
def exp_mass_solver(cfg):
    rows = []
    worst = 0.0
    for beta in (0.1, 0.2, 0.25, 0.3, 0.5):
        for n in (4, 8, 16, 32):
            sol = solve_torus_mass(TorusLattice(3, n), beta)
            worst = max(worst, sol.residual / max(1.0, beta))
    rows.append(bound_row("max residual / max(1, beta) on 20-point grid", worst, 1e-12, "mass-solver"))
    L = TorusLattice(2, 2)
    b = massive_green(L, 1.0).value(0, 0)
    rows.append(abs_row("constructed fixed point n=2 d=2 -> m2", solve_torus_mass(L, b).m_squared, 1.0,
                        1e-10, "exact-identity"))
    bc = beta_c(3)
    for n in (8, 16, 32):
        m2 = solve_torus_mass(TorusLattice(3, n), 0.5).m_squared
        val = m2 * (0.5 - bc) * n**3
        if n == 32:
            rows.append(abs_row("m2 (beta - beta_c) n^3 at n=32, beta=0.5", val, 1.0, 0.1, "limit-law"))
        else:
            rows.append(rec_row(f"m2 (beta - beta_c) n^3 at n={n}, beta=0.5", val, "limit-law", 1.0))
    minf = solve_zd_mass(3, 0.2)
    gaps = [abs(solve_torus_mass(TorusLattice(3, n), 0.2).m_squared - minf) for n in (8, 16, 32)]
    rows.append(bool_row("|m2(n) - m2(Z3)| decreasing, beta=0.2", gaps[0] > gaps[1] > gaps[2],
                         "strictly decreasing over n=8,16,32", "trend", est=gaps[-1]))
    ms = [solve_torus_mass(TorusLattice(3, 16), b).m_squared for b in np.linspace(0.05, 1.0, 20)]
    rows.append(bool_row("m2 strictly decreasing in beta (n=16)", bool(np.all(np.diff(ms) < 0)),
                         "strictly decreasing", "trend"))
    for n in (8, 16, 32):
        rows.append(rec_row(f"critical m2 n^2 at n={n}", solve_torus_mass(TorusLattice(3, n), bc).m_squared * n**2,
                            "trend"))
    rows.append(abs_row("forward check G_Z3,m2(0,0) at solve_zd_mass(3, 0.1)", zd_green(3, solve_zd_mass(3, 0.1)),
                        0.1, 1e-10, "quadrature"))
    return ExperimentReport("exp_mass_solver", {"grid_beta": [0.1, 0.2, 0.25, 0.3, 0.5],
                                                "grid_n": [4, 8, 16, 32]}, rows)


# ------------------------------------------------------------------ 4. sampler exactness
def _cov_rows(label, f, G, L, prov):
    """Rows comparing Var(f_0) and Cov(f_0, f_e) of a sample stack with G."""
    e = L.flat((1,) + (0,) * (L.dim - 1))
    rows = []
    for name, a, b in (("Var", 0, 0), ("Cov(0,e)", 0, e)):
        prod = f[:, a, 0] * f[:, b, 0]
        m, se = _iid_mean_se(prod)
        rows.append(sigma_row(f"{label} {name}", m, se, G.value(0, b), prov))
    return rows


def exp_sampler_exactness(cfg):
    rows = []
    seed = cfg.seed
    L = TorusLattice(3, 8)
    count = 10_000
    f = sm.massive_gff_batch(L, 1.0, count, seed, components=3)
    rows += _cov_rows("massive GFF n=8 m2=1", f, massive_green(L, 1.0), L, "spectral-sum")
    m, se = _iid_mean_se(f[:, 0, 0] * f[:, 0, 1])
    rows.append(sigma_row("massive GFF cross-component Cov", m, se, 0.0, "exact-identity"))
    g = sm.zero_avg_gff_batch(L, count, seed)
    rows += _cov_rows("zero-average GFF n=8", g, zero_average_green(L), L, "spectral-sum")
    rows.append(bound_row("zero-average |sum_x gamma_x| / sqrt(V)",
                          float(np.max(np.abs(g[:, :, 0].sum(axis=1)))) / np.sqrt(L.volume), 1e-9,
                          "exact-identity"))
    # spherical Gibbs against the importance-sampling oracle on n=2, d=2
    chains = cfg.pick("chains", 8)
    Lt = TorusLattice(2, 2)
    e = Lt.flat((1, 0))
    for beta in (0.6, 0.0):
        p = ModelParams(Lt, beta)
        oracle = sm.spherical_exact_tiny(p, 1_000_000, seed)
        res = sm.map_ordered(lambda c: sm.run_spherical_chain(Lt, beta, 20_000, 1000, seed, c,
                                                              probe_sites=(0, e)), range(chains), cfg.threads)
        th = _stack(res, "theta")
        obs = {"theta0": th[:, :, 0], "theta0^2": th[:, :, 0] ** 2, "theta0*theta_e": th[:, :, 0] * th[:, :, 1],
               "theta0^4": th[:, :, 0] ** 4}
        for k, series in obs.items():
            mu, se, ess = sm.chain_mean_se(series)
            ref, rse = oracle[k]
            rows.append(sigma_row(f"spherical n=2 d=2 beta={beta} {k} vs oracle", mu, se, ref,
                                  "importance-sampling", ess, extra_se=rse))
        mu, se, ess = sm.chain_mean_se(obs["theta0^2"])
        rows.append(sigma_row(f"spherical n=2 d=2 beta={beta} E[theta0^2]", mu, se, 1.0, "exact-identity", ess))
        mu, se, ess = sm.chain_mean_se(obs["theta0^4"])
        rows.append(bound_row(f"spherical n=2 d=2 beta={beta} E[theta0^4] - 4 sigma", mu - 4 * se,
                              an.even_moment_bound(2), "closed-form", se=se))
        if beta == 0.0:
            V = Lt.volume
            rows.append(sigma_row("spherical beta=0 E[theta0^4] vs 3V/(V+2)", mu, se, 3 * V / (V + 2),
                                  "closed-form", ess))
        rej = sm.spherical_rejection_exact(p, 200_000, seed)
        m, se2 = _iid_mean_se(rej[:, 0] * rej[:, e])
        rows.append(sigma_row(f"rejection sampler beta={beta} theta0*theta_e vs oracle", m, se2,
                              oracle["theta0*theta_e"][0], "importance-sampling",
                              extra_se=oracle["theta0*theta_e"][1]))
        rows.append(rec_row(f"oracle ESS beta={beta}", oracle["ess"]))
    # a mid-size chain: constraint and the moment bound
    L4 = TorusLattice(3, 4)
    res = sm.map_ordered(lambda c: sm.run_spherical_chain(L4, 0.5, 5000, 500, seed, c, probe_sites=(0,)),
                         range(chains), cfg.threads)
    th = _stack(res, "theta")[:, :, 0]
    mu, se, ess = sm.chain_mean_se(th**2)
    rows.append(sigma_row("spherical n=4 d=3 beta=0.5 E[theta0^2]", mu, se, 1.0, "exact-identity", ess))
    mu4, se4, _ = sm.chain_mean_se(th**4)
    rows.append(bound_row("spherical n=4 d=3 beta=0.5 E[theta0^4] - 4 sigma", mu4 - 4 * se4,
                          an.even_moment_bound(2), "closed-form", se=se4))
    drift = max(r[1].max_norm_drift for r in res)
    rows.append(bound_row("spherical norm drift per sweep (relative)", drift, 1e-8, "exact-identity"))
    return ExperimentReport("exp_sampler_exactness", {"n": 8, "d": 3, "samples": count, "chains": chains,
                                                      "seed": seed}, rows)


# ------------------------------------------------------------------ 5. spherical regimes
def regime_references(beta):
    bc = beta_c(3)
    reg = ModelParams(TorusLattice(3, 16), beta).regime
    if reg == Regime.HIGH_T:
        m2 = solve_zd_mass(3, beta)
        return reg, ((6 + m2) * beta - 1) / (6 * beta)
    ge = (6 * bc - 1) / 6
    if reg == Regime.CRITICAL:
        return reg, ge / bc
    return reg, (ge + beta - bc) / beta


def exp_spherical_regimes(cfg, n=16):
    bc = beta_c(3)
    chains = cfg.pick("chains", 8)
    sweeps = cfg.pick("sweeps", 20_000)
    L = TorusLattice(3, n)
    e = L.flat((1, 0, 0))
    rows = []
    for label, beta in (("HighT", 0.2), ("Critical", bc), ("LowT", 0.5)):
        reg, ref = regime_references(beta)
        res = sm.map_ordered(lambda c: sm.run_spherical_chain(L, beta, sweeps, cfg.burnin, cfg.seed,
                                                              1000 * _regime_index(label) + c,
                                                              probe_sites=(0, e)), range(chains), cfg.threads)
        th = _stack(res, "theta")
        pair = th[:, :, 0] * th[:, :, 1]
        mu, se, ess = sm.chain_mean_se(pair)
        rows.append(sigma_row(f"{reg.value} beta={beta:.6g} Cov(theta_0,theta_e)", mu, se, ref, "limit-law", ess))
        v, vse, vess = sm.chain_mean_se(th[:, :, 0] ** 2)
        rows.append(sigma_row(f"{reg.value} Var(theta_0)", v, vse, 1.0, "exact-identity", vess))
        nb = _stack(res, "nbr_avg")
        a, ase, aess = sm.chain_mean_se(nb)
        exact = an.spherical_exact_moments(L, beta)
        rows.append(sigma_row(f"{reg.value} site-averaged neighbor covariance vs finite volume", a, ase,
                              exact["neighbor_cov"], "finite-volume-exact", aess))
        rows.append(rec_row(f"{reg.value} site-averaged neighbor covariance vs limit", a, "limit-law", ref, ase))
        mag = _stack(res, "mag")
        m2, m2se, _ = sm.chain_mean_se(mag**2)
        rows.append(rec_row(f"{reg.value} E[mbar^2]", m2, "finite-volume-exact", exact["mag_sq"], m2se))
        rows.append(rec_row(f"{reg.value} min chain tau_int(low modes)", min(r[1].tau_int for r in res)))
        rows.append(rec_row(f"{reg.value} max chain tau_int(low modes)", max(r[1].tau_int for r in res)))
        rows.append(rec_row(f"{reg.value} burn-in (first chain)", res[0][1].burn_in))
        rows.append(rec_row(f"{reg.value} total ESS (pair observable)", ess))
    return ExperimentReport("exp_spherical_regimes", {"d": 3, "n": n, "betas": [0.2, bc, 0.5],
                                                      "chains": chains, "sweeps": sweeps,
                                                      "burn_in": cfg.burnin or "adaptive", "seed": cfg.seed},
                            rows)


def _regime_index(label):
    return {"HighT": 0, "Critical": 1, "LowT": 2}[label]


# ------------------------------------------------------------------ 6. zero mode
@lru_cache(maxsize=None)
def _spin_runs(n, beta, N, chains, sweeps, burn_in, seed, threads, components):
    L = TorusLattice(3, n)
    offs = [(0, (0, 0, 0)), (0, (1, 0, 0)), (0, (2, 0, 0))]
    return tuple(sm.map_ordered(
        lambda c: sm.run_spin_chain(L, beta, N, sweeps, burn_in, seed, c, components=components,
                                    pair_offsets=offs),
        range(chains), threads))


def _thinned(series_by_chain, tau):
    step = max(1, int(np.ceil(2.0 * tau)))
    return np.concatenate([s[::step] for s in series_by_chain])


def exp_zero_mode(cfg, n=8, beta=0.5, N=64):
    bc = beta_c(3)
    chains = cfg.pick("chains", 8)
    sweeps = cfg.pick("sweeps", 6000)
    L = TorusLattice(3, n)
    ref = float(np.sqrt((beta - bc) / beta))
    rows = []
    res = sm.map_ordered(lambda c: sm.run_spherical_chain(L, beta, sweeps, cfg.burnin, cfg.seed, 5000 + c),
                         range(chains), cfg.threads)
    mag = _stack(res, "mag")
    a, ase, ess = sm.chain_mean_se(np.abs(mag))
    row = abs_row("spherical mean |mbar|", a, ref, 0.05, "limit-law", se=ase)
    if ess < MIN_ESS:
        row.verdict = "inconclusive"
    rows.append(row)
    dip = float(np.mean(np.abs(mag) < 0.5 * ref))
    rows.append(bound_row("spherical dip proxy P(|mbar| < ref/2)", dip, 0.05, "limit-law", strict=True))
    pos = (mag > 0).astype(float)
    p, pse, pess = sm.chain_mean_se(pos)
    rows.append(rec_row("spherical P(mbar > 0)", p, "limit-law", 0.5, pse))
    exact = an.spherical_exact_moments(L, beta)
    m2, m2se, m2ess = sm.chain_mean_se(mag**2)
    rows.append(sigma_row("spherical E[mbar^2] vs finite volume", m2, m2se, exact["mag_sq"],
                          "finite-volume-exact", m2ess))
    # spin O(N), one component of the magnetization
    spin_sweeps = cfg.pick("sweeps", 12000)
    runs = _spin_runs(n, beta, N, chains, spin_sweeps, 500, cfg.seed, cfg.threads, 1)
    m1 = np.stack([r[2]["mag"][:, 0] for r in runs])
    v, vse, vess = sm.chain_mean_se(m1**2)
    ratio = v * beta / (beta - bc)
    row = abs_row(f"spin N={N} Var(mbar^1) beta/(beta-beta_c)", ratio, 1.0, 0.15, "limit-law",
                  se=vse * beta / (beta - bc))
    if vess < MIN_ESS:
        row.verdict = "inconclusive"
    rows.append(row)
    m2n = solve_torus_mass(L, beta).m_squared
    rows.append(rec_row(f"spin N={N} Var(mbar^1) V m_n^2 beta (finite-volume Gaussian = 1)",
                        v * L.volume * m2n * beta, "mass-solver", 1.0, vse * L.volume * m2n * beta))
    tau = max(sm.integrated_autocorr_time(s) for s in m1)
    x = _thinned(m1, tau)
    z = x / np.sqrt(np.mean(x**2))
    ad = stats.anderson(z, dist="norm")
    crit = float(ad.critical_values[list(ad.significance_level).index(1.0)])
    rows.append(bound_row(f"spin N={N} Anderson-Darling statistic (thinned by 2 tau)", float(ad.statistic),
                          crit, "limit-law", strict=True))
    sdip = float(np.mean(np.abs(m1) < 0.5 * ref))
    rows.append(bound_row(f"spin N={N} dip proxy P(|mbar^1| < ref/2) (two-point proxy must fail)", sdip, 0.05,
                          "limit-law", upper=False))
    rows.append(rec_row(f"spin N={N} excess kurtosis of mbar^1", float(stats.kurtosis(x))))
    return ExperimentReport("exp_zero_mode", {"d": 3, "n": n, "beta": beta, "N": N, "M": 1, "chains": chains,
                                              "sweeps": sweeps, "seed": cfg.seed, "reference_abs_mbar": ref},
                            rows)


# ------------------------------------------------------------------ 7. Green asymptotics
GREEN_SIZES = {3: (8, 16, 32, 64), 4: (8, 16, 32), 5: (8, 16, 32)}
# bounds on n^{d-2} |G0avg(0,y) - G_Zd(0,y)| fitted on a first run (largest
# observed value times 1.25, rounded up) and frozen
GREEN_BOUNDS = {3: 0.29, 4: 0.18, 5: 0.14}
# band for n (G0avg(0,0) - beta_c) in d = 3 (first-run values -0.2250 to
# -0.2258), frozen with roughly 10% slack on either side
D3_DIAGONAL_BAND = (-0.25, -0.20)


def _green_points(d, n):
    pts = {"0": (0,) * d, "e": (1,) + (0,) * (d - 1), "(1,1,0..)": (1, 1) + (0,) * (d - 2),
           "(2,1,0..)": (2, 1) + (0,) * (d - 2), "corner": (n // 2,) * d}
    return pts


def _zero_avg_values(L, pts):
    if L.volume <= 2**21:
        G = zero_average_green(L)
        return [G.value(0, tuple(p % L.side for p in y)) for y in pts]
    return list(zero_average_green_at(L, pts))


def exp_green_asymptotics(cfg):
    rows = []
    bc = beta_c(3)
    table = {}
    for d, sizes in GREEN_SIZES.items():
        worst = 0.0
        for n in sizes:
            L = TorusLattice(d, n)
            pts = _green_points(d, n)
            g0 = _zero_avg_values(L, list(pts.values()))
            for (name, y), g in zip(pts.items(), g0):
                zd = zd_green(d, 0.0, y)
                scaled = n ** (d - 2) * (g - zd)
                table[(d, n, name)] = scaled
                worst = max(worst, abs(scaled))
                rows.append(rec_row(f"d={d} n={n} y={name} n^(d-2)(G0avg - G_Zd)", scaled, "quadrature"))
                if name == "corner":
                    rows.append(rec_row(f"d={d} n={n} corner n^(d-2) G0avg", n ** (d - 2) * g, "spectral-sum"))
        rows.append(bound_row(f"d={d} max n^(d-2)|G0avg - G_Zd|", worst, GREEN_BOUNDS[d], "frozen-constant"))
    for n in GREEN_SIZES[3]:
        v = table[(3, n, "0")]
        rows.append(bound_row(f"d=3 n={n} n(G0avg(0,0) - beta_c) < 0", v, 0.0, "quadrature", strict=True))
        lo, hi = D3_DIAGONAL_BAND
        rows.append(Row(f"d=3 n={n} n(G0avg(0,0) - beta_c) in band", v, None, None, "frozen-constant",
                        f"{lo} <= est <= {hi}", "pass" if lo <= v <= hi else "fail"))
    rows.append(rec_row("beta_c(3)", bc, "quadrature"))
    return ExperimentReport("exp_green_asymptotics", {"sizes": {str(k): v for k, v in GREEN_SIZES.items()},
                                                      "bounds": {str(k): v for k, v in GREEN_BOUNDS.items()},
                                                      "d3_band": list(D3_DIAGONAL_BAND)}, rows)


# ------------------------------------------------------------------ 8. boundary constant
C_STAR = (1 - 0.04 * np.pi + 4 * np.pi * np.log(1.5) + np.pi / np.e) / (2 * np.pi) ** 2
C_CEILING = 3 ** (2 / 3) / (2 * (4 * np.pi) ** (2 / 3))


def exp_boundary_constant(cfg, sizes=(8, 16, 32, 64)):
    rows = [rec_row("c_* formula value", C_STAR, "closed-form"),
            rec_row("ceiling 3^(2/3) / (2 (4 pi)^(2/3))", C_CEILING, "closed-form")]
    for n in sizes:
        L = TorusLattice(3, n)
        G = zero_average_green(L)
        val = float(n * np.max(G.orbit[L.box_boundary()]))
        rows.append(bound_row(f"n={n} max over box boundary of n G0avg(0,y)", val, C_STAR, "closed-form"))
        rows.append(bound_row(f"n={n} same, against the ceiling", val, C_CEILING, "closed-form", strict=True))
        rows.append(rec_row(f"n={n} margin to the ceiling", C_CEILING - val, "closed-form"))
        rows.append(rec_row(f"n={n} boundary maximum <= 0 (expected optimal constant)", float(val <= 0.0),
                            "exploratory", note="recorded, not gated"))
    return ExperimentReport("exp_boundary_constant", {"d": 3, "sizes": list(sizes)}, rows)


# ------------------------------------------------------------------ spin O(N) at finite N
def exp_spin_on_finite_N(cfg, n=8, beta=0.2, Ns=(16, 64)):
    chains = cfg.pick("chains", 8)
    sweeps = cfg.pick("sweeps", 5000)
    L = TorusLattice(3, n)
    m2 = solve_torus_mass(L, beta).m_squared
    G = massive_green(L, m2)
    offs = [(0, 0, 0), (1, 0, 0), (2, 0, 0)]
    refs = [G.value(0, y) / beta for y in offs]
    rows = [rec_row("torus mass m_n^2", m2, "mass-solver")]
    devs, ses = [], []
    for N in Ns:
        runs = _spin_runs(n, beta, N, chains, sweeps, 200, cfg.seed, cfg.threads, 2)
        p1 = _stack(runs, "pair1")  # chains, sweeps, offsets
        dev = 0.0
        dse = 0.0
        for k, (y, ref) in enumerate(zip(offs, refs)):
            mu, se, ess = sm.chain_mean_se(p1[:, :, k])
            if abs(mu - ref) > dev:
                dev, dse = abs(mu - ref), se
            if N == Ns[-1]:
                rows.append(sigma_row(f"N={N} Cov(S1_0, S1_{y}) vs G_torus(0,y)/beta", mu, se, ref,
                                      "mass-solver", ess))
            else:
                rows.append(rec_row(f"N={N} Cov(S1_0, S1_{y})", mu, "mass-solver", ref, se))
        devs.append(dev)
        ses.append(dse)
        rows.append(rec_row(f"N={N} max deviation over U", dev, "mass-solver", 0.0, dse))
        cross = _stack(runs, "cross")
        mu, se, ess = sm.chain_mean_se(cross)
        rows.append(sigma_row(f"N={N} cross-component covariance", mu, se, 0.0, "exact-identity", ess))
        pa = _stack(runs, "pair_avg")
        for k, (y, ref) in enumerate(zip(offs, refs)):
            mu, se, _ = sm.chain_mean_se(pa[:, :, k])
            rows.append(rec_row(f"N={N} component-averaged Cov(S_0, S_{y})", mu, "mass-solver", ref, se))
        rows.append(rec_row(f"N={N} max spin norm drift", max(r[1].max_norm_drift for r in runs)))
    rows.append(bool_row("max deviation decreasing in N", all(a > b for a, b in zip(devs, devs[1:])),
                         "dev(N) strictly decreasing", "trend", est=devs[-1] / devs[0] if devs[0] else 0.0))
    # reversed order of limits: fixed N, growing n (exploratory)
    for nn in (4, 8):
        rr = _spin_runs(nn, beta, Ns[0], 2, 2000, 200, cfg.seed, cfg.threads, 1)
        p1 = np.stack([r[2]["pair1"][:, 1] for r in rr])
        mu, se, _ = sm.chain_mean_se(p1)
        rows.append(rec_row(f"reversed order: N={Ns[0]} n={nn} Cov(S1_0,S1_e)", mu, "limit-law",
                            regime_references(beta)[1], se, note="exploratory"))
    return ExperimentReport("exp_spin_on_finite_N", {"d": 3, "n": n, "beta": beta, "N": list(Ns), "M": 2,
                                                     "chains": chains, "sweeps": sweeps, "seed": cfg.seed}, rows)


def exp_energy_consistency(cfg, n=8, beta=0.2, N=64):
    """Mean energy per site, spherical vs spin O(N) at high temperature."""
    chains = cfg.pick("chains", 8)
    sweeps = cfg.pick("sweeps", 5000)
    L = TorusLattice(3, n)
    runs = _spin_runs(n, beta, N, chains, sweeps, 200, cfg.seed, cfg.threads, 2)
    es = _stack(runs, "energy")
    s_mu, s_se, s_ess = sm.chain_mean_se(es)
    res = sm.map_ordered(lambda c: sm.run_spherical_chain(L, beta, sweeps, cfg.burnin, cfg.seed, 7000 + c),
                         range(chains), cfg.threads)
    en = _stack(res, "energy")
    p_mu, p_se, p_ess = sm.chain_mean_se(en)
    rows = [sigma_row(f"energy per site: spin N={N} vs spherical", s_mu, s_se, p_mu, "finite-volume-exact",
                      min(s_ess, p_ess), extra_se=p_se)]
    exact = 2 * L.dim * an.spherical_exact_moments(L, beta)["neighbor_cov"]
    rows.append(sigma_row("spherical energy per site vs finite volume", p_mu, p_se, exact,
                          "finite-volume-exact", p_ess))
    m2 = solve_torus_mass(L, beta).m_squared
    gauss = 2 * L.dim * massive_green(L, m2).value(0, (1, 0, 0)) / beta
    rows.append(rec_row("Gaussian (N -> infinity) energy per site", gauss, "mass-solver"))
    rows.append(rec_row(f"spin N={N} energy per site", s_mu, "mass-solver", gauss, s_se))
    return ExperimentReport("exp_energy_consistency", {"d": 3, "n": n, "beta": beta, "N": N, "chains": chains,
                                                       "sweeps": sweeps, "seed": cfg.seed}, rows)


# ------------------------------------------------------------------ concentration
def _tilted_tail(vals, mult, threshold, upper, samples, gen):
    """Exponentially tilted importance sampling estimate of
    P[Σ λ χ²_m > threshold] (or < threshold): under the tilt exp(θX) each
    χ²_m term is scaled by 1/(1-2θλ)."""
    def tilted_mean(th):
        return float(np.sum(mult * vals / (1.0 - 2.0 * th * vals)))

    hi = (1.0 - 1e-12) / (2.0 * vals.max())
    lo = -1.0
    while tilted_mean(lo) > threshold:
        lo *= 2.0
    th = optimize.brentq(lambda t: tilted_mean(t) - threshold, lo, hi, xtol=1e-15, maxiter=500)
    scale = 1.0 / (1.0 - 2.0 * th * vals)
    x = np.zeros(samples)
    for v, m, s in zip(vals, mult, scale):
        x += v * s * gen.chisquare(m, size=samples)
    logm = -0.5 * np.sum(mult * np.log(1.0 - 2.0 * th * vals))
    hit = x > threshold if upper else x < threshold
    lw = -th * x + logm
    w = np.where(hit, np.exp(lw), 0.0)
    p = float(w.mean())
    se = float(w.std(ddof=1) / np.sqrt(samples))
    return p, se


def exp_concentration(cfg, sizes=(8, 12, 16), t=0.2, samples=1_000_000, is_samples=200_000):
    rows = []
    bc = beta_c(3)
    freq_up, log_is_up, log_is_lo, sds = [], [], [], []
    for n in sizes:
        L = TorusLattice(3, n)
        V = L.volume
        ev, mult = np.unique(eigenvalue_grid(L), return_counts=True)
        vals, mult = 1.0 / ev[1:], mult[1:]
        mean = float(np.sum(mult * vals))
        var = float(2.0 * np.sum(mult * vals**2))
        s = an.sample_zero_avg_norms(L, samples, cfg.seed, tag=f"concentration-{n}")
        Sn = (s - mean) / V
        m, se = _iid_mean_se(s / V)
        rows.append(sigma_row(f"n={n} E[|gamma|^2/n^3]", m, se, mean / V, "spectral-sum"))
        rows.append(rec_row(f"n={n} E[|gamma|^2/n^3] vs beta_c", m, "quadrature", bc, se))
        v_est = float(s.var(ddof=1))
        rows.append(sigma_row(f"n={n} Var|gamma|^2", v_est, an._var_se(s), var, "spectral-sum"))
        sds.append(float(np.std(s / V)))
        up = float(np.mean(Sn > t))
        lo = float(np.mean(Sn < -t))
        freq_up.append(up)
        rows.append(rec_row(f"n={n} MC frequency P(S_n > {t})", up, "exploratory",
                            note="censored" if up == 0 else "recorded"))
        rows.append(rec_row(f"n={n} MC frequency P(S_n < -{t})", lo, "exploratory",
                            note="censored" if lo == 0 else "recorded"))
        gen = sm.rngmod.stream(cfg.seed, "concentration-tilt", n)
        pu, pus = _tilted_tail(vals, mult, mean + t * V, True, is_samples, gen)
        rows.append(rec_row(f"n={n} tilted IS P(S_n > {t})", pu, "exploratory", se=pus))
        log_is_up.append(np.log(pu) if pu > 0 else -np.inf)
        if mean - t * V > 0:
            pl, pls = _tilted_tail(vals, mult, mean - t * V, False, is_samples, gen)
            rows.append(rec_row(f"n={n} tilted IS P(S_n < -{t})", pl, "exploratory", se=pls))
            log_is_lo.append(np.log(pl) if pl > 0 else -np.inf)
        rows.append(rec_row(f"n={n} skewness of S_n", float(stats.skew(Sn))))
    rows.append(bool_row("sample std of |gamma|^2/n^3 decreasing in n", all(a > b for a, b in zip(sds, sds[1:])),
                         "strictly decreasing", "trend", est=sds[-1]))
    fu = np.array(freq_up)
    if fu[-1] == 0:
        rows.append(Row("MC log-frequency of S_n > t decreasing in n", 0.0, None, None, "trend",
                        "censored at the largest n: satisfied vacuously", "pass"))
    else:
        lf = np.log(fu)
        ok = bool(np.all(np.diff(lf) < 0))
        rows.append(bool_row("MC log-frequency of S_n > t decreasing in n", ok, "strictly decreasing", "trend"))
    lu = np.array(log_is_up)
    slope = float(np.polyfit(np.array(sizes, dtype=float), lu, 1)[0])
    rows.append(bool_row("tilted IS log P(S_n > t): decreasing, negative slope in n",
                         bool(np.all(np.diff(lu) < 0) and slope < 0), "strictly decreasing, slope < 0", "trend",
                         est=slope))
    for n, a in zip(sizes, lu):
        rows.append(rec_row(f"n={n} -log P(S_n > t) / n", -a / n, "exploratory"))
    return ExperimentReport("exp_concentration", {"d": 3, "sizes": list(sizes), "t": t, "samples": samples,
                                                  "is_samples": is_samples, "seed": cfg.seed}, rows)


# ------------------------------------------------------------------ local CLT
CLT_CASES = {5: (4, 6, 8), 4: (4, 8, 16), 3: (8, 16, 32)}
D3_FLOOR = 0.05
SANITY_TOL = 0.02


def exp_local_clt(cfg, samples=1_000_000, sanity_samples=100_000):
    rows = []
    floor_x = sm.rngmod.stream(cfg.seed, "kde-floor", 0).standard_normal(samples)
    floor = an.density_diagnostic(floor_x, stats.norm.pdf).sup_distance
    rows.append(rec_row(f"KDE statistical floor (normal draws, {samples})", floor))
    sup = {}
    for d, sizes in CLT_CASES.items():
        for n in sizes:
            ev = eigenvalue_grid(TorusLattice(d, n))[1:]
            D = an.local_clt_diagnostic(1.0 / ev, samples, cfg.seed, label=f"d={d} n={n}")
            sup[(d, n)] = D.sup_distance
            rows.append(rec_row(f"d={d} n={n} KDE sup distance", D.sup_distance, "closed-form"))
            rows.append(rec_row(f"d={d} n={n} KDE integral on grid", D.integral, "exact-identity", 1.0))
            rows.append(rec_row(f"d={d} n={n} Lindeberg ratio eps=0.1", D.lindeberg_ratio, "spectral-sum"))
            c = D.conditions
            rows.append(rec_row(f"d={d} n={n} conditions (a,b,c) hold", 4 * c["a_holds"] + 2 * c["b_holds"]
                                + c["c_holds"], "spectral-sum", note="bitmask a=4 b=2 c=1"))
            if d != 4 and n <= 16:
                exact = an.weighted_chisq_density(1.0 / ev, an.GRID)
                rows.append(rec_row(f"d={d} n={n} exact sup distance (Fourier inversion)",
                                    float(np.max(np.abs(exact - stats.norm.pdf(an.GRID)))), "spectral-sum"))
            if d == 3:
                rows.append(bound_row(f"d=3 n={n} sup distance >= {D3_FLOOR}", D.sup_distance, D3_FLOOR,
                                      "closed-form", upper=False))
    s5 = [sup[(5, n)] for n in CLT_CASES[5]]
    rows.append(bool_row("d=5 sup distance decreasing over n", all(a > b for a, b in zip(s5, s5[1:])),
                         "strictly decreasing", "trend", est=s5[-1]))
    for d in (5, 4):
        for n in CLT_CASES[d]:
            if (d, 2 * n) in sup:
                a, b = sup[(d, n)], sup[(d, 2 * n)]
                rows.append(bool_row(f"d={d} n={n}->{2 * n} sup distance halves (or reaches the floor)",
                                     b <= max(0.5 * a, floor), "d(2n) <= max(d(n)/2, floor)", "trend",
                                     est=b / a))
    D = an.local_clt_diagnostic([1.0, 1.0], sanity_samples, cfg.seed, label="chi2_2", conditions=False)
    dist = float(np.max(np.abs(D.empirical_density - an.chisq2_closed_form(an.GRID))))
    rows.append(bound_row("lambda=1, two terms: sup distance to closed form", dist, SANITY_TOL, "closed-form"))
    sm_dist = float(np.max(np.abs(D.empirical_density - an.chisq2_smoothed(an.GRID, D.bandwidth))))
    rows.append(rec_row("lambda=1, two terms: sup distance to the kernel-smoothed closed form", sm_dist,
                        "closed-form"))
    # shifted array from the conditioned field (d=3, n=16, U={0}, y=1)
    rep = an.conditioned_covariance_spectrum(TorusLattice(3, 16), [(0, 0, 0)], y=[1.0])
    w, h = rep.shifted_array
    Dsh = an.local_clt_diagnostic(w, samples // 4, cfg.seed, shifts=h, label="shifted d=3 n=16")
    rows.append(rec_row("d=3 n=16 conditioned spectrum (y=1) KDE sup distance", Dsh.sup_distance, "closed-form"))
    return ExperimentReport("exp_local_clt", {"cases": {str(k): v for k, v in CLT_CASES.items()},
                                              "samples": samples, "sanity_samples": sanity_samples,
                                              "grid": [-4.0, 4.0, 321], "bandwidth": "silverman",
                                              "seed": cfg.seed}, rows)


# ------------------------------------------------------------------ registry
EXPERIMENTS = {
    "exp_exact_algebra": exp_exact_algebra,
    "exp_beta_c": exp_beta_c,
    "exp_mass_solver": exp_mass_solver,
    "exp_sampler_exactness": exp_sampler_exactness,
    "exp_spherical_regimes": exp_spherical_regimes,
    "exp_zero_mode": exp_zero_mode,
    "exp_green_asymptotics": exp_green_asymptotics,
    "exp_boundary_constant": exp_boundary_constant,
    "exp_spin_on_finite_N": exp_spin_on_finite_N,
    "exp_energy_consistency": exp_energy_consistency,
    "exp_concentration": exp_concentration,
    "exp_local_clt": exp_local_clt,
}


def run_experiment(name, cfg=None):
    if name not in EXPERIMENTS:
        raise KeyError(name)
    cfg = cfg or RunConfig()
    t0 = time.perf_counter()
    rep = EXPERIMENTS[name](cfg)
    rep.environment = environment_fingerprint()
    rep.params = dict(rep.params, threads_independent=True)
    rep.wall_clock = time.perf_counter() - t0
    return rep
