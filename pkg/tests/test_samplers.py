import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from torusgff import ConfigError, DomainError, ModelParams, TorusLattice, massive_green, zero_average_green
from torusgff.greens import hitting_distribution
from torusgff.samplers import (
    SpinONHeatBath,
    chain_mean_se,
    doubled_angle_vonmises,
    integrated_autocorr_time,
    map_ordered,
    massive_gff_batch,
    run_spherical_chain,
    run_spin_chain,
    sample_massive_gff,
    sample_spherical_gibbs,
    sample_spin_on_gibbs,
    sample_vmf,
    sample_zero_avg_gff,
    spherical_exact_tiny,
    spherical_rejection_exact,
    zero_avg_gff_batch,
)


def within(est, se, ref, k=4.0):
    return abs(est - ref) <= k * se


# ---------------------------------------------------------------- GFF
def test_massive_gff_variance_and_covariance():
    L = TorusLattice(3, 8)
    G = massive_green(L, 1.0)
    f = massive_gff_batch(L, 1.0, 10000, seed=5, components=3)
    x0, xe = f[:, 0, :], f[:, 1, :]
    v = x0[:, 0] ** 2
    assert within(v.mean(), v.std() / 100, G.value(0, 0))
    c = x0[:, 0] * xe[:, 0]
    assert within(c.mean(), c.std() / 100, G.value(0, 1))
    cross = x0[:, 0] * x0[:, 1]
    assert within(cross.mean(), cross.std() / 100, 0.0)


def test_zero_avg_gff_sums_and_variance():
    L = TorusLattice(3, 8)
    f = zero_avg_gff_batch(L, 10000, seed=6)[:, :, 0]
    assert np.max(np.abs(f.sum(1))) < 1e-9 * np.sqrt(L.volume)
    v = f[:, 0] ** 2
    assert within(v.mean(), v.std() / 100, zero_average_green(L).value(0, 0))
    s = sample_zero_avg_gff(L, seed=1)
    assert abs(s.values.sum()) < 1e-9 * np.sqrt(L.volume)
    assert s.law.value == "ZeroAvgGFF"


def test_zero_avg_norm_concentrates():
    sds = []
    for n in (8, 16):
        L = TorusLattice(3, n)
        f = zero_avg_gff_batch(L, 400, seed=7)[:, :, 0]
        sds.append(np.std((f ** 2).sum(1) / L.volume))
    assert sds[1] < sds[0]


def test_zero_avg_plus_constant():
    L = TorusLattice(3, 4)
    f = zero_avg_gff_batch(L, 20000, seed=8, constant_sd=0.5)[:, :, 0]
    m = f.mean(1)
    assert within(m.var(), m.var() * np.sqrt(2 / 20000), 0.25)


def test_sampler_determinism_and_errors():
    L = TorusLattice(2, 4)
    a = sample_massive_gff(L, 1.0, components=2, seed=3)
    b = sample_massive_gff(L, 1.0, components=2, seed=3)
    assert np.array_equal(a.values, b.values) and a.components == 2
    with pytest.raises(DomainError):
        sample_massive_gff(L, 0.0)


def test_domain_markov_property():
    # φ − h^{φ_K} off K is uncorrelated with φ on K
    L = TorusLattice(2, 6)
    K = [0, 8, 21]
    f = massive_gff_batch(L, 1.0, 40000, seed=9)[:, :, 0]
    P = hitting_distribution(L, [], 1.0, K)
    resid = f - f[:, K] @ P.T
    off = np.setdiff1d(np.arange(L.volume), K)
    worst = 0.0
    for x in off[::5]:
        for k in K:
            prod = resid[:, x] * f[:, k]
            worst = max(worst, abs(prod.mean()) / (prod.std() / np.sqrt(prod.size)))
    assert worst < 4.5  # max over 24 pairs


# ---------------------------------------------------------------- moves
def test_doubled_angle_vonmises_goodness_of_fit():
    gen = np.random.default_rng(10)
    beta, r2, deta = 0.8, 3.0, 2.5
    a = beta * r2 * deta / 4.0
    phi = doubled_angle_vonmises(gen, beta, np.full(100000, r2), np.full(100000, deta))
    edges = np.linspace(0, 2 * np.pi, 51)
    obs, _ = np.histogram(phi, edges)
    Z = integrate.quad(lambda t: np.exp(-a * np.cos(2 * t)), 0, 2 * np.pi)[0]
    exp = np.array([integrate.quad(lambda t: np.exp(-a * np.cos(2 * t)), lo, hi)[0]
                    for lo, hi in zip(edges[:-1], edges[1:])]) / Z * phi.size
    assert stats.chisquare(obs, exp).pvalue > 0.001


@pytest.mark.parametrize("p", [2, 3, 5, 64])
def test_vmf_mean_resultant(p):
    gen = np.random.default_rng(p)
    kappa = 2.5
    m = 40000
    mu = np.zeros((m, p))
    mu[:, 0] = 1.0
    x = sample_vmf(gen, mu, np.full(m, kappa))
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)
    w = x[:, 0]
    ref = special.ive(p / 2, kappa) / special.ive(p / 2 - 1, kappa)
    assert within(w.mean(), w.std() / np.sqrt(m), ref)


def test_vmf_angle_n3_inverse_cdf():
    gen = np.random.default_rng(33)
    kappa = 1.7
    m = 20000
    mu = np.tile([0.0, 0.0, 1.0], (m, 1))
    w = sample_vmf(gen, mu, np.full(m, kappa))[:, 2]
    cdf = lambda t: (np.exp(kappa * t) - np.exp(-kappa)) / (np.exp(kappa) - np.exp(-kappa))
    assert stats.kstest(w, cdf).pvalue > 0.001


# ---------------------------------------------------------------- spherical
def test_sphere_preserved_over_long_run():
    L = TorusLattice(3, 4)
    fs, diag, _ = run_spherical_chain(L, 0.5, 10000, 10, seed=1)
    assert diag.max_norm_drift < 1e-8
    assert np.sum(fs.values ** 2) == pytest.approx(L.volume, rel=1e-9)
    assert diag.tau_int >= 0.5 and diag.ess <= diag.sweeps


def test_spherical_burn_in_errors():
    p = ModelParams(TorusLattice(2, 2), 0.6)
    with pytest.raises(ConfigError):
        sample_spherical_gibbs(p, 10, 10, seed=0)
    with pytest.raises(ConfigError):
        sample_spin_on_gibbs(p, 3, 5, 8, seed=0)


def _chains(L, beta, chains, sweeps, seed=2):
    return [run_spherical_chain(L, beta, sweeps, 500, seed, chain=c, probe_sites=[0, 1])[2]
            for c in range(chains)]


def test_spherical_gibbs_matches_oracle_tiny():
    L = TorusLattice(2, 2)
    p = ModelParams(L, 0.6)
    ora = spherical_exact_tiny(p, 400000, seed=4)
    assert not ora["low_ess"]
    recs = _chains(L, 0.6, 4, 6000)
    th = np.stack([r["theta"] for r in recs])
    m, se, _ = chain_mean_se(th[:, :, 0] * th[:, :, 1])
    o, ose = ora["theta0*theta_e"]
    assert abs(m - o) <= 4 * np.hypot(se, ose)
    m2, se2, _ = chain_mean_se(th[:, :, 0] ** 2)
    assert within(m2, se2, 1.0)
    m1, se1, _ = chain_mean_se(th[:, :, 0])
    assert within(m1, se1, 0.0)
    assert within(ora["theta0"][0], ora["theta0"][1], 0.0)


def test_rejection_sampler_matches_oracle():
    L = TorusLattice(2, 2)
    p = ModelParams(L, 0.6)
    th = spherical_rejection_exact(p, 50000, seed=5)
    assert np.allclose((th ** 2).sum(1), L.volume)
    c = th[:, 0] * th[:, 1]
    ora = spherical_exact_tiny(p, 400000, seed=4)["theta0*theta_e"]
    assert abs(c.mean() - ora[0]) <= 4 * np.hypot(c.std() / np.sqrt(c.size), ora[1])


def test_beta_zero_is_uniform_sphere():
    L = TorusLattice(2, 2)
    V = L.volume
    recs = _chains(L, 0.0, 2, 10000)
    th = np.stack([r["theta"][:, 0] for r in recs])
    m4, se4, _ = chain_mean_se(th ** 4)
    assert within(m4, se4, 3 * V / (V + 2))
    ora = spherical_exact_tiny(ModelParams(L, 0.0), 1000, seed=0)
    assert ora["ess"] == pytest.approx(1000)


def test_exchangeability_across_sites():
    L = TorusLattice(3, 4)
    sites = np.random.default_rng(0).choice(L.volume, 5, replace=False).tolist()
    recs = [run_spherical_chain(L, 0.5, 4000, 200, 3, chain=c, probe_sites=sites)[2] for c in range(3)]
    th = np.stack([r["theta"] for r in recs])  # chains, samples, sites
    for power in (2, 4):
        ests = [chain_mean_se(th[:, :, i] ** power)[:2] for i in range(5)]
        for (a, sa) in ests:
            for (b, sb) in ests:
                assert abs(a - b) <= 4 * np.hypot(sa, sb)


def test_spherical_oracle_volume_limit():
    with pytest.raises(DomainError):
        spherical_exact_tiny(ModelParams(TorusLattice(2, 5), 0.5), 10, 0)


# ---------------------------------------------------------------- spin O(N)
def test_spin_norms_and_beta_zero():
    L = TorusLattice(2, 4)
    ch = SpinONHeatBath(L, 0.0, 5, np.random.default_rng(0))
    prods = []
    for _ in range(3000):
        ch.sweep()
        assert np.allclose((ch.S ** 2).sum(1), 5, rtol=1e-9)
        prods.append(ch.S[0] @ ch.S[1])
    prods = np.array(prods)
    assert within(prods.mean(), prods.std() / np.sqrt(prods.size), 0.0)


def test_spin_single_component_variance_is_one():
    L = TorusLattice(3, 4)
    fs, diag, rec = run_spin_chain(L, 0.2, 16, 2000, 200, seed=3, pair_offsets=[(0, 0)])
    m, se, _ = chain_mean_se(rec["pair"][:, 0][None])
    assert within(m, se, 1.0)
    assert diag.max_norm_drift < 1e-9
    fs2, _ = sample_spin_on_gibbs(ModelParams(L, 0.2), 16, 50, 10, seed=3, project_to=3)
    assert fs2.values.shape == (L.volume, 3)
    with pytest.raises(DomainError):
        sample_spin_on_gibbs(ModelParams(L, 0.2), 4, 50, 10, seed=3, project_to=5)


# ---------------------------------------------------------------- utilities
def test_autocorr_time_properties():
    gen = np.random.default_rng(1)
    assert integrated_autocorr_time(gen.normal(size=20000)) == pytest.approx(0.5, abs=0.1)
    x = np.zeros(50000)
    e = gen.normal(size=50000)
    for i in range(1, x.size):
        x[i] = 0.9 * x[i - 1] + e[i]
    assert integrated_autocorr_time(x) == pytest.approx(0.5 * 1.9 / 0.1, rel=0.15)
    assert integrated_autocorr_time(np.ones(100)) == 0.5


def test_map_ordered_thread_invariant():
    f = lambda c: run_spherical_chain(TorusLattice(2, 4), 0.4, 300, 50, 11, chain=c)[2]["energy"]
    a = map_ordered(f, range(4), threads=1)
    b = map_ordered(f, range(4), threads=4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    with pytest.raises(ConfigError):
        map_ordered(f, range(2), threads=0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.01, 20.0), st.floats(-8.0, 8.0), st.integers(0, 2**31))
def test_doubled_angle_range(beta, r2, deta, seed):
    phi = doubled_angle_vonmises(np.random.default_rng(seed), beta, np.full(64, r2), np.full(64, deta))
    assert np.all((phi >= 0) & (phi < 2 * np.pi))
