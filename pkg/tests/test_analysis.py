import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from torusgff import DomainError, ModelParams, TorusLattice, build_spectrum, zero_average_green
from torusgff import rng as rngmod
from torusgff.analysis import (
    GRID,
    chisq2_closed_form,
    chisq2_smoothed,
    conditioned_covariance_spectrum,
    density_diagnostic,
    estimate,
    interlacing_check,
    even_moment_bound,
    lindeberg_ratio,
    local_clt_diagnostic,
    moment_table,
    norm_statistics,
    sample_zero_avg_norms,
    spherical_exact_moments,
    structural_conditions,
    weighted_chisq_density,
    weighted_chisq_samples,
)
from torusgff.samplers import run_spherical_chain, spherical_exact_tiny


def inv_eta(n, d):
    eta = build_spectrum(TorusLattice(d, n)).eigenvalues
    return 1.0 / eta[eta > 0]


# ---------------------------------------------------------------- estimates
def test_split_half_standard_error_scaling():
    x = rngmod.stream(0, "split-half").normal(size=200000)
    full, half = estimate("x", x), estimate("x", x[:100000])
    assert half.std_error / full.std_error == pytest.approx(np.sqrt(2), rel=0.05)
    assert full.n_eff == 200000


# ---------------------------------------------------------------- exact oracle
def test_spherical_exact_moments_normalization_and_beta_zero():
    L = TorusLattice(3, 8)
    r = spherical_exact_moments(L, 0.5)
    assert abs(r["norm_check"] - 1) < 1e-10
    assert r["neighbor_cov"] == pytest.approx(0.6667775, abs=1e-6)
    assert r["mag_sq"] == pytest.approx(0.5494006, abs=1e-6)
    r0 = spherical_exact_moments(L, 0.0)
    assert np.all(r0["mode_second_moments"] == 1.0) and abs(r0["neighbor_cov"]) < 1e-15


def test_spherical_exact_moments_match_importance_oracle():
    L = TorusLattice(2, 2)
    r = spherical_exact_moments(L, 0.6)
    ora = spherical_exact_tiny(ModelParams(L, 0.6), 400000, seed=1)["theta0*theta_e"]
    assert abs(r["neighbor_cov"] - ora[0]) <= 4 * ora[1]


# ---------------------------------------------------------------- Schur spectrum
def test_empty_U_spectrum():
    L = TorusLattice(3, 4)
    rep = conditioned_covariance_spectrum(L, [])
    expect = np.sort(np.concatenate([[0.0], inv_eta(4, 3)]))[::-1]
    assert np.allclose(rep.mu, expect, atol=1e-14)
    assert rep.trace_power_ratios[3] == pytest.approx(1.0)


def test_schur_matches_dense_computation():
    L = TorusLattice(3, 4)
    U = [0, 21]
    G = zero_average_green(L).matrix()
    keep = np.setdiff1d(np.arange(L.volume), U)
    S = G[np.ix_(keep, keep)] - G[np.ix_(keep, U)] @ np.linalg.solve(G[np.ix_(U, U)], G[np.ix_(U, keep)])
    dense = np.sort(np.linalg.eigvalsh(S))[::-1]
    y = np.array([0.7, -0.3])
    rep = conditioned_covariance_spectrum(L, U, y=y)
    assert np.max(np.abs(rep.mu - dense)) < 1e-12
    nu = G[:, U] @ np.linalg.solve(G[np.ix_(U, U)], y)
    assert np.max(np.abs(rep.nu - nu)) < 1e-12
    ev, P = np.linalg.eigh(S)
    h = P.T @ nu[keep]
    assert rep.var_gamma_hat == pytest.approx(2 * np.sum(ev ** 2) + 4 * np.sum(h ** 2 * ev), rel=1e-10)


def test_upper_bound_n8_single_site():
    rep = conditioned_covariance_spectrum(TorusLattice(3, 8), [0])
    eta = rep.eta_sorted
    up = np.concatenate([1.0 / eta[1:], [0.0]])
    assert np.all(rep.mu <= up[:rep.mu.size] + 1e-12)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 7, 8])
def test_interlacing_exhaustive_small_tori(n):
    # all |U| <= 2 up to translation: U = {0} and U = {0, u}
    L = TorusLattice(3, n)
    for U in [[0]] + [[0, u] for u in range(1, L.volume)]:
        rep = conditioned_covariance_spectrum(L, U)
        assert rep.interlacing_ok, (U, rep.interlacing_violation)
        assert rep.min_mu >= -1e-10
        assert rep.mu.size == L.volume - len(U)
        assert all(0 < r <= 1 + 1e-12 for r in rep.trace_power_ratios.values())


def test_interlacing_check_detects_violation():
    eta = np.array([0.0, 1.0, 2.0, 4.0])
    ok, worst = interlacing_check(np.array([2.0, 0.5, 0.0]), eta, 1)
    assert not ok and worst == pytest.approx(1.0)


def test_T_n_increases_with_n():
    T = [conditioned_covariance_spectrum(TorusLattice(3, n), [0]).T_n_statistic for n in (8, 16, 32)]
    assert np.all(np.diff(T) > 0) and T[-1] < 1


def test_var_ratio_band_and_eta2_band():
    reps = {n: conditioned_covariance_spectrum(TorusLattice(3, n), [0], y=[1.0]) for n in (8, 16, 32)}
    dev = {n: n * abs(r.var_gamma_hat / r.var_gamma - 1) for n, r in reps.items()}
    C = max(dev.values())
    assert C < 1.0
    for n, r in reps.items():
        assert 1 - C / n <= r.var_gamma_hat / r.var_gamma <= 1 + C / n
    band = [r.eta2_sq_var_gamma for r in reps.values()]
    assert 25 < min(band) and max(band) < 45


def test_domain_errors():
    with pytest.raises(DomainError):
        conditioned_covariance_spectrum(TorusLattice(2, 4), [0])
    with pytest.raises(DomainError):
        weighted_chisq_samples([0.0, 0.0], 10, 0)
    with pytest.raises(DomainError):
        local_clt_diagnostic([1.0, 2.0], 100, 0)
    with pytest.raises(DomainError):
        norm_statistics(np.ones(50), 1.0, 1.0, 8, 3)


# ---------------------------------------------------------------- norm statistics
def test_norm_moments_match_spectral_sums():
    L = TorusLattice(3, 8)
    g = inv_eta(8, 3)
    s = sample_zero_avg_norms(L, 10000, seed=3)
    st_ = norm_statistics(s, g.sum(), 2 * np.sum(g ** 2), L.volume, 3)
    m = st_["norm"]
    assert abs(m.value - g.sum()) <= 4 * m.std_error
    v = st_["sample_var"]
    assert abs(v.value - 2 * np.sum(g ** 2)) <= 4 * v.std_error
    assert "anderson_darling" not in st_


def test_kurtosis_d5_matches_exact_and_shrinks():
    exact = {}
    for n in (4, 6):
        g = inv_eta(n, 5)
        exact[n] = 12 * np.sum(g ** 4) / np.sum(g ** 2) ** 2
        s = sample_zero_avg_norms(TorusLattice(5, n), 100000, seed=n)
        k = norm_statistics(s, g.sum(), 2 * np.sum(g ** 2), n ** 5, 5)["excess_kurtosis"]
        assert abs(k.value - exact[n]) <= 4 * k.std_error + 0.1 * exact[n]
    assert exact[6] < exact[4]


# ---------------------------------------------------------------- local CLT
def test_kde_sanity_on_normal_draws():
    x = rngmod.stream(0, "kde-sanity").standard_normal(100000)
    diag = density_diagnostic(x, stats.norm.pdf)
    assert diag.sup_distance < 0.01
    assert abs(diag.integral - 1) < 1e-3


def test_chisq2_sanity_against_closed_form():
    x = weighted_chisq_samples([1.0, 1.0], 100000, seed=0)
    diag = density_diagnostic(x, chisq2_closed_form)
    assert diag.sup_distance < 0.02


def test_chisq2_against_kernel_smoothed_closed_form():
    x = weighted_chisq_samples([1.0, 1.0], 100000, seed=0)
    dens = density_diagnostic(x, chisq2_closed_form)
    smooth = chisq2_smoothed(GRID, dens.bandwidth)
    assert np.max(np.abs(dens.empirical_density - smooth)) < 0.02


def test_exact_density_inversion():
    # few terms: the characteristic function decays too slowly to invert
    with pytest.raises(DomainError):
        weighted_chisq_density([1.0, 1.0], [0.0])
    x = np.array([-0.5, 0.0, 0.7, 2.0, 3.5])
    lam = np.ones(40)
    ref = stats.chi2.pdf(np.sqrt(80) * x + 40, 40) * np.sqrt(80)
    assert np.allclose(weighted_chisq_density(lam, x), ref, atol=1e-6)
    z = np.linspace(-3, 3, 7)
    many = weighted_chisq_density(np.ones(4000), z)
    assert np.max(np.abs(many - stats.norm.pdf(z))) < 0.01


def test_shifted_samples_are_standardized():
    lam = np.array([1.0, 0.5, 0.5, 0.25])
    h = np.array([0.3, -0.2, 0.0, 1.0])
    x = weighted_chisq_samples(lam, 200000, seed=4, shifts=h)
    assert abs(x.mean()) < 4 / np.sqrt(x.size)
    assert x.var() == pytest.approx(1.0, rel=0.02)


def test_d5_sup_distance_decreases():
    d = [local_clt_diagnostic(inv_eta(n, 5), 200000, seed=n, conditions=False).sup_distance for n in (4, 6)]
    assert d[1] < d[0]


def test_d3_sup_distance_does_not_vanish():
    # the largest weights keep a fixed share of the variance: Lindeberg fails
    z = np.linspace(-4, 4, 81)
    sup = [np.max(np.abs(weighted_chisq_density(inv_eta(n, 3), z) - stats.norm.pdf(z))) for n in (8, 16)]
    assert sup[1] > 0.8 * sup[0] and sup[1] > 0.02
    lr = [lindeberg_ratio(*np.unique(inv_eta(n, 3), return_counts=True), 0.1) for n in (8, 16, 32)]
    assert min(lr) > 0.5
    lr5 = [lindeberg_ratio(*np.unique(inv_eta(n, 5), return_counts=True), 0.1) for n in (4, 6, 8)]
    assert np.all(np.diff(lr5) < 0)


def test_structural_conditions_d5():
    vals, mult = np.unique(inv_eta(8, 5), return_counts=True)
    c = structural_conditions(vals, mult)
    assert c["a_holds"] and c["b_holds"] and c["c_holds"]
    short = structural_conditions(np.array([1.0]), np.array([2]))
    assert np.isnan(short["c_ratio"]) and not short["c_holds"]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=12), st.integers(0, 2**31))
def test_weighted_chisq_samples_standardized(weights, seed):
    x = weighted_chisq_samples(weights, 20000, seed)
    assert abs(x.mean()) < 6 / np.sqrt(x.size)
    assert 0.85 < x.var() < 1.15


# ---------------------------------------------------------------- moments
def test_moment_table_and_lemma_bound():
    L = TorusLattice(3, 4)
    th = np.concatenate([run_spherical_chain(L, 0.5, 3000, 200, 9, chain=c)[2]["theta"][:, 0] for c in range(2)])
    mt = moment_table(th, "theta0")
    assert mt["m4"].value <= even_moment_bound(2) == 24
    assert even_moment_bound(1) == 2
    ess_scale = 3.0  # conservative allowance for autocorrelation in the raw SE
    assert abs(mt["m1"].value) <= 4 * ess_scale * mt["m1"].std_error
    assert abs(mt["m3"].value) <= 4 * ess_scale * mt["m3"].std_error
