"""Mixed-model estimation against independent dense-matrix oracles."""

import math

import numpy as np
import pytest

from surpeval.lmm import (FitError, FixedSpec, RandomTerm, aic, build_design,
                          fit_lmm, fit_ols, fit_report, gls_solution,
                          profiled_deviance)


def dense_oracle(design, y, theta, criterion):
    """Deviance straight from the marginal covariance V = ZLL'Z' + I."""
    n, p = design.n, design.p
    lam = design.lambda_matrix(theta).toarray()
    Z = design.Z.toarray()
    V0 = np.eye(n) + Z @ lam @ lam.T @ Z.T
    Vi = np.linalg.inv(V0)
    X = design.X
    beta = np.linalg.solve(X.T @ Vi @ X, X.T @ Vi @ y)
    resid = y - X @ beta
    r2 = resid @ Vi @ resid
    _, logdetV = np.linalg.slogdet(V0)
    if criterion == "reml":
        _, logdetX = np.linalg.slogdet(X.T @ Vi @ X)
        dev = logdetV + logdetX + (n - p) * (1 + np.log(2 * np.pi * r2 / (n - p)))
    else:
        dev = logdetV + n * (1 + np.log(2 * np.pi * r2 / n))
    return dev, beta


def one_way(rng, g, m, sd_b=1.0, sd_e=0.5):
    y = np.repeat(rng.normal(0, sd_b, g), m) + rng.normal(0, sd_e, g * m)
    data = {"subject": [f"s{j:02d}" for j in np.repeat(np.arange(g), m)]}
    design = build_design(data, FixedSpec(()), [RandomTerm("subject")])
    return design, y


def anova_oracle(y, g, m):
    """Closed-form REML components for a balanced one-way layout."""
    n = g * m
    gm = y.reshape(g, m).mean(axis=1)
    MSB = m * ((gm - y.mean()) ** 2).sum() / (g - 1)
    MSW = ((y.reshape(g, m) - gm[:, None]) ** 2).sum() / (n - g)
    if MSB > MSW:
        return (MSB - MSW) / m, MSW
    # boundary solution: no between variance, residual pools everything
    return 0.0, ((y - y.mean()) ** 2).sum() / (n - 1)


def crossed_design(rng, n=10):
    data = {
        "x": rng.normal(size=n),
        "g": [str(v) for v in rng.integers(0, 3, size=n)],
        "s": rng.normal(size=n),
    }
    design = build_design(data, FixedSpec(("x",)),
                          [RandomTerm("g", ("s",), correlated=True)])
    return design, rng.normal(size=n)


@pytest.mark.parametrize("criterion", ["reml", "ml"])
def test_deviance_matches_dense_oracle(criterion):
    rng = np.random.default_rng(0)
    design, y = crossed_design(rng)
    for seed in range(5):
        trng = np.random.default_rng(seed)
        theta = np.array([trng.uniform(0.2, 1.5), trng.uniform(-0.8, 0.8),
                          trng.uniform(0.2, 1.5)])
        dev = profiled_deviance(design, y, theta, criterion)
        oracle, beta_oracle = dense_oracle(design, y, theta, criterion)
        assert abs(dev - oracle) < 1e-8
        beta, _ = gls_solution(design, y, theta, criterion)
        assert np.abs(beta - beta_oracle).max() < 1e-8


def test_theta_zero_equals_ols_closed_form():
    rng = np.random.default_rng(1)
    design, y = crossed_design(rng, n=12)
    n, p = design.n, design.p
    X = design.X
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    rss = float(((y - X @ beta) ** 2).sum())
    _, logdetX = np.linalg.slogdet(X.T @ X)
    expected = logdetX + (n - p) * (1 + math.log(2 * math.pi * rss / (n - p)))
    assert abs(profiled_deviance(design, y, [0, 0, 0], "reml") - expected) < 1e-8


def test_row_duplication_changes_deviance():
    # duplication shifts the deviance; the argmin moves too (the effective
    # residual degrees of freedom change), so only the former is asserted
    rng = np.random.default_rng(2)
    design, y = one_way(rng, 4, 5)
    data2 = {"subject": [f"s{j:02d}" for j in np.repeat(np.arange(4), 10)]}
    design2 = build_design(data2, FixedSpec(()), [RandomTerm("subject")])
    y2 = np.tile(y.reshape(4, 5), (1, 2)).ravel()
    theta = np.array([0.7])
    assert abs(profiled_deviance(design, y, theta, "reml")
               - profiled_deviance(design2, y2, theta, "reml")) > 1.0


def test_balanced_one_way_matches_anova_oracle():
    rng = np.random.default_rng(42)
    for trial in range(10):
        g, m = int(rng.integers(4, 9)), 5
        design, y = one_way(rng, g, m)
        fit = fit_lmm(design, y, seed=trial)
        sb2, s2 = anova_oracle(y, g, m)
        assert abs(fit.theta[0] ** 2 * fit.sigma2 - sb2) < 1e-6
        assert abs(fit.sigma2 - s2) < 1e-6


def test_forced_equal_group_means_is_singular():
    rng = np.random.default_rng(3)
    g, m = 4, 5
    design, y = one_way(rng, g, m)
    y = y - np.repeat(y.reshape(g, m).mean(axis=1), m)   # kill group variance
    fit = fit_lmm(design, y, seed=0)
    assert fit.singular
    assert fit.theta[0] <= 1e-4


def test_beta_equals_gls_at_fitted_theta():
    rng = np.random.default_rng(4)
    design, y = crossed_design(rng, n=30)
    fit = fit_lmm(design, y, seed=0)
    beta, sigma2 = gls_solution(design, y, fit.theta, "reml")
    assert np.abs(fit.beta - beta).max() < 1e-8
    assert abs(fit.sigma2 - sigma2) < 1e-12


def test_ols_reduction_at_pinned_zero_theta():
    rng = np.random.default_rng(5)
    design, y = crossed_design(rng, n=25)
    beta, _ = gls_solution(design, y, np.zeros(3), "reml")
    ols = fit_ols(design.X, y, names=design.x_names)
    assert np.abs(beta - ols.estimates).max() < 1e-8


def test_local_minimality_of_fitted_theta():
    rng = np.random.default_rng(6)
    design, y = one_way(rng, 6, 5)
    fit = fit_lmm(design, y, seed=0)
    base = profiled_deviance(design, y, fit.theta, "reml")
    for delta in (-1e-3, 1e-3):
        theta = fit.theta + delta
        if theta[0] < 0:
            continue
        assert profiled_deviance(design, y, theta, "reml") >= base - 1e-9


def simulate_rt(seed, n_subjects=20, n_rows=300, beta_surp=2.0):
    """Log-RT with a planted surprisal effect and subject/sentence structure."""
    rng = np.random.default_rng(seed)
    subjects = rng.integers(0, n_subjects, size=n_rows)
    sentences = rng.integers(0, 30, size=n_rows)
    surp = rng.gamma(4.0, 0.5, size=n_rows)
    subj_int = rng.normal(0, 0.4, n_subjects)
    subj_slope = rng.normal(0, 0.25, n_subjects)
    sent_int = rng.normal(0, 0.3, 30)
    y = (5.5 + beta_surp * surp + subj_int[subjects]
         + subj_slope[subjects] * surp + sent_int[sentences]
         + rng.normal(0, 0.3, n_rows))
    data = {"surprisal": surp,
            "subject": [f"s{j:02d}" for j in subjects],
            "sentence": [f"t{j:02d}" for j in sentences]}
    return data, y, rng


def build_rt_design(data):
    return build_design(data, FixedSpec(("surprisal",)),
                        [RandomTerm("subject", ("surprisal",)),
                         RandomTerm("sentence")])


def test_planted_effect_recovered_and_aic_orders():
    hits = 0
    for seed in range(10):
        data, y, rng = simulate_rt(seed)
        design = build_rt_design(data)
        fit = fit_lmm(design, y, seed=seed)
        assert abs(fit.beta[1] - 2.0) / 2.0 < 0.1
        shuffled = dict(data)
        shuffled["surprisal"] = rng.permutation(data["surprisal"])
        fit_perm = fit_lmm(build_rt_design(shuffled), y, seed=seed)
        hits += fit.aic < fit_perm.aic
    assert hits >= 9


def test_rescaling_invariance_ml_and_reml_differences():
    c = math.log(2)   # nats -> bits
    for seed in range(3):
        data, y, _ = simulate_rt(seed, n_rows=200)
        scaled = dict(data)
        scaled["surprisal"] = np.asarray(data["surprisal"]) * c
        for crit in ("ml", "reml"):
            a = fit_lmm(build_rt_design(data), y, criterion=crit, seed=seed)
            b = fit_lmm(build_rt_design(scaled), y, criterion=crit, seed=seed)
            # the coefficient rescales exactly
            assert abs(b.beta[1] - a.beta[1] / c) < 1e-6
            if crit == "ml":
                # maximum likelihood is invariant under predictor rescaling
                assert abs(a.loglik - b.loglik) < 1e-6
                assert abs(a.aic - b.aic) < 1e-6
            else:
                # REML shifts by the known 2 ln c constant, which cancels in
                # every identical-structure AIC comparison
                assert abs((b.aic - a.aic) - 2 * math.log(c)) < 1e-6


def test_reml_aic_differences_invariant_under_rescaling():
    c = math.log(2)
    data, y, _ = simulate_rt(11, n_rows=200)
    data2, y2, _ = simulate_rt(12, n_rows=200)
    y2 = y2[:len(y)]
    scaledA = dict(data)
    scaledA["surprisal"] = np.asarray(data["surprisal"]) * c
    scaledB = dict(data2)
    scaledB["surprisal"] = np.asarray(data2["surprisal"]) * c
    a1 = fit_lmm(build_rt_design(data), y, seed=0)
    a2 = fit_lmm(build_rt_design(data2), y, seed=0)
    b1 = fit_lmm(build_rt_design(scaledA), y, seed=0)
    b2 = fit_lmm(build_rt_design(scaledB), y, seed=0)
    assert abs((a1.aic - a2.aic) - (b1.aic - b2.aic)) < 1e-6


def test_shift_invariance_with_correlated_terms_ml():
    data, y, _ = simulate_rt(7, n_rows=200)
    shifted = dict(data)
    shifted["surprisal"] = np.asarray(data["surprisal"]) + 3.0
    a = fit_lmm(build_rt_design(data), y, criterion="ml", seed=1)
    b = fit_lmm(build_rt_design(shifted), y, criterion="ml", seed=1)
    assert abs(a.loglik - b.loglik) < 1e-5
    assert abs(a.beta[1] - b.beta[1]) < 1e-5


def test_permutation_invariance():
    rng = np.random.default_rng(8)
    data, y, _ = simulate_rt(9, n_rows=120)
    perm = rng.permutation(len(y))
    data_p = {k: list(np.asarray(v)[perm]) for k, v in data.items()}
    f1 = fit_lmm(build_rt_design(data), y, seed=3)
    f2 = fit_lmm(build_rt_design(data_p), np.asarray(y)[perm], seed=3)
    assert abs(f1.loglik - f2.loglik) < 1e-6
    assert np.abs(f1.beta - f2.beta).max() < 1e-6
    assert np.abs(f1.theta - f2.theta).max() < 1e-4


def test_aic_arithmetic_and_counting():
    rng = np.random.default_rng(10)
    design, y = one_way(rng, 4, 5)
    fit = fit_lmm(design, y, seed=0)
    assert fit.k == fit.p + len(fit.theta) + 1
    assert abs(aic(fit) - (2 * fit.k - 2 * fit.loglik)) < 1e-12
    # loglik = -100, k = 5 -> 210
    fit.loglik = -100.0
    fit.k = 5
    assert aic(fit) == 210.0


def test_federmeier_k_by_hand_enumeration():
    # 6 fixed effects + intercept; subject (int + baseline + word_pos),
    # item (int + baseline), both correlated: p=7, theta=6+3, +1 residual
    from surpeval.corpus import builtin_recipe
    recipe = builtin_recipe("federmeier2007")
    p = 1 + len(recipe.fixed_effects)
    n_theta = sum(t.n_theta for t in recipe.random_effects)
    assert p == 7
    assert n_theta == 9
    assert p + n_theta + 1 == 17


def test_aic_difference_is_twice_loglik_difference():
    data, y, rng = simulate_rt(13, n_rows=150)
    design = build_rt_design(data)
    f1 = fit_lmm(design, y, seed=0)
    shuffled = dict(data)
    shuffled["surprisal"] = rng.permutation(data["surprisal"])
    f2 = fit_lmm(build_rt_design(shuffled), y, seed=0)
    assert abs((f1.aic - f2.aic) - 2 * (f2.loglik - f1.loglik)) < 1e-10


def test_nonconvergence_is_flagged_not_raised():
    rng = np.random.default_rng(14)
    design, y = one_way(rng, 4, 5)
    fit = fit_lmm(design, y, seed=0, restarts=0, tol=1e-8)
    assert isinstance(fit.converged, bool)


def test_need_more_rows_than_columns():
    data = {"x": [1.0, 2.0], "g": ["a", "b"]}
    design = build_design(data, FixedSpec(("x",)), [RandomTerm("g")])
    with pytest.raises(FitError):
        fit_lmm(design, [1.0, 2.0])


def test_fit_report_contains_sections():
    rng = np.random.default_rng(15)
    design, y = one_way(rng, 4, 5)
    fit = fit_lmm(design, y, seed=0)
    report = fit_report(fit)
    assert "[fit]" in report and "[beta]" in report and "[variance]" in report
    assert "residual sigma2" in report
