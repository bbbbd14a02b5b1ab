import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln

from surpeval.lmm import OlsError, fit_ols, t_pvalue


def t_density(x, df):
    logc = gammaln((df + 1) / 2) - gammaln(df / 2) - 0.5 * np.log(df * np.pi)
    return np.exp(logc) * (1 + x * x / df) ** (-(df + 1) / 2)


def two_sided_by_quadrature(t, df):
    tail, _ = integrate.quad(t_density, abs(t), np.inf, args=(df,))
    return 2 * tail


def test_exact_line():
    X = np.column_stack([np.ones(3), np.array([1.0, 2.0, 3.0])])
    fit = fit_ols(X, np.array([2.0, 4.0, 6.0]))
    assert abs(fit.estimates[1] - 2.0) < 1e-12
    assert abs(fit.estimates[0]) < 1e-12
    assert fit.perfect_fit


def test_estimates_standard_errors_t_p():
    rng = np.random.default_rng(0)
    n = 40
    x = rng.normal(size=n)
    X = np.column_stack([np.ones(n), x])
    y = 1.0 + 0.5 * x + rng.normal(0, 0.3, size=n)
    fit = fit_ols(X, y)
    # normal-equation oracle
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    resid = y - X @ beta
    s2 = resid @ resid / (n - 2)
    se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    np.testing.assert_allclose(fit.estimates, beta, atol=1e-12)
    np.testing.assert_allclose(fit.se, se, atol=1e-12)
    np.testing.assert_allclose(fit.t, beta / se, atol=1e-12)
    assert fit.df == n - 2
    for j in range(2):
        assert abs(fit.p[j] - two_sided_by_quadrature(fit.t[j], fit.df)) < 1e-10


def test_t_zero_gives_p_one():
    assert t_pvalue(0.0, 10) == 1.0


def test_t_2228_df10_is_half_percent_level():
    p = t_pvalue(2.228, 10)
    assert abs(p - 0.0500) < 0.0005
    assert abs(p - two_sided_by_quadrature(2.228, 10)) < 1e-10


def test_large_t_tiny_p():
    assert t_pvalue(8.4972, 10) < 0.0001


def test_rank_deficiency_rejected():
    X = np.column_stack([np.ones(5), np.arange(5.0), 2 * np.arange(5.0)])
    with pytest.raises(OlsError):
        fit_ols(X, np.arange(5.0))


def test_df_must_be_positive():
    with pytest.raises(OlsError):
        t_pvalue(1.0, 0)
