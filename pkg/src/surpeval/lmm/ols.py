"""Ordinary least squares with classical t-based inference."""

from dataclasses import dataclass

import numpy as np
from scipy import stats


class OlsError(ValueError):
    pass


@dataclass
class OlsFit:
    names: tuple[str, ...]
    estimates: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    df: int
    sigma2: float
    perfect_fit: bool


def t_pvalue(t: float, df: int) -> float:
    """Two-sided Student-t tail probability."""
    if df < 1:
        raise OlsError("df must be >= 1")
    if not np.isfinite(t):
        return 0.0
    return float(2.0 * stats.t.sf(abs(t), df))


def fit_ols(X, y, names=None) -> OlsFit:
    """Normal-equation solution with SEs from sigma2 (X'X)^-1."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n <= p:
        raise OlsError(f"need n > p (n={n}, p={p})")
    if names is None:
        names = tuple(f"x{j}" for j in range(p))
    if np.linalg.matrix_rank(X) < p:
        raise OlsError("rank-deficient design matrix")
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    df = n - p
    sigma2 = rss / df
    # zero-residual designs have no noise scale; flag instead of dividing by 0
    scale = float(y @ y) + 1.0
    perfect = rss <= 1e-18 * scale
    cov_diag = np.diag(np.linalg.inv(XtX))
    se = np.sqrt(np.maximum(sigma2 * cov_diag, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / np.where(se > 0, se, 1.0),
                     np.sign(beta) * np.inf)
    t = np.where((se == 0) & (beta == 0), 0.0, t)
    pvals = np.array([t_pvalue(tj, df) if np.isfinite(tj) else 0.0 for tj in t])
    pvals = np.where((se == 0) & (beta == 0), 1.0, pvals)
    return OlsFit(tuple(names), beta, se, t, pvals, df, sigma2, perfect)
