"""Profiled REML/ML deviance and mixed-model fitting.

The deviance is profiled over both the fixed effects and the residual
variance, leaving only the relative covariance parameters theta to
optimize. Evaluation goes through the penalized least-squares normal
equations with a dense Cholesky on the q x q block:

    A(theta)            = Lam' Z'Z Lam + I
    L L'                = A
    r2(theta)           = penalized residual sum of squares
    ML  deviance        = log|A| + n (1 + log(2 pi r2 / n))
    REML deviance       = log|A| + log|Rx'Rx| + (n-p)(1 + log(2 pi r2 / (n-p)))

Cross-products (Z'Z, Z'X, Z'y, X'X, X'y, y'y) are computed once per
fit, so each deviance evaluation costs only dense q- and p-sized solves.
Optimization is a bounded Nelder-Mead simplex with seeded random
restarts; a fit whose restart budget is exhausted is returned flagged,
never raised.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.optimize import minimize

from .design import DesignMatrices

BOUNDARY_TOL = 1e-4         # diagonal theta this close to 0 flags singularity
DEFAULT_RESTARTS = 3


class FitError(ValueError):
    pass


@dataclass
class LmmFit:
    """One fitted mixed model; aic = 2k - 2 loglik with k = p + n_theta + 1."""

    beta: np.ndarray
    beta_names: tuple[str, ...]
    theta: np.ndarray
    theta_names: tuple[str, ...]
    sigma2: float
    loglik: float
    criterion: str
    deviance: float
    converged: bool
    singular: bool
    n: int
    p: int
    k: int

    @property
    def aic(self) -> float:
        return 2.0 * self.k - 2.0 * self.loglik


class _Profiler:
    """Precomputed cross-products; evaluates the profiled deviance."""

    def __init__(self, design: DesignMatrices, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (design.n,):
            raise FitError("response length does not match design")
        if not np.all(np.isfinite(y)):
            raise FitError("response contains non-finite values")
        n, p = design.n, design.p
        if n <= p:
            raise FitError(f"need n > p (n={n}, p={p})")
        X, Z = design.X, design.Z
        self.design = design
        self.y = y
        self.ZtZ = (Z.T @ Z).toarray()
        self.ZtX = Z.T @ X
        self.Zty = Z.T @ y
        self.XtX = X.T @ X
        self.Xty = X.T @ y
        self.yty = float(y @ y)
        self.lam_indices = design.lambda_indices()
        # X must be full rank after aliasing was handled in build_design
        try:
            cholesky(self.XtX, lower=True)
        except LinAlgError:
            raise FitError("rank-deficient fixed-effects matrix") from None

    def solve(self, theta, criterion):
        if criterion not in ("reml", "ml"):
            raise FitError(f"unknown criterion {criterion!r}")
        d = self.design
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < d.theta_lower - 1e-12):
            raise FitError("theta below its lower bound")
        n, p, q = d.n, d.p, d.q
        LamT = d.lambda_dense(theta, self.lam_indices).T
        A = LamT @ self.ZtZ @ LamT.T
        A[np.diag_indices(q)] += 1.0
        L = cholesky(A, lower=True, check_finite=False)
        cu = solve_triangular(L, LamT @ self.Zty, lower=True, check_finite=False)
        RZX = solve_triangular(L, LamT @ self.ZtX, lower=True, check_finite=False)
        S = self.XtX - RZX.T @ RZX
        RX = cholesky(S, lower=True, check_finite=False)
        cb = solve_triangular(RX, self.Xty - RZX.T @ cu, lower=True,
                              check_finite=False)
        beta = solve_triangular(RX.T, cb, lower=False, check_finite=False)
        r2 = max(self.yty - cu @ cu - cb @ cb, np.finfo(float).tiny)
        logdet_A = 2.0 * np.log(np.diag(L)).sum()
        if criterion == "reml":
            logdet_RX2 = 2.0 * np.log(np.diag(RX)).sum()
            dev = logdet_A + logdet_RX2 \
                + (n - p) * (1.0 + math.log(2.0 * math.pi * r2 / (n - p)))
            sigma2 = r2 / (n - p)
        else:
            dev = logdet_A + n * (1.0 + math.log(2.0 * math.pi * r2 / n))
            sigma2 = r2 / n
        return dev, beta, sigma2


def profiled_deviance(design: DesignMatrices, y, theta, criterion="reml") -> float:
    """-2 x profiled (restricted) log-likelihood at theta."""
    return _Profiler(design, y).solve(theta, criterion)[0]


def gls_solution(design: DesignMatrices, y, theta, criterion="reml"):
    """(beta, sigma2) of the generalized least-squares solve at theta."""
    _, beta, sigma2 = _Profiler(design, y).solve(theta, criterion)
    return beta, sigma2


def _coordinate_polish(objective, x, lower, h=1e-4, rounds=2):
    """One-dimensional quadratic refinements around a simplex optimum."""
    x = np.asarray(x, dtype=float).copy()
    f0 = objective(x)
    for _ in range(rounds):
        for i in range(len(x)):
            hi = h * max(1.0, abs(x[i]))
            if np.isfinite(lower[i]) and x[i] - lower[i] < hi:
                continue                      # boundary optimum: keep as is
            xp, xm = x.copy(), x.copy()
            xp[i] += hi
            xm[i] -= hi
            fp, fm = objective(xp), objective(xm)
            denom = fp - 2.0 * f0 + fm
            if not np.isfinite(denom) or denom <= 0:
                continue
            step = 0.5 * (fm - fp) / denom * hi
            step = np.clip(step, -hi, hi)
            xn = x.copy()
            xn[i] = max(x[i] + step, lower[i] if np.isfinite(lower[i]) else -np.inf)
            fn = objective(xn)
            if fn <= f0:
                x, f0 = xn, fn
    return x, f0


def fit_lmm(design: DesignMatrices, y, criterion="reml", seed=0,
            restarts=DEFAULT_RESTARTS, tol=1e-8) -> LmmFit:
    """Minimize the profiled deviance over theta and assemble the fit.

    The first start is the unit-diagonal template; `restarts` further
    seeded random starts follow, and the best point is polished with a
    tighter simplex. Non-convergence is reported via the flag.
    """
    prof = _Profiler(design, y)
    lower = design.theta_lower
    m = design.n_theta

    def objective(theta):
        try:
            return prof.solve(np.maximum(theta, lower), criterion)[0]
        except LinAlgError:
            return np.inf

    if m == 0:
        theta_hat = np.empty(0)
        converged = True
    else:
        rng = np.random.default_rng(seed)
        bounds = [(lo, None) for lo in np.where(np.isfinite(lower), lower, -np.inf)]
        starts = [design.theta_start.copy()]
        for _ in range(restarts):
            start = np.where(np.isfinite(lower),
                             rng.uniform(0.05, 2.0, size=m),
                             rng.uniform(-1.0, 1.0, size=m))
            starts.append(start)
        best = None
        for start in starts:
            res = minimize(objective, start, method="Nelder-Mead", bounds=bounds,
                           options={"xatol": 1e-6, "fatol": tol,
                                    "maxiter": 200 * m, "maxfev": 200 * m})
            if best is None or res.fun < best.fun:
                best = res
        # polish the best point with a tight simplex, then refine each
        # coordinate by a quadratic step (the simplex stalls at the
        # deviance noise floor before theta reaches full precision)
        res = minimize(objective, best.x, method="Nelder-Mead", bounds=bounds,
                       options={"xatol": 1e-9, "fatol": tol,
                                "maxiter": 400 * m, "maxfev": 400 * m})
        converged = bool(res.success) if res.fun <= best.fun else bool(best.success)
        if res.fun <= best.fun:
            best = res
        theta_hat, _ = _coordinate_polish(objective, np.maximum(best.x, lower),
                                          lower)

    dev, beta, sigma2 = prof.solve(theta_hat, criterion)
    diag_mask = np.isfinite(lower)
    singular = bool(np.any(np.abs(theta_hat[diag_mask] - lower[diag_mask])
                           <= BOUNDARY_TOL)) if m else False
    k = design.p + m + 1
    return LmmFit(
        beta=beta, beta_names=design.x_names,
        theta=theta_hat, theta_names=design.theta_names,
        sigma2=sigma2, loglik=-dev / 2.0, criterion=criterion, deviance=dev,
        converged=converged, singular=singular,
        n=design.n, p=design.p, k=k,
    )


def aic(fit: LmmFit) -> float:
    """Akaike information criterion of a fitted model."""
    return fit.aic


def fit_report(fit: LmmFit) -> str:
    """Structured text record: beta table, variance components, criteria."""
    lines = ["[fit]",
             f"criterion = {fit.criterion}",
             f"n = {fit.n}", f"p = {fit.p}", f"k = {fit.k}",
             f"loglik = {fit.loglik!r}", f"aic = {fit.aic!r}",
             f"converged = {str(fit.converged).lower()}",
             f"singular = {str(fit.singular).lower()}",
             "", "[beta]"]
    for name, value in zip(fit.beta_names, fit.beta):
        lines.append(f"{name} {value!r}")
    lines.append("")
    lines.append("[variance]")
    for name, value in zip(fit.theta_names, fit.theta):
        lines.append(f"{name} {value!r}")
    lines.append(f"residual sigma2 {fit.sigma2!r}")
    return "\n".join(lines) + "\n"
