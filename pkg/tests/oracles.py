"""Independent oracles used by the test suite.

Everything here deliberately avoids the library's analytic code paths:
marginal likelihoods and posterior moments come from brute-force grid
quadrature of prior times likelihood, expectations of exp come from dense
trapezoid sums, and ordinary least squares comes straight from lstsq.
"""

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import t as student_t


def _nig_grid(x, y, m, v, a, c, n_beta, n_s2):
    """Log integrand of likelihood x NIG prior on a 2-D grid (p = 1).

    Returns (log_joint grid, log trapezoid weights).  Grid bounds are wide
    multiples of crude moment-matched scales, checked for negligible edge
    mass by the callers.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    sxx = float(x @ x)
    # crude centering from ridge-regularized LS and prior moments
    b_hat = float(x @ y) / (sxx + 1.0 / v)
    s2_guess = max((float(y @ y) - b_hat * float(x @ y)) / max(n, 1), c / (a + 1)) + c / (a + 1)
    b_sd = np.sqrt(v * s2_guess) + np.sqrt(s2_guess / (sxx + 1e-12)) if sxx > 0 else np.sqrt(v * s2_guess)
    betas = np.linspace(b_hat - 25 * b_sd, b_hat + 25 * b_sd, n_beta)
    log_s2 = np.linspace(np.log(s2_guess) - 16, np.log(s2_guess) + 16, n_s2)
    s2 = np.exp(log_s2)
    B, S = np.meshgrid(betas, s2, indexing="ij")
    resid2 = ((y[None, :] - np.outer(betas, x)) ** 2).sum(axis=1)
    loglik = -0.5 * n * np.log(2 * np.pi * S) - resid2[:, None] / (2 * S)
    logprior = (-0.5 * np.log(2 * np.pi * S * v) - (B - m) ** 2 / (2 * S * v)
                + a * np.log(c) - gammaln(a) - (a + 1) * np.log(S) - c / S)
    integrand = loglik + logprior + np.log(S)  # Jacobian of the log-sigma2 grid
    wb = np.full(n_beta, 1.0)
    wb[0] = wb[-1] = 0.5
    ws = np.full(n_s2, 1.0)
    ws[0] = ws[-1] = 0.5
    log_w = (np.log(np.outer(wb, ws))
             + np.log(betas[1] - betas[0]) + np.log(log_s2[1] - log_s2[0]))
    return betas, integrand, log_w


def grid_log_marginal(x, y, m, v, a, c, n_beta=1601, n_s2=1601) -> float:
    """Brute-force evidence: log iint lik(beta, s2) prior(beta, s2)."""
    _, integrand, log_w = _nig_grid(x, y, m, v, a, c, n_beta, n_s2)
    return float(logsumexp(integrand + log_w))


def grid_posterior_coef_mean(x, y, m, v, a, c, n_beta=1601, n_s2=1601) -> float:
    """Brute-force posterior mean of the coefficient (p = 1)."""
    betas, integrand, log_w = _nig_grid(x, y, m, v, a, c, n_beta, n_s2)
    lw = integrand + log_w
    lw -= lw.max()
    w = np.exp(lw)
    return float((w * betas[:, None]).sum() / w.sum())


def trapezoid_exp_mean(weights, locs, scales, dfs, lo, hi, n=200_001) -> float:
    """Dense trapezoid of exp(y) times a Student-t mixture density."""
    ys = np.linspace(lo, hi, n)
    dens = np.zeros_like(ys)
    for w, loc, scale, df in zip(weights, locs, scales, dfs):
        dens += w * student_t.pdf((ys - loc) / scale, df) / scale
    vals = np.exp(ys) * dens
    return float(np.trapz(vals, ys))


def lognormal_mixture_mean(weights, mus, sigmas) -> float:
    """Exact mean of exp(Y) for a Gaussian mixture on the log scale."""
    weights = np.asarray(weights, dtype=float)
    mus = np.asarray(mus, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    return float(np.sum(weights * np.exp(mus + 0.5 * sigmas ** 2)))


def ols_fit(X, y):
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    return beta
