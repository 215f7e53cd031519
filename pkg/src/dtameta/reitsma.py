"""Bivariate normal random-effects model, ML and REML estimation.

Per study i with logit pair y_i and known within-study variances,

    y_i ~ N2(mu, Sigma + diag(s1sq_i, s2sq_i)),
    Sigma = [[tau1^2, rho*tau1*tau2], [rho*tau1*tau2, tau2^2]].

ML maximizes the joint likelihood over the working-scale vector
(mu1, mu2, log tau1, log tau2, atanh rho), which keeps the optimizer
unconstrained.  REML profiles the mean by GLS and maximizes the standard
restricted likelihood over the three variance parameters.  Covariances
come from finite-difference Hessians on the working scale, delta-mapped
to the natural scale.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import kernels
from .data import BivariateSample
from .errors import FitFailedError

TAU_BOUNDARY = 1e-6


@dataclass(frozen=True)
class BivariateParams:
    """Natural-scale parameters of the bivariate random-effects model."""

    mu1: float
    mu2: float
    tau1: float
    tau2: float
    rho: float

    def __post_init__(self):
        if self.tau1 < 0 or self.tau2 < 0:
            raise ValueError("tau must be non-negative")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")

    def to_array(self) -> np.ndarray:
        return np.array([self.mu1, self.mu2, self.tau1, self.tau2, self.rho])

    @classmethod
    def from_array(cls, arr) -> "BivariateParams":
        mu1, mu2, t1, t2, rho = (float(v) for v in arr)
        return cls(mu1, mu2, t1, t2, rho)

    def sigma(self) -> np.ndarray:
        off = self.rho * self.tau1 * self.tau2
        return np.array([[self.tau1**2, off], [off, self.tau2**2]])


@dataclass(frozen=True)
class OptimOptions:
    max_iter: int = 4000
    gtol: float = 1e-6
    xtol: float = 1e-8
    hess_rel_step: float = 1e-5


@dataclass(frozen=True)
class BivariateFit:
    """A fitted model: parameters, covariance, and convergence metadata."""

    params: BivariateParams
    cov: np.ndarray  # 5x5, natural scale (mu1, mu2, tau1, tau2, rho)
    loglik: float
    method: str
    converged: bool
    n_iter: int
    gradient_norm: float
    boundary: bool = False
    quadrature: dict | None = None

    def mu_cov(self) -> np.ndarray:
        return self.cov[:2, :2]

    def to_json(self) -> dict:
        out = {
            "method": self.method,
            "mu": [self.params.mu1, self.params.mu2],
            "tau": [self.params.tau1, self.params.tau2],
            "rho": self.params.rho,
            "cov": [[float(v) for v in row] for row in self.cov],
            "loglik": self.loglik,
            "converged": self.converged,
            "n_iter": self.n_iter,
        }
        if self.quadrature is not None:
            out["quadrature"] = self.quadrature
        return out


def to_working(theta_nat: np.ndarray) -> np.ndarray:
    mu1, mu2, t1, t2, rho = theta_nat
    return np.array([mu1, mu2, np.log(t1), np.log(t2), np.arctanh(rho)])


def from_working(theta_w: np.ndarray) -> np.ndarray:
    mu1, mu2, a, b, c = theta_w
    return np.array([mu1, mu2, np.exp(a), np.exp(b), np.tanh(c)])


def working_jacobian(theta_w: np.ndarray) -> np.ndarray:
    """Diagonal d(natural)/d(working)."""
    _, _, a, b, c = theta_w
    return np.diag([1.0, 1.0, np.exp(a), np.exp(b), 1.0 / np.cosh(c) ** 2])


def nll(params: BivariateParams, sample: BivariateSample) -> float:
    """Negative log-likelihood at natural-scale parameters."""
    return kernels.reitsma_nll(
        params.to_array(), sample.y1, sample.y2, sample.s1sq, sample.s2sq
    )


def nll_working(theta_w: np.ndarray, sample: BivariateSample) -> float:
    return kernels.reitsma_nll(
        from_working(theta_w), sample.y1, sample.y2, sample.s1sq, sample.s2sq
    )


def nll_grad_working(theta_w: np.ndarray, sample: BivariateSample):
    """(nll, gradient) on the working scale, via the chain rule."""
    nat = from_working(theta_w)
    val, g_nat = kernels.reitsma_nll_grad(nat, sample.y1, sample.y2, sample.s1sq, sample.s2sq)
    if not np.isfinite(val):
        return val, np.full(5, np.nan)
    scale = np.array([1.0, 1.0, nat[2], nat[3], 1.0 - nat[4] ** 2])
    return val, g_nat * scale


def default_starts(sample: BivariateSample) -> list[np.ndarray]:
    """Deterministic multi-start points on the working scale.

    Moment estimates of the between-study covariance (sample covariance of
    the pairs minus the mean within-study variance, floored at 0.01), plus
    rho = 0 and rho = -0.5 variants.
    """
    y1, y2 = sample.y1, sample.y2
    mu = np.array([y1.mean(), y2.mean()])
    if len(sample) >= 2:
        cov = np.cov(np.vstack([y1, y2]))
        d1 = max(cov[0, 0] - sample.s1sq.mean(), 0.01)
        d2 = max(cov[1, 1] - sample.s2sq.mean(), 0.01)
        denom = np.sqrt(cov[0, 0] * cov[1, 1])
        rho = float(np.clip(cov[0, 1] / denom, -0.9, 0.9)) if denom > 0 else 0.0
    else:
        d1 = d2 = 0.1
        rho = 0.0
    base = np.array([mu[0], mu[1], 0.5 * np.log(d1), 0.5 * np.log(d2), np.arctanh(rho)])
    return [
        base,
        np.r_[base[:4], 0.0],
        np.r_[base[:4], np.arctanh(-0.5)],
    ]


def _minimize_working(f, x0, opts: OptimOptions, jac=None):
    r_nm = optimize.minimize(
        f,
        x0,
        method="Nelder-Mead",
        options=dict(maxiter=opts.max_iter, xatol=opts.xtol, fatol=1e-12),
    )
    r_qn = optimize.minimize(
        f,
        r_nm.x,
        jac=jac,
        method="BFGS",
        options=dict(gtol=opts.gtol, maxiter=opts.max_iter),
    )
    if np.isfinite(r_qn.fun) and r_qn.fun <= r_nm.fun:
        r_qn.nit += r_nm.nit
        # a failed polish of an already-converged point is still converged
        if not r_qn.success and r_nm.success:
            if r_nm.fun - r_qn.fun <= 1e-8 * (1.0 + abs(r_nm.fun)):
                r_qn.success = True
        return r_qn
    return r_nm


def fd_hessian(f, x, rel_step=1e-5):
    """Central finite-difference Hessian with relative steps per coordinate."""
    n = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    hess = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            if i == j:
                f0 = f(x)
                xp = x.copy()
                xm = x.copy()
                xp[i] += h[i]
                xm[i] -= h[i]
                hess[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / h[i] ** 2
            else:
                xpp = x.copy(); xpm = x.copy(); xmp = x.copy(); xmm = x.copy()
                xpp[[i, j]] += [h[i], h[j]]
                xpm[[i, j]] += [h[i], -h[j]]
                xmp[[i, j]] += [-h[i], h[j]]
                xmm[[i, j]] -= [h[i], h[j]]
                hess[i, j] = hess[j, i] = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (
                    4.0 * h[i] * h[j]
                )
    return hess


def covariance_from_hessian(hess: np.ndarray) -> np.ndarray:
    """Inverse of the observed information; pseudo-inverse on singularity."""
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(hess)
    return cov


def fit_reitsma(
    sample: BivariateSample,
    method: str = "ml",
    opts: OptimOptions | None = None,
) -> BivariateFit:
    """Fit the model by ML or REML with deterministic multi-start."""
    if method not in ("ml", "reml"):
        raise ValueError(f"unknown method {method!r}")
    if len(sample) < 2:
        raise FitFailedError("model fitting needs at least 2 studies")
    if len(sample) < 3:
        warnings.warn("fewer than 3 studies: 5 parameters exceed the data support")
    opts = opts or OptimOptions()
    if method == "ml":
        return _fit_ml(sample, opts)
    return _fit_reml(sample, opts)


def _fit_ml(sample: BivariateSample, opts: OptimOptions) -> BivariateFit:
    f = lambda w: nll_working(w, sample)

    def fg(w):
        return nll_grad_working(w, sample)

    best = None
    for x0 in default_starts(sample):
        try:
            res = _minimize_working(f, x0, opts, jac=lambda w: fg(w)[1])
        except (ValueError, FloatingPointError):
            continue
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitFailedError("no optimizer start converged")

    w_hat = best.x
    _, grad = fg(w_hat)
    gnorm = float(np.linalg.norm(grad)) if np.all(np.isfinite(grad)) else np.inf
    nat = from_working(w_hat)
    hess = fd_hessian(f, w_hat, opts.hess_rel_step)
    cov_w = covariance_from_hessian(hess)
    jac = working_jacobian(w_hat)
    cov_nat = jac @ cov_w @ jac.T
    boundary = bool(min(nat[2], nat[3]) < TAU_BOUNDARY)
    return BivariateFit(
        params=BivariateParams.from_array(nat),
        cov=cov_nat,
        loglik=-float(best.fun),
        method="ml",
        converged=bool(best.success or gnorm <= 1e-4),
        n_iter=int(best.nit),
        gradient_norm=gnorm,
        boundary=boundary,
    )


def _fit_reml(sample: BivariateSample, opts: OptimOptions) -> BivariateFit:
    y1, y2, s1, s2 = sample.y1, sample.y2, sample.s1sq, sample.s2sq

    def f(psi_w):
        t1, t2 = np.exp(psi_w[0]), np.exp(psi_w[1])
        rho = np.tanh(psi_w[2])
        return kernels.reml_nll(np.array([t1, t2, rho]), y1, y2, s1, s2)

    best = None
    for x0 in default_starts(sample):
        try:
            res = _minimize_working(f, x0[2:], opts)
        except (ValueError, FloatingPointError):
            continue
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitFailedError("no optimizer start converged")

    psi_w = best.x
    psi_nat = np.array([np.exp(psi_w[0]), np.exp(psi_w[1]), np.tanh(psi_w[2])])
    mu, mu_cov = kernels.gls_mean(psi_nat, y1, y2, s1, s2)

    hess = fd_hessian(f, psi_w, opts.hess_rel_step)
    cov_psi_w = covariance_from_hessian(hess)
    jac = np.diag([psi_nat[0], psi_nat[1], 1.0 - psi_nat[2] ** 2])
    cov_psi = jac @ cov_psi_w @ jac.T

    cov = np.zeros((5, 5))
    cov[:2, :2] = mu_cov
    cov[2:, 2:] = cov_psi

    grad = optimize.approx_fprime(psi_w, f, 1e-7)
    gnorm = float(np.linalg.norm(grad))
    boundary = bool(min(psi_nat[0], psi_nat[1]) < TAU_BOUNDARY)
    return BivariateFit(
        params=BivariateParams(float(mu[0]), float(mu[1]), *(float(v) for v in psi_nat)),
        cov=cov,
        loglik=-float(best.fun),
        method="reml",
        converged=bool(best.success or gnorm <= 1e-4),
        n_iter=int(best.nit),
        gradient_norm=gnorm,
        boundary=boundary,
    )
