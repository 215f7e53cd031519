"""Pure-numpy reference implementations of the hot likelihood kernels.

Every function here has a signature-compatible compiled twin in ``_core``
(Cython); the package picks one at import time.  All parameters arrive on
the natural scale:

    theta = (mu1, mu2, tau1, tau2, rho)

Bivariate normal model (per study i, V_i = Sigma + diag(s1sq_i, s2sq_i)):

    nll = sum_i [ log(2*pi) + 0.5*log det V_i + 0.5 * r_i' V_i^{-1} r_i ]

Binomial GLMM (per study, 2-D integral by adaptive Gauss-Hermite
quadrature centered at the integrand mode, rescaled by the mode Hessian):

    L_i = int Bin(tp_i; n1_i, expit(e1)) Bin(tn_i; n0_i, expit(e2))
              phi2(e; mu, Sigma) de

Probit selection model (t_i the observed contrast statistic; alpha is
profiled from sum_i 1/P_i = M/p at every evaluation):

    a(t) = Phi(alpha + beta * t)
    P_i  = Phi((alpha + beta*ubar/d_i) / sqrt(1 + beta^2*(1 + tauc^2/d_i^2)))
    nll  = reitsma_nll - sum_i log a(t_i) + sum_i log P_i

Step selection model (the cutoff form; beta is the publish probability of
a non-significant study and is solved from the same marginal identity):

    a(t) = 1{t >= u} + beta * 1{t < u}
    P_i  = beta + (1 - beta) * (1 - Phi((u*d_i - m_i) / sigma_i))
"""
from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr, ndtr

BACKEND_NAME = "ref"

_LOG_2PI = float(np.log(2.0 * np.pi))
_EXP_CAP = 700.0  # exp() overflow guard for 1/Phi terms inside bisection


# ---------------------------------------------------------------------------
# bivariate normal (Reitsma) likelihood
# ---------------------------------------------------------------------------

def reitsma_nll(theta, y1, y2, s1sq, s2sq):
    """Negative log-likelihood of the bivariate normal random-effects model."""
    mu1, mu2, t1, t2, rho = theta
    v11 = t1 * t1 + s1sq
    v22 = t2 * t2 + s2sq
    v12 = rho * t1 * t2
    det = v11 * v22 - v12 * v12
    if np.any(det <= 0.0) or np.any(v11 <= 0.0):
        return np.inf
    r1 = y1 - mu1
    r2 = y2 - mu2
    quad = (v22 * r1 * r1 - 2.0 * v12 * r1 * r2 + v11 * r2 * r2) / det
    return float(0.5 * np.sum(np.log(det) + quad) + y1.size * _LOG_2PI)


def reitsma_nll_grad(theta, y1, y2, s1sq, s2sq):
    """(nll, gradient) on the natural scale (mu1, mu2, tau1, tau2, rho)."""
    mu1, mu2, t1, t2, rho = theta
    v11 = t1 * t1 + s1sq
    v22 = t2 * t2 + s2sq
    v12 = rho * t1 * t2
    det = v11 * v22 - v12 * v12
    if np.any(det <= 0.0) or np.any(v11 <= 0.0):
        return np.inf, np.full(5, np.nan)
    r1 = y1 - mu1
    r2 = y2 - mu2
    # inverse elements
    i11 = v22 / det
    i22 = v11 / det
    i12 = -v12 / det
    quad = i11 * r1 * r1 + 2.0 * i12 * r1 * r2 + i22 * r2 * r2
    nll = float(0.5 * np.sum(np.log(det) + quad) + y1.size * _LOG_2PI)

    # d nll / d mu = -V^{-1} r summed
    w1 = i11 * r1 + i12 * r2
    w2 = i12 * r1 + i22 * r2
    g_mu1 = -float(np.sum(w1))
    g_mu2 = -float(np.sum(w2))

    # variance-parameter derivatives: dSigma/dpar with
    # dnll = 0.5 * sum [ tr(V^{-1} dV) - (V^{-1} r)' dV (V^{-1} r) ]
    def vpar_grad(d11, d12, d22):
        tr = i11 * d11 + 2.0 * i12 * d12 + i22 * d22
        qf = w1 * w1 * d11 + 2.0 * w1 * w2 * d12 + w2 * w2 * d22
        return 0.5 * float(np.sum(tr - qf))

    g_t1 = vpar_grad(2.0 * t1, rho * t2, 0.0)
    g_t2 = vpar_grad(0.0, rho * t1, 2.0 * t2)
    g_rho = vpar_grad(0.0, t1 * t2, 0.0)
    return nll, np.array([g_mu1, g_mu2, g_t1, g_t2, g_rho])


def reml_nll(psi, y1, y2, s1sq, s2sq):
    """Restricted NLL over variance parameters psi = (tau1, tau2, rho).

    The mean is profiled out by GLS; the restricted likelihood subtracts
    half the log-determinant of the summed precision from the profile
    log-likelihood.
    """
    t1, t2, rho = psi
    v11 = t1 * t1 + s1sq
    v22 = t2 * t2 + s2sq
    v12 = rho * t1 * t2
    det = v11 * v22 - v12 * v12
    if np.any(det <= 0.0):
        return np.inf
    i11 = v22 / det
    i22 = v11 / det
    i12 = -v12 / det
    # GLS mean: (sum V^{-1})^{-1} sum V^{-1} y
    a = float(np.sum(i11))
    b = float(np.sum(i12))
    c = float(np.sum(i22))
    p1 = float(np.sum(i11 * y1 + i12 * y2))
    p2 = float(np.sum(i12 * y1 + i22 * y2))
    dprec = a * c - b * b
    if dprec <= 0.0:
        return np.inf
    mu1 = (c * p1 - b * p2) / dprec
    mu2 = (a * p2 - b * p1) / dprec
    r1 = y1 - mu1
    r2 = y2 - mu2
    quad = i11 * r1 * r1 + 2.0 * i12 * r1 * r2 + i22 * r2 * r2
    profile = 0.5 * np.sum(np.log(det) + quad) + y1.size * _LOG_2PI
    return float(profile + 0.5 * np.log(dprec))


def gls_mean(psi, y1, y2, s1sq, s2sq):
    """GLS mean and its 2x2 covariance at fixed variance parameters."""
    t1, t2, rho = psi
    v11 = t1 * t1 + s1sq
    v22 = t2 * t2 + s2sq
    v12 = rho * t1 * t2
    det = v11 * v22 - v12 * v12
    i11 = v22 / det
    i22 = v11 / det
    i12 = -v12 / det
    a = float(np.sum(i11))
    b = float(np.sum(i12))
    c = float(np.sum(i22))
    p1 = float(np.sum(i11 * y1 + i12 * y2))
    p2 = float(np.sum(i12 * y1 + i22 * y2))
    dprec = a * c - b * b
    mu = np.array([(c * p1 - b * p2) / dprec, (a * p2 - b * p1) / dprec])
    cov = np.array([[c, -b], [-b, a]]) / dprec
    return mu, cov


# ---------------------------------------------------------------------------
# binomial GLMM via adaptive Gauss-Hermite quadrature
# ---------------------------------------------------------------------------

def glmm_nll(theta, tp, n1, tn, n0, lc1, lc2, z, logw, adaptive=True, max_iter=200):
    """Negative marginal log-likelihood of the bivariate binomial GLMM.

    z, logw: 1-D physicists' Gauss-Hermite nodes and log-weights.
    lc1, lc2: per-study log binomial coefficients (precomputed).
    adaptive=False centers the rule at the random-effect mean instead of
    the per-study mode (plain Gauss-Hermite).
    """
    mu1, mu2, t1, t2, rho = theta
    if t1 <= 0.0 or t2 <= 0.0 or not -1.0 < rho < 1.0:
        return np.inf
    s11 = t1 * t1
    s22 = t2 * t2
    s12 = rho * t1 * t2
    dets = s11 * s22 - s12 * s12
    if dets <= 0.0:
        return np.inf
    k11 = s22 / dets
    k22 = s11 / dets
    k12 = -s12 / dets
    log_norm = -_LOG_2PI - 0.5 * np.log(dets)

    m = tp.size
    nq = z.size
    z1 = np.repeat(z, nq)
    z2 = np.tile(z, nq)
    lw = np.repeat(logw, nq) + np.tile(logw, nq) + z1 * z1 + z2 * z2

    total = 0.0
    for i in range(m):
        e1, e2 = mu1, mu2
        if adaptive:
            # damped Newton on the strictly concave log-integrand
            for _ in range(max_iter):
                p1 = _expit(e1)
                p2 = _expit(e2)
                g1 = tp[i] - n1[i] * p1 - (k11 * (e1 - mu1) + k12 * (e2 - mu2))
                g2 = tn[i] - n0[i] * p2 - (k12 * (e1 - mu1) + k22 * (e2 - mu2))
                h11 = n1[i] * p1 * (1.0 - p1) + k11
                h22 = n0[i] * p2 * (1.0 - p2) + k22
                h12 = k12
                dh = h11 * h22 - h12 * h12
                d1 = (h22 * g1 - h12 * g2) / dh
                d2 = (h11 * g2 - h12 * g1) / dh
                e1 += d1
                e2 += d2
                if abs(d1) < 1e-11 and abs(d2) < 1e-11:
                    break
            p1 = _expit(e1)
            p2 = _expit(e2)
            h11 = n1[i] * p1 * (1.0 - p1) + k11
            h22 = n0[i] * p2 * (1.0 - p2) + k22
            h12 = k12
        else:
            h11, h22, h12 = k11, k22, k12
        # L = chol inverse of the (negated) Hessian: cov = H^{-1}
        dh = h11 * h22 - h12 * h12
        if dh <= 0.0:
            return np.inf
        c11 = h22 / dh
        c22 = h11 / dh
        c12 = -h12 / dh
        l11 = np.sqrt(c11)
        l21 = c12 / l11
        l22 = np.sqrt(c22 - l21 * l21)
        # nodes: (e1, e2) + sqrt(2) * L @ z
        q1 = e1 + np.sqrt(2.0) * l11 * z1
        q2 = e2 + np.sqrt(2.0) * (l21 * z1 + l22 * z2)
        h = (
            lc1[i] + tp[i] * q1 - n1[i] * np.logaddexp(0.0, q1)
            + lc2[i] + tn[i] * q2 - n0[i] * np.logaddexp(0.0, q2)
        )
        d1 = q1 - mu1
        d2 = q2 - mu2
        h += log_norm - 0.5 * (k11 * d1 * d1 + 2.0 * k12 * d1 * d2 + k22 * d2 * d2)
        s = h + lw
        smax = s.max()
        log_int = np.log(2.0) + np.log(l11 * l22) + smax + np.log(np.sum(np.exp(s - smax)))
        total -= log_int
    return float(total)


def _expit(x):
    if x >= 0.0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# probit selection model
# ---------------------------------------------------------------------------

def probit_publish_probs(theta, beta, c1, alpha, s1sq, s2sq):
    """Model-implied publication probability of each observed study."""
    mu1, mu2, t1, t2, rho = theta
    c2 = np.sqrt(max(1.0 - c1 * c1, 0.0))
    d2 = c1 * c1 * s1sq + c2 * c2 * s2sq
    d = np.sqrt(d2)
    ubar = c1 * mu1 + c2 * mu2
    tauc2 = c1 * c1 * t1 * t1 + c2 * c2 * t2 * t2 + 2.0 * c1 * c2 * rho * t1 * t2
    denom = np.sqrt(1.0 + beta * beta * (1.0 + tauc2 / d2))
    return ndtr((alpha + beta * ubar / d) / denom)


def _probit_inv_prob_sum(theta, beta, c1, alpha, s1sq, s2sq):
    mu1, mu2, t1, t2, rho = theta
    c2 = np.sqrt(max(1.0 - c1 * c1, 0.0))
    d2 = c1 * c1 * s1sq + c2 * c2 * s2sq
    d = np.sqrt(d2)
    ubar = c1 * mu1 + c2 * mu2
    tauc2 = c1 * c1 * t1 * t1 + c2 * c2 * t2 * t2 + 2.0 * c1 * c2 * rho * t1 * t2
    denom = np.sqrt(1.0 + beta * beta * (1.0 + tauc2 / d2))
    logp = log_ndtr((alpha + beta * ubar / d) / denom)
    return float(np.sum(np.exp(np.minimum(-logp, _EXP_CAP))))


def probit_solve_alpha(theta, beta, c1, p, s1sq, s2sq, tol=1e-12, max_iter=200):
    """Root of sum_i 1/P_i(alpha) = M/p; decreasing in alpha, always exists."""
    m = s1sq.size
    target = m / p

    def g(a):
        return _probit_inv_prob_sum(theta, beta, c1, a, s1sq, s2sq) - target

    lo, hi = -5.0, 3.0
    while g(hi) > 0.0:
        hi += 2.0
        if hi > 1e4:
            return np.nan
    while g(lo) < 0.0:
        lo -= 2.0
        if lo < -1e4:
            return np.nan
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def probit_cond_nll(theta, beta, c1, p, y1, y2, s1sq, s2sq):
    """Conditional NLL of observed studies under the probit selection model."""
    base = reitsma_nll(theta, y1, y2, s1sq, s2sq)
    if not np.isfinite(base) or p >= 1.0:
        return base
    alpha = probit_solve_alpha(theta, beta, c1, p, s1sq, s2sq)
    if not np.isfinite(alpha):
        return np.inf
    mu1, mu2, t1, t2, rho = theta
    c2 = np.sqrt(max(1.0 - c1 * c1, 0.0))
    d2 = c1 * c1 * s1sq + c2 * c2 * s2sq
    d = np.sqrt(d2)
    t_obs = (c1 * y1 + c2 * y2) / d
    ubar = c1 * mu1 + c2 * mu2
    tauc2 = c1 * c1 * t1 * t1 + c2 * c2 * t2 * t2 + 2.0 * c1 * c2 * rho * t1 * t2
    denom = np.sqrt(1.0 + beta * beta * (1.0 + tauc2 / d2))
    l_obs = float(np.sum(log_ndtr(alpha + beta * t_obs)))
    l_marg = float(np.sum(log_ndtr((alpha + beta * ubar / d) / denom)))
    return base - l_obs + l_marg


# ---------------------------------------------------------------------------
# step selection model
# ---------------------------------------------------------------------------

def step_sig_probs(theta, c1, c2, u, s1sq, s2sq):
    """P(t_i >= u) for each study under the model."""
    mu1, mu2, t1, t2, rho = theta
    d = np.sqrt(c1 * c1 * s1sq + c2 * c2 * s2sq)
    m = c1 * mu1 + c2 * mu2
    var = (
        c1 * c1 * (t1 * t1 + s1sq)
        + c2 * c2 * (t2 * t2 + s2sq)
        + 2.0 * c1 * c2 * rho * t1 * t2
    )
    return 1.0 - ndtr((u * d - m) / np.sqrt(var))


def step_publish_probs(theta, c1, c2, u, beta, s1sq, s2sq):
    return beta + (1.0 - beta) * step_sig_probs(theta, c1, c2, u, s1sq, s2sq)


def step_solve_beta(theta, c1, c2, u, p, s1sq, s2sq, tol=1e-10, max_iter=200):
    """Root in beta of sum_i 1/p_i(beta) = M/p; nan when unattainable."""
    if p >= 1.0:
        return 1.0
    m = s1sq.size
    target = m / p
    psig = step_sig_probs(theta, c1, c2, u, s1sq, s2sq)

    def g(beta):
        pi = beta + (1.0 - beta) * psig
        with np.errstate(divide="ignore", over="ignore"):
            return float(np.sum(np.minimum(1.0 / pi, np.exp(_EXP_CAP)))) - target

    if g(0.0) < 0.0:
        return np.nan  # even full suppression cannot reach this p
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def step_cond_nll(theta, c1, c2, u, p, y1, y2, s1sq, s2sq):
    """Conditional NLL under the step selection model; beta profiled."""
    base = reitsma_nll(theta, y1, y2, s1sq, s2sq)
    if not np.isfinite(base) or p >= 1.0:
        return base
    beta = step_solve_beta(theta, c1, c2, u, p, s1sq, s2sq)
    if not np.isfinite(beta):
        return np.inf
    d = np.sqrt(c1 * c1 * s1sq + c2 * c2 * s2sq)
    t_obs = (c1 * y1 + c2 * y2) / d
    nonsig = t_obs < u
    n_nonsig = int(np.sum(nonsig))
    if n_nonsig and beta <= 0.0:
        return np.inf  # an observed non-significant study has likelihood 0
    pi = step_publish_probs(theta, c1, c2, u, beta, s1sq, s2sq)
    l_obs = n_nonsig * np.log(beta) if n_nonsig else 0.0
    return base - l_obs + float(np.sum(np.log(pi)))
