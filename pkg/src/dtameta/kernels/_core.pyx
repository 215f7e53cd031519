# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the likelihood kernels in ``_ref``.

Same math, same profiling/bisection algorithms, per-study C loops instead
of vectorized numpy.  See ``_ref`` for the model formulas; keep the two
files in lockstep (the parity test suite compares them).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport atanh, erfc, exp, fabs, isfinite, log, log1p, sqrt, tanh

cnp.import_array()

BACKEND_NAME = "core"

cdef double LOG_2PI = 1.8378770664093453
cdef double SQRT1_2 = 0.7071067811865476
cdef double LOG_SQRT_2PI = 0.9189385332046727
cdef double EXP_CAP = 700.0


cdef inline double _expit(double x) nogil:
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    cdef double e = exp(x)
    return e / (1.0 + e)


cdef inline double _log1pexp(double x) nogil:
    # log(1 + e^x), stable for both tails
    if x > 35.0:
        return x
    if x < -35.0:
        return exp(x)
    return log1p(exp(x))


cdef inline double _ndtr(double z) nogil:
    return 0.5 * erfc(-z * SQRT1_2)


cdef inline double _log_ndtr(double z) nogil:
    # erfc path until it underflows, then the 4-term asymptotic series
    cdef double z2, corr
    if z > -37.0:
        return log(0.5 * erfc(-z * SQRT1_2))
    z2 = z * z
    corr = log1p(-1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2))
    return -0.5 * z2 - log(-z) - LOG_SQRT_2PI + corr


# ---------------------------------------------------------------------------
# bivariate normal (Reitsma) likelihood
# ---------------------------------------------------------------------------

def reitsma_nll(theta, double[::1] y1, double[::1] y2,
                double[::1] s1sq, double[::1] s2sq):
    cdef double mu1 = theta[0], mu2 = theta[1]
    cdef double t1 = theta[2], t2 = theta[3], rho = theta[4]
    cdef Py_ssize_t i, m = y1.shape[0]
    cdef double t11 = t1 * t1, t22 = t2 * t2, t12 = rho * t1 * t2
    cdef double v11, v22, det, r1, r2, acc = 0.0
    for i in range(m):
        v11 = t11 + s1sq[i]
        v22 = t22 + s2sq[i]
        det = v11 * v22 - t12 * t12
        if det <= 0.0 or v11 <= 0.0:
            return float("inf")
        r1 = y1[i] - mu1
        r2 = y2[i] - mu2
        acc += log(det) + (v22 * r1 * r1 - 2.0 * t12 * r1 * r2 + v11 * r2 * r2) / det
    return 0.5 * acc + m * LOG_2PI


def reitsma_nll_grad(theta, double[::1] y1, double[::1] y2,
                     double[::1] s1sq, double[::1] s2sq):
    cdef double mu1 = theta[0], mu2 = theta[1]
    cdef double t1 = theta[2], t2 = theta[3], rho = theta[4]
    cdef Py_ssize_t i, m = y1.shape[0]
    cdef double t11 = t1 * t1, t22 = t2 * t2, t12 = rho * t1 * t2
    cdef double v11, v22, det, r1, r2, i11, i22, i12, w1, w2
    cdef double acc = 0.0
    cdef double g_mu1 = 0.0, g_mu2 = 0.0, g_t1 = 0.0, g_t2 = 0.0, g_rho = 0.0
    cdef double d11, d12, d22, tr, qf
    for i in range(m):
        v11 = t11 + s1sq[i]
        v22 = t22 + s2sq[i]
        det = v11 * v22 - t12 * t12
        if det <= 0.0 or v11 <= 0.0:
            return float("inf"), np.full(5, np.nan)
        r1 = y1[i] - mu1
        r2 = y2[i] - mu2
        i11 = v22 / det
        i22 = v11 / det
        i12 = -t12 / det
        acc += log(det) + i11 * r1 * r1 + 2.0 * i12 * r1 * r2 + i22 * r2 * r2
        w1 = i11 * r1 + i12 * r2
        w2 = i12 * r1 + i22 * r2
        g_mu1 -= w1
        g_mu2 -= w2
        # dSigma/dtau1 = [[2 t1, rho t2], [rho t2, 0]]
        d11 = 2.0 * t1; d12 = rho * t2
        tr = i11 * d11 + 2.0 * i12 * d12
        qf = w1 * w1 * d11 + 2.0 * w1 * w2 * d12
        g_t1 += 0.5 * (tr - qf)
        # dSigma/dtau2 = [[0, rho t1], [rho t1, 2 t2]]
        d12 = rho * t1; d22 = 2.0 * t2
        tr = 2.0 * i12 * d12 + i22 * d22
        qf = 2.0 * w1 * w2 * d12 + w2 * w2 * d22
        g_t2 += 0.5 * (tr - qf)
        # dSigma/drho = [[0, t1 t2], [t1 t2, 0]]
        d12 = t1 * t2
        tr = 2.0 * i12 * d12
        qf = 2.0 * w1 * w2 * d12
        g_rho += 0.5 * (tr - qf)
    return (0.5 * acc + m * LOG_2PI,
            np.array([g_mu1, g_mu2, g_t1, g_t2, g_rho]))


def reml_nll(psi, double[::1] y1, double[::1] y2,
             double[::1] s1sq, double[::1] s2sq):
    cdef double t1 = psi[0], t2 = psi[1], rho = psi[2]
    cdef Py_ssize_t i, m = y1.shape[0]
    cdef double t11 = t1 * t1, t22 = t2 * t2, t12 = rho * t1 * t2
    cdef double v11, v22, det, i11, i22, i12
    cdef double a = 0.0, b = 0.0, c = 0.0, p1 = 0.0, p2 = 0.0
    cdef double mu1, mu2, dprec, r1, r2, acc = 0.0
    for i in range(m):
        v11 = t11 + s1sq[i]
        v22 = t22 + s2sq[i]
        det = v11 * v22 - t12 * t12
        if det <= 0.0:
            return float("inf")
        i11 = v22 / det
        i22 = v11 / det
        i12 = -t12 / det
        a += i11
        b += i12
        c += i22
        p1 += i11 * y1[i] + i12 * y2[i]
        p2 += i12 * y1[i] + i22 * y2[i]
    dprec = a * c - b * b
    if dprec <= 0.0:
        return float("inf")
    mu1 = (c * p1 - b * p2) / dprec
    mu2 = (a * p2 - b * p1) / dprec
    for i in range(m):
        v11 = t11 + s1sq[i]
        v22 = t22 + s2sq[i]
        det = v11 * v22 - t12 * t12
        r1 = y1[i] - mu1
        r2 = y2[i] - mu2
        acc += log(det) + (v22 * r1 * r1 - 2.0 * t12 * r1 * r2 + v11 * r2 * r2) / det
    return 0.5 * acc + m * LOG_2PI + 0.5 * log(dprec)


# ---------------------------------------------------------------------------
# binomial GLMM via adaptive Gauss-Hermite quadrature
# ---------------------------------------------------------------------------

def glmm_nll(theta, double[::1] tp, double[::1] n1,
             double[::1] tn, double[::1] n0,
             double[::1] lc1, double[::1] lc2,
             double[::1] z, double[::1] logw,
             bint adaptive=True, int max_iter=200):
    cdef double mu1 = theta[0], mu2 = theta[1]
    cdef double t1 = theta[2], t2 = theta[3], rho = theta[4]
    if t1 <= 0.0 or t2 <= 0.0 or rho <= -1.0 or rho >= 1.0:
        return float("inf")
    cdef double s11 = t1 * t1, s22 = t2 * t2, s12 = rho * t1 * t2
    cdef double dets = s11 * s22 - s12 * s12
    if dets <= 0.0:
        return float("inf")
    cdef double k11 = s22 / dets, k22 = s11 / dets, k12 = -s12 / dets
    cdef double log_norm = -LOG_2PI - 0.5 * log(dets)
    cdef Py_ssize_t m = tp.shape[0], nq = z.shape[0]
    cdef Py_ssize_t i, j, k, it
    cdef double e1, e2, pr1, pr2, g1, g2, h11, h22, h12, dh, d1, d2
    cdef double c11, c22, c12, l11, l21, l22, q1, q2, hval, smax, ssum
    cdef double total = 0.0
    cdef double sqrt2 = sqrt(2.0)
    # scratch for one study's node values
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.empty(nq * nq)
    cdef double[::1] s = buf

    for i in range(m):
        e1 = mu1
        e2 = mu2
        if adaptive:
            for it in range(max_iter):
                pr1 = _expit(e1)
                pr2 = _expit(e2)
                g1 = tp[i] - n1[i] * pr1 - (k11 * (e1 - mu1) + k12 * (e2 - mu2))
                g2 = tn[i] - n0[i] * pr2 - (k12 * (e1 - mu1) + k22 * (e2 - mu2))
                h11 = n1[i] * pr1 * (1.0 - pr1) + k11
                h22 = n0[i] * pr2 * (1.0 - pr2) + k22
                h12 = k12
                dh = h11 * h22 - h12 * h12
                d1 = (h22 * g1 - h12 * g2) / dh
                d2 = (h11 * g2 - h12 * g1) / dh
                e1 += d1
                e2 += d2
                if fabs(d1) < 1e-11 and fabs(d2) < 1e-11:
                    break
            pr1 = _expit(e1)
            pr2 = _expit(e2)
            h11 = n1[i] * pr1 * (1.0 - pr1) + k11
            h22 = n0[i] * pr2 * (1.0 - pr2) + k22
            h12 = k12
        else:
            h11 = k11
            h22 = k22
            h12 = k12
        dh = h11 * h22 - h12 * h12
        if dh <= 0.0:
            return float("inf")
        c11 = h22 / dh
        c22 = h11 / dh
        c12 = -h12 / dh
        l11 = sqrt(c11)
        l21 = c12 / l11
        l22 = sqrt(c22 - l21 * l21)
        smax = -1e308
        for j in range(nq):
            for k in range(nq):
                q1 = e1 + sqrt2 * l11 * z[j]
                q2 = e2 + sqrt2 * (l21 * z[j] + l22 * z[k])
                hval = (lc1[i] + tp[i] * q1 - n1[i] * _log1pexp(q1)
                        + lc2[i] + tn[i] * q2 - n0[i] * _log1pexp(q2))
                d1 = q1 - mu1
                d2 = q2 - mu2
                hval += log_norm - 0.5 * (k11 * d1 * d1 + 2.0 * k12 * d1 * d2
                                          + k22 * d2 * d2)
                hval += z[j] * z[j] + z[k] * z[k] + logw[j] + logw[k]
                s[j * nq + k] = hval
                if hval > smax:
                    smax = hval
        ssum = 0.0
        for j in range(nq * nq):
            ssum += exp(s[j] - smax)
        total -= log(2.0) + log(l11 * l22) + smax + log(ssum)
    return total


# ---------------------------------------------------------------------------
# probit selection model
# ---------------------------------------------------------------------------

cdef double _probit_inv_sum(double alpha, double beta, double ubar,
                            double tauc2, double[::1] d2, Py_ssize_t m) nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0, d, denom, lp
    for i in range(m):
        d = sqrt(d2[i])
        denom = sqrt(1.0 + beta * beta * (1.0 + tauc2 / d2[i]))
        lp = _log_ndtr((alpha + beta * ubar / d) / denom)
        if -lp > EXP_CAP:
            acc += exp(EXP_CAP)
        else:
            acc += exp(-lp)
    return acc


cdef int _contrast_setup(theta, double beta, double c1,
                         double[::1] s1sq, double[::1] s2sq,
                         double[::1] d2_out,
                         double* ubar, double* tauc2) except -1:
    cdef double mu1 = theta[0], mu2 = theta[1]
    cdef double t1 = theta[2], t2 = theta[3], rho = theta[4]
    cdef double c1c = c1, c2
    cdef double rem = 1.0 - c1 * c1
    c2 = sqrt(rem) if rem > 0.0 else 0.0
    cdef Py_ssize_t i, m = s1sq.shape[0]
    for i in range(m):
        d2_out[i] = c1c * c1c * s1sq[i] + c2 * c2 * s2sq[i]
    ubar[0] = c1c * mu1 + c2 * mu2
    tauc2[0] = (c1c * c1c * t1 * t1 + c2 * c2 * t2 * t2
                + 2.0 * c1c * c2 * rho * t1 * t2)
    return 0


def probit_publish_probs(theta, double beta, double c1, double alpha,
                         double[::1] s1sq, double[::1] s2sq):
    cdef Py_ssize_t i, m = s1sq.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d2a = np.empty(m)
    cdef double[::1] d2 = d2a
    cdef double ubar = 0.0, tauc2 = 0.0
    _contrast_setup(theta, beta, c1, s1sq, s2sq, d2, &ubar, &tauc2)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m)
    cdef double d, denom
    for i in range(m):
        d = sqrt(d2[i])
        denom = sqrt(1.0 + beta * beta * (1.0 + tauc2 / d2[i]))
        out[i] = _ndtr((alpha + beta * ubar / d) / denom)
    return out


def probit_solve_alpha(theta, double beta, double c1, double p,
                       double[::1] s1sq, double[::1] s2sq,
                       double tol=1e-12, int max_iter=200):
    cdef Py_ssize_t m = s1sq.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d2a = np.empty(m)
    cdef double[::1] d2 = d2a
    cdef double ubar = 0.0, tauc2 = 0.0
    _contrast_setup(theta, beta, c1, s1sq, s2sq, d2, &ubar, &tauc2)
    cdef double target = m / p
    cdef double lo = -5.0, hi = 3.0, mid
    cdef int it
    while _probit_inv_sum(hi, beta, ubar, tauc2, d2, m) - target > 0.0:
        hi += 2.0
        if hi > 1e4:
            return float("nan")
    while _probit_inv_sum(lo, beta, ubar, tauc2, d2, m) - target < 0.0:
        lo -= 2.0
        if lo < -1e4:
            return float("nan")
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _probit_inv_sum(mid, beta, ubar, tauc2, d2, m) - target > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def probit_cond_nll(theta, double beta, double c1, double p,
                    double[::1] y1, double[::1] y2,
                    double[::1] s1sq, double[::1] s2sq):
    cdef double base = reitsma_nll(theta, y1, y2, s1sq, s2sq)
    if not isfinite(base) or p >= 1.0:
        return base
    cdef double alpha = probit_solve_alpha(theta, beta, c1, p, s1sq, s2sq)
    if not isfinite(alpha):
        return float("inf")
    cdef Py_ssize_t i, m = s1sq.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d2a = np.empty(m)
    cdef double[::1] d2 = d2a
    cdef double ubar = 0.0, tauc2 = 0.0
    _contrast_setup(theta, beta, c1, s1sq, s2sq, d2, &ubar, &tauc2)
    cdef double rem = 1.0 - c1 * c1
    cdef double c2 = sqrt(rem) if rem > 0.0 else 0.0
    cdef double d, denom, t_obs
    cdef double l_obs = 0.0, l_marg = 0.0
    for i in range(m):
        d = sqrt(d2[i])
        t_obs = (c1 * y1[i] + c2 * y2[i]) / d
        l_obs += _log_ndtr(alpha + beta * t_obs)
        denom = sqrt(1.0 + beta * beta * (1.0 + tauc2 / d2[i]))
        l_marg += _log_ndtr((alpha + beta * ubar / d) / denom)
    return base - l_obs + l_marg


# ---------------------------------------------------------------------------
# step selection model
# ---------------------------------------------------------------------------

def step_sig_probs(theta, double c1, double c2, double u,
                   double[::1] s1sq, double[::1] s2sq):
    cdef double mu1 = theta[0], mu2 = theta[1]
    cdef double t1 = theta[2], t2 = theta[3], rho = theta[4]
    cdef Py_ssize_t i, m = s1sq.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m)
    cdef double mlin = c1 * mu1 + c2 * mu2
    cdef double varc = (c1 * c1 * t1 * t1 + c2 * c2 * t2 * t2
                        + 2.0 * c1 * c2 * rho * t1 * t2)
    cdef double d, var
    for i in range(m):
        d = sqrt(c1 * c1 * s1sq[i] + c2 * c2 * s2sq[i])
        var = varc + c1 * c1 * s1sq[i] + c2 * c2 * s2sq[i]
        out[i] = 1.0 - _ndtr((u * d - mlin) / sqrt(var))
    return out


def step_publish_probs(theta, double c1, double c2, double u, double beta,
                       double[::1] s1sq, double[::1] s2sq):
    out = step_sig_probs(theta, c1, c2, u, s1sq, s2sq)
    return beta + (1.0 - beta) * out


cdef double _step_inv_sum(double beta, double[::1] psig, Py_ssize_t m) nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0, pi
    for i in range(m):
        pi = beta + (1.0 - beta) * psig[i]
        if pi <= 0.0:
            acc += exp(EXP_CAP)
        else:
            acc += 1.0 / pi
    return acc


def step_solve_beta(theta, double c1, double c2, double u, double p,
                    double[::1] s1sq, double[::1] s2sq,
                    double tol=1e-10, int max_iter=200):
    if p >= 1.0:
        return 1.0
    cdef Py_ssize_t m = s1sq.shape[0]
    psig_arr = step_sig_probs(theta, c1, c2, u, s1sq, s2sq)
    cdef double[::1] psig = psig_arr
    cdef double target = m / p
    if _step_inv_sum(0.0, psig, m) - target < 0.0:
        return float("nan")
    cdef double lo = 0.0, hi = 1.0, mid
    cdef int it
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _step_inv_sum(mid, psig, m) - target > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def step_cond_nll(theta, double c1, double c2, double u, double p,
                  double[::1] y1, double[::1] y2,
                  double[::1] s1sq, double[::1] s2sq):
    cdef double base = reitsma_nll(theta, y1, y2, s1sq, s2sq)
    if not isfinite(base) or p >= 1.0:
        return base
    cdef double beta = step_solve_beta(theta, c1, c2, u, p, s1sq, s2sq)
    if not isfinite(beta):
        return float("inf")
    psig_arr = step_sig_probs(theta, c1, c2, u, s1sq, s2sq)
    cdef double[::1] psig = psig_arr
    cdef Py_ssize_t i, m = s1sq.shape[0]
    cdef double d, t_obs, pi
    cdef int n_nonsig = 0
    cdef double l_pi = 0.0
    for i in range(m):
        d = sqrt(c1 * c1 * s1sq[i] + c2 * c2 * s2sq[i])
        t_obs = (c1 * y1[i] + c2 * y2[i]) / d
        if t_obs < u:
            n_nonsig += 1
        pi = beta + (1.0 - beta) * psig[i]
        l_pi += log(pi)
    if n_nonsig > 0 and beta <= 0.0:
        return float("inf")
    cdef double l_obs = n_nonsig * log(beta) if n_nonsig > 0 else 0.0
    return base - l_obs + l_pi
