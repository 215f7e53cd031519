"""Summary ROC geometry: curves, area under them, and the operating point.

The curve induced by the bivariate fit, as sensitivity over false
positive rate x:

    se(x) = expit(mu1 + r * (tau1/tau2) * (logit(1 - x) - mu2))

with r = rho for the regression-line ("sroc") variant and r = -1 for the
hierarchical ("hsroc") variant, which coincide when rho = -1.  The area
is integrated with a fixed Gauss-Legendre rule; its confidence interval
comes from a delta method on logit(SAUC) with central-difference
sensitivities to the five natural-scale parameters.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import expit, logit
from scipy.stats import chi2, norm

from .errors import SingularMatrixError, ValueFormatError
from .reitsma import BivariateFit, BivariateParams

CURVE_KINDS = ("sroc", "hsroc")
TAU2_DEGENERATE = 1e-8
_GL_NODES = 128


@dataclass(frozen=True)
class SrocCurve:
    kind: str
    points: np.ndarray  # (n, 2) of (fpr, se)
    params_used: BivariateParams

    def to_json(self) -> dict:
        return {"kind": self.kind, "points": [[float(x), float(y)] for x, y in self.points]}


@dataclass(frozen=True)
class SaucEstimate:
    value: float
    ci_low: float
    ci_high: float
    kind: str
    domain: tuple[float, float]

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "lo": self.ci_low,
            "hi": self.ci_high,
            "kind": self.kind,
            "domain": list(self.domain),
        }


@dataclass(frozen=True)
class SopEstimate:
    se: float
    sp: float
    region: np.ndarray  # (n, 2) closed polyline of (fpr, se)

    def to_json(self) -> dict:
        return {
            "se": self.se,
            "sp": self.sp,
            "region": [[float(x), float(y)] for x, y in self.region],
        }


def _params_of(fit: BivariateFit | BivariateParams) -> BivariateParams:
    return fit.params if isinstance(fit, BivariateFit) else fit


def curve_se(params: BivariateParams, x, kind: str = "sroc"):
    """Sensitivity of the summary curve at false positive rate(s) x."""
    if kind not in CURVE_KINDS:
        raise ValueFormatError(f"unknown curve kind {kind!r}")
    x = np.asarray(x, dtype=float)
    if params.tau2 < TAU2_DEGENERATE:
        return np.full_like(x, expit(params.mu1))
    r = params.rho if kind == "sroc" else -1.0
    slope = r * params.tau1 / params.tau2
    return expit(params.mu1 + slope * (logit(1.0 - x) - params.mu2))


def sroc_curve(
    fit: BivariateFit | BivariateParams, kind: str = "sroc", grid_n: int = 201
) -> SrocCurve:
    """Curve sampled at grid_n equally spaced fpr values on open (0, 1)."""
    params = _params_of(fit)
    if params.tau2 < TAU2_DEGENERATE:
        warnings.warn("tau2 ~ 0: summary curve degenerates to a constant")
    x = np.linspace(0.0, 1.0, grid_n + 2)[1:-1]
    se = curve_se(params, x, kind)
    return SrocCurve(kind=kind, points=np.column_stack([x, se]), params_used=params)


_V_CLIP = 36.0  # logit window; expit(-36) ~ 2e-16 makes tail loss negligible


def _v_window(domain) -> tuple[float, float]:
    lo, hi = domain
    vlo = float(logit(lo)) if lo > 0.0 else -_V_CLIP
    vhi = float(logit(hi)) if hi < 1.0 else _V_CLIP
    return max(vlo, -_V_CLIP), min(vhi, _V_CLIP)


def _sauc_value(params: BivariateParams, kind: str, domain, normalize: bool) -> float:
    """integral of se(x) dx via the substitution x = expit(v).

    The substitution removes the endpoint derivative singularities of the
    curve, leaving a smooth integrand that adaptive quadrature resolves to
    near machine precision.
    """
    lo, hi = domain
    vlo, vhi = _v_window(domain)

    def g(v):
        x = expit(v)
        return curve_se(params, x, kind) * x * (1.0 - x)

    val, _ = integrate.quad(g, vlo, vhi, epsabs=1e-13, epsrel=1e-12, limit=200)
    if normalize and (lo, hi) != (0.0, 1.0):
        val /= hi - lo
    return float(val)


def sauc_gauss_legendre(
    params: BivariateParams,
    kind: str = "sroc",
    domain: tuple[float, float] = (0.0, 1.0),
    nodes: int = _GL_NODES,
    v_clip: float = 25.0,
) -> float:
    """Fixed Gauss-Legendre evaluation on the same substituted integrand.

    Used by the quadrature-stability checks; the production path is the
    adaptive rule in ``sauc``.  The narrower default window trades a
    ~1e-11 shared truncation for spectral node efficiency.
    """
    lo, hi = domain
    vlo = float(logit(lo)) if lo > 0.0 else -v_clip
    vhi = float(logit(hi)) if hi < 1.0 else v_clip
    z, w = leggauss(nodes)
    v = 0.5 * (vhi - vlo) * z + 0.5 * (vhi + vlo)
    x = expit(v)
    return float(np.sum(0.5 * (vhi - vlo) * w * curve_se(params, x, kind) * x * (1.0 - x)))


def sauc(
    fit: BivariateFit | BivariateParams,
    kind: str = "sroc",
    domain: tuple[float, float] = (0.0, 1.0),
    normalize: bool = False,
    alpha: float = 0.05,
) -> SaucEstimate:
    """Area under the summary curve with a delta-method CI on the logit scale.

    When called with bare parameters (no covariance), the CI degenerates
    to the point value.
    """
    lo, hi = domain
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueFormatError(f"invalid integration domain {domain!r}")
    params = _params_of(fit)
    if params.tau2 < TAU2_DEGENERATE:
        warnings.warn("tau2 ~ 0: SAUC of a constant curve")
    value = _sauc_value(params, kind, domain, normalize)

    if not isinstance(fit, BivariateFit):
        return SaucEstimate(value, value, value, kind, domain)

    # sensitivities of SAUC to the natural parameters, central differences
    # (asymmetric near the tau >= 0 and |rho| <= 1 boundaries)
    base = params.to_array()
    grad = np.zeros(5)
    for k in range(5):
        h = 1e-5 * max(1.0, abs(base[k]))
        if k == 4:
            h = min(h, 0.5 * (1.0 - abs(base[k])) + 1e-12)
        plus, minus = base.copy(), base.copy()
        plus[k] += h
        minus[k] -= h
        if k in (2, 3):
            minus[k] = max(minus[k], 0.0)
        span = plus[k] - minus[k]
        grad[k] = (
            _sauc_value(BivariateParams.from_array(plus), kind, domain, normalize)
            - _sauc_value(BivariateParams.from_array(minus), kind, domain, normalize)
        ) / span

    var = float(grad @ fit.cov @ grad)
    if not np.isfinite(var) or var < 0.0 or not 0.0 < value < 1.0:
        return SaucEstimate(value, np.nan, np.nan, kind, domain)
    sd_logit = np.sqrt(var) / (value * (1.0 - value))
    z = norm.ppf(1.0 - alpha / 2.0)
    ci_low = float(expit(logit(value) - z * sd_logit))
    ci_high = float(expit(logit(value) + z * sd_logit))
    return SaucEstimate(value, ci_low, ci_high, kind, domain)


def ellipse_polyline(center: np.ndarray, cov: np.ndarray, level: float, n: int = 96) -> np.ndarray:
    """Closed boundary polyline of {z : (z-c)' cov^{-1} (z-c) <= level}."""
    vals, vecs = np.linalg.eigh(cov)
    if np.any(vals <= 0.0):
        raise SingularMatrixError("covariance for the confidence region is not positive definite")
    angles = np.linspace(0.0, 2.0 * np.pi, n + 1)
    circle = np.column_stack([np.cos(angles), np.sin(angles)])
    axes = vecs @ np.diag(np.sqrt(vals * level))
    return center + circle @ axes.T


def sop(fit: BivariateFit, alpha: float = 0.05, n_points: int = 96) -> SopEstimate:
    """Summary operating point with its confidence region in ROC space."""
    params = fit.params
    center = np.array([params.mu1, params.mu2])
    boundary = ellipse_polyline(center, fit.mu_cov(), chi2.ppf(1.0 - alpha, df=2), n_points)
    region = np.column_stack([1.0 - expit(boundary[:, 1]), expit(boundary[:, 0])])
    return SopEstimate(
        se=float(expit(params.mu1)),
        sp=float(expit(params.mu2)),
        region=region,
    )
