"""Likelihood-based sensitivity analysis for selective publication.

Selection acts on the standardized linear contrast of each study's logit
accuracy pair,

    t_i = (c1*y1_i + c2*y2_i) / sqrt(c1^2*s1sq_i + c2^2*s2sq_i),

with (c1, c2) normalized and non-negative.  Named mechanisms fix the
contrast (sensitivity (1,0), specificity (0,1), lnDOR (1/sqrt2, 1/sqrt2));
"estimated" treats c1 as a free parameter in [0, 1].

Two selection-function forms are available:

probit (default)
    a(t) = Phi(alpha + beta*t).  beta >= 0 is the selection strength,
    estimated from the data; alpha is profiled at every likelihood
    evaluation from the marginal identity sum_i 1/P_i = M/p, where P_i is
    the model-implied publication probability of study i.  Always
    feasible for p in (0, 1].

step
    a(t) = 1 if t >= u else beta.  Here beta (the publication probability
    of a non-significant study) is itself profiled from the same marginal
    identity; a requested p below what full suppression of non-significant
    studies can produce is infeasible (E_CONSTRAINT).

At p = 1 both forms reduce exactly to the unadjusted ML fit.  The number
of implied unpublished studies is floor(M/p - M).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from . import kernels
from .data import BivariateSample
from .errors import (
    ConstraintError,
    DegenerateError,
    FitFailedError,
    ValueFormatError,
)
from .reitsma import (
    BivariateFit,
    BivariateParams,
    OptimOptions,
    covariance_from_hessian,
    fit_reitsma,
)
from .sroc import SaucEstimate, SopEstimate, sauc, sop, sroc_curve

SELECTION_FORMS = ("probit", "step")
MECHANISM_MODES = ("estimated", "lnDOR", "sensitivity", "specificity", "custom")
DEFAULT_P_GRID = (1.0, 0.8, 0.6, 0.4)
EXTENDED_P_GRID = tuple(round(1.0 - 0.1 * k, 1) for k in range(10))

_BOUNDS5 = [(-5.0, 5.0), (-5.0, 5.0), (1e-8, 3.0), (1e-8, 3.0), (-1.0, 1.0)]
_BETA_BOUNDS = (0.0, 2.0)
_C1_BOUNDS = (0.0, 1.0)


@dataclass(frozen=True)
class SelectionMechanism:
    """A selective-publication mechanism: contrast, cutoff, and form."""

    mode: str
    c1: float
    c2: float
    cutoff_u: float = 1.645
    form: str = "probit"

    def __post_init__(self):
        if self.mode not in MECHANISM_MODES:
            raise ValueFormatError(f"unknown mechanism mode {self.mode!r}")
        if self.form not in SELECTION_FORMS:
            raise ValueFormatError(f"unknown selection form {self.form!r}")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueFormatError("contrast weights must be non-negative")
        norm = math.hypot(self.c1, self.c2)
        if norm <= 0:
            raise DegenerateError("contrast weights must not both be zero")
        if abs(norm - 1.0) > 1e-9:
            object.__setattr__(self, "c1", self.c1 / norm)
            object.__setattr__(self, "c2", self.c2 / norm)

    @classmethod
    def preset(cls, name: str, form: str = "probit", cutoff_u: float = 1.645):
        """Named mechanisms: estimated | lnDOR | sensitivity | specificity."""
        table = {
            "estimated": (math.sqrt(0.5), math.sqrt(0.5)),
            "lnDOR": (math.sqrt(0.5), math.sqrt(0.5)),
            "sensitivity": (1.0, 0.0),
            "specificity": (0.0, 1.0),
        }
        if name not in table:
            raise ValueFormatError(f"unknown mechanism preset {name!r}")
        c1, c2 = table[name]
        return cls(mode=name, c1=c1, c2=c2, cutoff_u=cutoff_u, form=form)

    @classmethod
    def custom(cls, c1: float, c2: float, form: str = "probit", cutoff_u: float = 1.645):
        return cls(mode="custom", c1=c1, c2=c2, cutoff_u=cutoff_u, form=form)

    def to_json(self) -> dict:
        return {"mode": self.mode, "c1": self.c1, "c2": self.c2, "u": self.cutoff_u,
                "form": self.form}


@dataclass(frozen=True)
class SelectionFit:
    """One refit under a mechanism at marginal selection probability p."""

    params: BivariateParams
    beta: float | None            # probit: selection strength; step: P(publish | t < u)
    alpha: float | None           # probit intercept (profiled); None for step / p = 1
    c_hat: tuple[float, float] | None
    p: float
    cond_loglik: float
    sauc: SaucEstimate
    sop: SopEstimate
    n_unpublished: int
    converged: bool
    form: str
    mechanism: SelectionMechanism
    cov: np.ndarray | None = None
    curve: np.ndarray | None = None  # (n, 2) summary-curve samples (fpr, se)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "mu": [self.params.mu1, self.params.mu2],
            "tau": [self.params.tau1, self.params.tau2],
            "rho": self.params.rho,
            "beta": self.beta,
            "alpha": self.alpha,
            "c_hat": list(self.c_hat) if self.c_hat is not None else None,
            "sauc": self.sauc.to_json(),
            "sop": [self.sop.se, self.sop.sp],
            "n_unpublished": self.n_unpublished,
            "cond_loglik": self.cond_loglik,
            "converged": self.converged,
            "form": self.form,
            "curve": [[float(x), float(y)] for x, y in self.curve]
            if self.curve is not None
            else None,
        }


@dataclass(frozen=True)
class GridCell:
    mech_idx: int
    p: float
    fit: SelectionFit | None
    error: str | None = None

    def to_json(self) -> dict:
        out = {"mech_idx": self.mech_idx, "p": self.p}
        if self.fit is not None:
            out.update(self.fit.to_json())
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass(frozen=True)
class SensitivityGrid:
    mechanisms: tuple[SelectionMechanism, ...]
    p_values: tuple[float, ...]
    cells: tuple[GridCell, ...]
    curve_kind: str
    cancelled: bool = False

    def cell(self, mech_idx: int, p: float) -> GridCell:
        for c in self.cells:
            if c.mech_idx == mech_idx and c.p == p:
                return c
        raise KeyError((mech_idx, p))

    def to_json(self) -> dict:
        return {
            "mechanisms": [m.to_json() for m in self.mechanisms],
            "p_values": list(self.p_values),
            "curve_kind": self.curve_kind,
            "cells": [c.to_json() for c in self.cells],
            "cancelled": self.cancelled,
        }

    def to_csv(self) -> str:
        header = (
            "mech_idx,mode,form,p,mu1,mu2,tau1,tau2,rho,beta,alpha,c1,c2,"
            "sauc,sauc_lo,sauc_hi,se,sp,n_unpublished,converged,error"
        )
        lines = [header]
        for c in self.cells:
            mech = self.mechanisms[c.mech_idx]
            if c.fit is None:
                row = [c.mech_idx, mech.mode, mech.form, _fmt(c.p)] + [""] * 16 + [c.error or ""]
            else:
                f = c.fit
                c1, c2 = f.c_hat if f.c_hat is not None else (mech.c1, mech.c2)
                row = [
                    c.mech_idx, mech.mode, mech.form, _fmt(c.p),
                    _fmt(f.params.mu1), _fmt(f.params.mu2),
                    _fmt(f.params.tau1), _fmt(f.params.tau2), _fmt(f.params.rho),
                    _fmt(f.beta), _fmt(f.alpha), _fmt(c1), _fmt(c2),
                    _fmt(f.sauc.value), _fmt(f.sauc.ci_low), _fmt(f.sauc.ci_high),
                    _fmt(f.sop.se), _fmt(f.sop.sp),
                    f.n_unpublished, str(f.converged).lower(), "",
                ]
            lines.append(",".join(str(v) for v in row))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and not math.isfinite(v):
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# elementary operations
# ---------------------------------------------------------------------------

def t_statistic(y1, y2, s1sq, s2sq, mech: SelectionMechanism):
    """Standardized contrast statistic; vectorized over studies."""
    d2 = mech.c1**2 * np.asarray(s1sq) + mech.c2**2 * np.asarray(s2sq)
    if np.any(d2 <= 0):
        raise DegenerateError("zero denominator in t statistic")
    return (mech.c1 * np.asarray(y1) + mech.c2 * np.asarray(y2)) / np.sqrt(d2)


def study_publish_prob(
    params: BivariateParams,
    study_variances: tuple[float, float] | tuple[np.ndarray, np.ndarray],
    mech: SelectionMechanism,
    beta: float,
    alpha: float | None = None,
):
    """Model-implied marginal publication probability of a study.

    Step form: beta + (1-beta) * P(t >= u).  Probit form requires the
    profiled intercept alpha.
    """
    s1sq = np.atleast_1d(np.asarray(study_variances[0], dtype=float))
    s2sq = np.atleast_1d(np.asarray(study_variances[1], dtype=float))
    theta = params.to_array()
    if mech.form == "step":
        if not 0.0 <= beta <= 1.0:
            raise ValueFormatError("step-form beta is a probability in [0, 1]")
        out = kernels.step_publish_probs(
            theta, mech.c1, mech.c2, mech.cutoff_u, beta, s1sq, s2sq
        )
    else:
        if alpha is None:
            raise ValueFormatError("probit form needs the profiled alpha")
        out = kernels.probit_publish_probs(theta, beta, mech.c1, alpha, s1sq, s2sq)
    return out if out.size > 1 else float(out[0])


def solve_beta(
    params: BivariateParams, sample: BivariateSample, mech: SelectionMechanism, p: float
) -> float:
    """Step form: beta solving sum_i 1/p_i = M/p (Horvitz-Thompson size)."""
    _check_p(p)
    beta = kernels.step_solve_beta(
        params.to_array(), mech.c1, mech.c2, mech.cutoff_u, p, sample.s1sq, sample.s2sq
    )
    if not np.isfinite(beta):
        raise ConstraintError(
            f"mechanism cannot explain this much suppression (p = {p})"
        )
    return float(beta)


def solve_alpha(
    params: BivariateParams,
    sample: BivariateSample,
    mech: SelectionMechanism,
    beta: float,
    p: float,
) -> float:
    """Probit form: intercept alpha solving sum_i 1/P_i = M/p."""
    _check_p(p)
    alpha = kernels.probit_solve_alpha(
        params.to_array(), beta, mech.c1, p, sample.s1sq, sample.s2sq
    )
    if not np.isfinite(alpha):
        raise ConstraintError(f"selection constraint has no solution (p = {p})")
    return float(alpha)


def conditional_nll(
    params: BivariateParams,
    sample: BivariateSample,
    mech: SelectionMechanism,
    p: float,
    beta: float | None = None,
) -> float:
    """Conditional NLL of the observed studies given publication.

    Step form profiles beta internally (pass beta=None); probit needs the
    selection strength beta.  Infeasible points return +inf rather than
    raising, so optimizers can traverse them.
    """
    _check_p(p)
    theta = params.to_array()
    if mech.form == "step":
        if beta is not None:
            raise ValueFormatError("step-form beta is profiled; do not pass it")
        return float(
            kernels.step_cond_nll(
                theta, mech.c1, mech.c2, mech.cutoff_u, p,
                sample.y1, sample.y2, sample.s1sq, sample.s2sq,
            )
        )
    if beta is None:
        raise ValueFormatError("probit form needs beta (selection strength)")
    return float(
        kernels.probit_cond_nll(
            theta, beta, mech.c1, p, sample.y1, sample.y2, sample.s1sq, sample.s2sq
        )
    )


def implied_unpublished(m_observed: int, p: float) -> int:
    """floor(M/p - M): unpublished count implied by the marginal probability."""
    if m_observed < 1:
        raise ValueFormatError("m_observed must be >= 1")
    _check_p(p)
    return int(math.floor(m_observed / p - m_observed + 1e-9))


def _check_p(p: float):
    if not 0.0 < p <= 1.0:
        raise ValueFormatError(f"p must lie in (0, 1], got {p}")


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _reduction_fit(
    sample: BivariateSample,
    mech: SelectionMechanism,
    curve_kind: str,
    opts: OptimOptions | None,
    base_fit: BivariateFit | None,
) -> SelectionFit:
    """p = 1: exact reduction to the unadjusted ML fit."""
    fit = base_fit or fit_reitsma(sample, method="ml", opts=opts)
    return SelectionFit(
        params=fit.params,
        beta=1.0 if mech.form == "step" else None,
        alpha=None,
        c_hat=None,
        p=1.0,
        cond_loglik=fit.loglik,
        sauc=sauc(fit, kind=curve_kind),
        sop=sop(fit),
        n_unpublished=0,
        converged=fit.converged,
        form=mech.form,
        mechanism=mech,
        cov=fit.cov,
        curve=sroc_curve(fit.params, kind=curve_kind).points,
    )


def _bounded_minimize(f, x0, bounds, opts: OptimOptions):
    x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])
    r_nm = optimize.minimize(
        f, x0, method="Nelder-Mead", bounds=bounds,
        options=dict(maxiter=opts.max_iter, xatol=1e-9, fatol=1e-11),
    )
    r_qn = optimize.minimize(
        f, r_nm.x, method="L-BFGS-B", bounds=bounds,
        options=dict(maxiter=opts.max_iter, ftol=1e-12, gtol=opts.gtol),
    )
    if np.isfinite(r_qn.fun) and r_qn.fun <= r_nm.fun:
        r_qn.nit += r_nm.nit
        # a failed polish of an already-converged point is still converged
        if not r_qn.success and r_nm.success:
            if r_nm.fun - r_qn.fun <= 1e-8 * (1.0 + abs(r_nm.fun)):
                r_qn.success = True
        return r_qn
    return r_nm


def _psd_repair(cov: np.ndarray) -> np.ndarray:
    """Nearest-PSD projection by eigenvalue clipping (identity on PD input)."""
    cov = 0.5 * (cov + cov.T)
    if not np.all(np.isfinite(cov)):
        diag = np.where(np.isfinite(np.diag(cov)), np.abs(np.diag(cov)), 1e-12)
        return np.diag(np.maximum(diag, 1e-12))
    vals, vecs = np.linalg.eigh(cov)
    floor = max(float(np.abs(vals).max()) * 1e-10, 1e-12)
    if vals.min() >= floor:
        return cov
    vals = np.clip(vals, floor, None)
    return (vecs * vals) @ vecs.T


def _fd_hessian_bounded(f, x, bounds, rel_step=1e-5):
    """Central-difference Hessian with steps shrunk to respect bounds."""
    n = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    # steps may poke one h past a bound: the conditional NLL stays defined
    # there for beta and c1, while tau/rho excursions yield inf entries
    # that the caller's PSD repair absorbs
    for k in range(n):
        room = min(x[k] - lo[k] + h[k], hi[k] - x[k] + h[k])
        h[k] = min(h[k], max(room, 1e-9))
    hess = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        for j in range(i, n):
            if i == j:
                xp = x.copy(); xm = x.copy()
                xp[i] += h[i]; xm[i] -= h[i]
                hess[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / h[i] ** 2
            else:
                xpp = x.copy(); xpm = x.copy(); xmp = x.copy(); xmm = x.copy()
                xpp[[i, j]] += [h[i], h[j]]
                xpm[[i, j]] += [h[i], -h[j]]
                xmp[[i, j]] += [-h[i], h[j]]
                xmm[[i, j]] -= [h[i], h[j]]
                hess[i, j] = hess[j, i] = (
                    f(xpp) - f(xpm) - f(xmp) + f(xmm)
                ) / (4.0 * h[i] * h[j])
    return hess


def _step_feasible_start(f, x0: np.ndarray, mech: SelectionMechanism):
    """Shift the start down the contrast direction until f is finite."""
    if np.isfinite(f(x0)):
        return x0
    c1 = x0[5] if x0.size > 5 else mech.c1
    c2 = math.sqrt(max(1.0 - c1 * c1, 0.0)) if x0.size > 5 else mech.c2
    for delta in (0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0):
        trial = x0.copy()
        trial[0] = max(trial[0] - delta * c1, -5.0)
        trial[1] = max(trial[1] - delta * c2, -5.0)
        if np.isfinite(f(trial)):
            return trial
    return None


def fit_sensitivity(
    sample: BivariateSample,
    mech: SelectionMechanism,
    p: float,
    opts: OptimOptions | None = None,
    curve_kind: str = "sroc",
    warm: SelectionFit | None = None,
    base_fit: BivariateFit | None = None,
) -> SelectionFit:
    """Refit the model under a selection mechanism at marginal probability p.

    Starts from the p = 1 fit (or the previous grid cell via ``warm``).
    """
    _check_p(p)
    if len(sample) < 2:
        raise FitFailedError("model fitting needs at least 2 studies")
    opts = opts or OptimOptions()
    if p >= 1.0:
        return _reduction_fit(sample, mech, curve_kind, opts, base_fit)

    base = base_fit or fit_reitsma(sample, method="ml", opts=opts)
    y1, y2, s1, s2 = sample.y1, sample.y2, sample.s1sq, sample.s2sq
    estimated = mech.mode == "estimated"

    if mech.form == "probit":
        bounds = _BOUNDS5 + [_BETA_BOUNDS] + ([_C1_BOUNDS] if estimated else [])

        if estimated:
            def f(par):
                return kernels.probit_cond_nll(par[:5], par[5], par[6], p, y1, y2, s1, s2)
        else:
            def f(par):
                return kernels.probit_cond_nll(par[:5], par[5], mech.c1, p, y1, y2, s1, s2)

        cold = np.r_[base.params.to_array(), 1.0, ([mech.c1] if estimated else [])]
        starts = [cold]
        if warm is not None and warm.p < 1.0 and warm.beta is not None:
            w = np.r_[
                warm.params.to_array(),
                warm.beta,
                ([warm.c_hat[0] if warm.c_hat else mech.c1] if estimated else []),
            ]
            starts.insert(0, w)
    else:  # step form: 5 model params (+ c1), beta profiled inside
        bounds = list(_BOUNDS5) + ([_C1_BOUNDS] if estimated else [])

        if estimated:
            def f(par):
                c1 = par[5]
                c2 = math.sqrt(max(1.0 - c1 * c1, 0.0))
                return kernels.step_cond_nll(
                    par[:5], c1, c2, mech.cutoff_u, p, y1, y2, s1, s2
                )
        else:
            def f(par):
                return kernels.step_cond_nll(
                    par[:5], mech.c1, mech.c2, mech.cutoff_u, p, y1, y2, s1, s2
                )

        cold = np.r_[base.params.to_array(), ([mech.c1] if estimated else [])]
        starts = [cold]
        if warm is not None and warm.p < 1.0:
            w = np.r_[
                warm.params.to_array(),
                ([warm.c_hat[0] if warm.c_hat else mech.c1] if estimated else []),
            ]
            starts.insert(0, w)
        # the step constraint is infeasible when the start overstates the
        # significance rate; walking the mean down the contrast direction
        # always restores feasibility
        starts = [
            s for s in (_step_feasible_start(f, s, mech) for s in starts)
            if s is not None
        ]

    best = None
    for x0 in starts:
        try:
            res = _bounded_minimize(f, x0, bounds, opts)
        except (ValueError, FloatingPointError):
            continue
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        if mech.form == "step":
            raise ConstraintError(
                f"mechanism cannot explain this much suppression (p = {p})"
            )
        raise FitFailedError(f"selection fit did not converge (p = {p})")

    par = best.x
    params = BivariateParams.from_array(par[:5])
    if mech.form == "probit":
        beta = float(par[5])
        c1_hat = float(par[6]) if estimated else mech.c1
        c_hat = (c1_hat, math.sqrt(max(1.0 - c1_hat**2, 0.0))) if estimated else None
        alpha = solve_alpha(params, sample, replace(mech, c1=c1_hat,
                                                    c2=math.sqrt(max(1.0 - c1_hat**2, 0.0)))
                            if estimated else mech, beta, p)
    else:
        c1_hat = float(par[5]) if estimated else mech.c1
        c2_hat = math.sqrt(max(1.0 - c1_hat**2, 0.0))
        c_hat = (c1_hat, c2_hat) if estimated else None
        eff = replace(mech, c1=c1_hat, c2=c2_hat) if estimated else mech
        beta = solve_beta(params, sample, eff, p)
        alpha = None

    hess = _fd_hessian_bounded(f, par, bounds, opts.hess_rel_step)
    cov_full = covariance_from_hessian(hess)
    # estimates on a box boundary (e.g. beta = 0) can make the observed
    # information indefinite; repair so CIs and regions stay computable
    cov5 = _psd_repair(cov_full[:5, :5])

    fit_like = BivariateFit(
        params=params, cov=cov5, loglik=-float(best.fun), method=f"sa-{mech.form}",
        converged=bool(best.success), n_iter=int(best.nit), gradient_norm=np.nan,
    )
    return SelectionFit(
        params=params,
        beta=beta,
        alpha=alpha,
        c_hat=c_hat,
        p=p,
        cond_loglik=-float(best.fun),
        sauc=sauc(fit_like, kind=curve_kind),
        sop=sop(fit_like),
        n_unpublished=implied_unpublished(len(sample), p),
        converged=bool(best.success),
        form=mech.form,
        mechanism=mech,
        cov=cov5,
        curve=sroc_curve(params, kind=curve_kind).points,
    )


def sensitivity_grid(
    sample: BivariateSample,
    mechanisms: list[SelectionMechanism] | None = None,
    p_values: tuple[float, ...] = DEFAULT_P_GRID,
    curve_kind: str = "sroc",
    opts: OptimOptions | None = None,
    progress=None,
    should_stop=None,
) -> SensitivityGrid:
    """Fit every (mechanism, p) cell, cascading warm starts down each p grid.

    Cell failures are embedded, never fatal.  ``progress(done, total)`` is
    called after each cell; ``should_stop()`` is polled at cell boundaries.
    """
    if mechanisms is None:
        mechanisms = [
            SelectionMechanism.preset(m)
            for m in ("estimated", "lnDOR", "sensitivity", "specificity")
        ]
    p_values = tuple(float(p) for p in p_values)
    if not p_values or abs(p_values[0] - 1.0) > 1e-12:
        raise ValueFormatError("p grid must start at 1")
    if any(b >= a for a, b in zip(p_values, p_values[1:])):
        raise ValueFormatError("p grid must be strictly descending")
    for p in p_values:
        _check_p(p)

    opts = opts or OptimOptions()
    base = fit_reitsma(sample, method="ml", opts=opts)
    total = len(mechanisms) * len(p_values)
    done = 0
    cells: list[GridCell] = []
    cancelled = False

    for mi, mech in enumerate(mechanisms):
        warm: SelectionFit | None = None
        for p in p_values:
            if should_stop is not None and should_stop():
                cancelled = True
                break
            try:
                fit = fit_sensitivity(
                    sample, mech, p, opts=opts, curve_kind=curve_kind,
                    warm=warm, base_fit=base,
                )
                cells.append(GridCell(mech_idx=mi, p=p, fit=fit))
                warm = fit
            except Exception as exc:  # embed, keep going
                code = getattr(exc, "code", type(exc).__name__)
                cells.append(GridCell(mech_idx=mi, p=p, fit=None, error=f"{code}: {exc}"))
            done += 1
            if progress is not None:
                progress(done, total)
        if cancelled:
            break

    return SensitivityGrid(
        mechanisms=tuple(mechanisms),
        p_values=p_values,
        cells=tuple(cells),
        curve_kind=curve_kind,
        cancelled=cancelled,
    )
