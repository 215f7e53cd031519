"""Funnel-plot data and the ESS-weighted regression asymmetry test on lnDOR.

The precision axis is 1/sqrt(ESS) with ESS = 4*n1*n0/(n1+n0) computed
from raw arm sizes; the asymmetry test regresses lnDOR on 1/sqrt(ESS)
with ESS weights and reports the two-sided slope p-value (t, M-2 df).
This method has low power; treat a non-significant result accordingly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import BivariateSample, StudyTable
from .errors import EmptyInputError, TooFewStudiesError


@dataclass(frozen=True)
class FunnelDatum:
    id: str
    lnDOR: float
    inv_sqrt_ess: float

    def to_json(self) -> dict:
        return {"id": self.id, "lnDOR": self.lnDOR, "inv_sqrt_ess": self.inv_sqrt_ess}


@dataclass(frozen=True)
class FunnelResult:
    points: tuple[FunnelDatum, ...]
    pooled_lnDOR: float
    slope: float
    se_slope: float
    t_value: float
    p_value: float

    def to_json(self) -> dict:
        return {
            "points": [pt.to_json() for pt in self.points],
            "pooled": self.pooled_lnDOR,
            "test": {
                "slope": self.slope,
                "se_slope": self.se_slope,
                "t_value": self.t_value,
                "p_value": self.p_value,
            },
        }


def _ess(table: StudyTable) -> np.ndarray:
    counts = table.counts()
    n1 = counts[:, 0] + counts[:, 2]  # tp + fn
    n0 = counts[:, 3] + counts[:, 1]  # tn + fp
    return 4.0 * n1 * n0 / (n1 + n0)


def funnel_data(sample: BivariateSample, table: StudyTable) -> tuple[list[FunnelDatum], float]:
    """Per-study funnel points and the inverse-variance pooled lnDOR line."""
    if len(sample) < 2:
        raise EmptyInputError("funnel needs at least 2 studies")
    lndor = sample.y1 + sample.y2
    ess = _ess(table)
    w = 1.0 / (sample.s1sq + sample.s2sq)
    pooled = float(np.sum(w * lndor) / np.sum(w))
    points = [
        FunnelDatum(sample.ids[i], float(lndor[i]), float(1.0 / np.sqrt(ess[i])))
        for i in range(len(sample))
    ]
    return points, pooled


def asymmetry_test(sample: BivariateSample, table: StudyTable) -> FunnelResult:
    """ESS-weighted regression of lnDOR on 1/sqrt(ESS); slope t-test."""
    m = len(sample)
    if m < 3:
        raise TooFewStudiesError("asymmetry test needs at least 3 studies")
    points, pooled = funnel_data(sample, table)
    y = sample.y1 + sample.y2
    x = np.array([pt.inv_sqrt_ess for pt in points])
    w = _ess(table)

    sw = np.sum(w)
    xbar = np.sum(w * x) / sw
    ybar = np.sum(w * y) / sw
    sxx = np.sum(w * (x - xbar) ** 2)
    if sxx <= 1e-300:  # no precision spread: nothing to regress on
        return FunnelResult(
            points=tuple(points), pooled_lnDOR=pooled,
            slope=0.0, se_slope=0.0, t_value=0.0, p_value=1.0,
        )
    slope = float(np.sum(w * (x - xbar) * (y - ybar)) / sxx)
    intercept = ybar - slope * xbar
    resid = y - intercept - slope * x
    dof = m - 2
    sigma2 = float(np.sum(w * resid**2) / dof)
    se_slope = float(np.sqrt(sigma2 / sxx))
    if se_slope == 0.0:
        t_value, p_value = 0.0, 1.0
    else:
        t_value = slope / se_slope
        p_value = float(2.0 * stats.t.sf(abs(t_value), dof))
    return FunnelResult(
        points=tuple(points),
        pooled_lnDOR=pooled,
        slope=slope,
        se_slope=se_slope,
        t_value=float(t_value),
        p_value=p_value,
    )
