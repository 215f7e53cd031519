"""Per-study accuracy metrics, forest-plot series, and ROC scatter data.

These are study-level summaries, not pooled estimates: the forest footer
reports min/median/max only.  Confidence intervals use the logit-Wald
construction on corrected counts so descriptives share one variance
convention with the models; likelihood-ratio CIs use the delta method on
the log scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import chi2, norm

from .data import BivariateSample, CorrectedTable
from .errors import EmptyInputError, ValueFormatError

FOREST_METRICS = ("se", "sp", "lnDOR", "lr_pos", "lr_neg")


@dataclass(frozen=True)
class MetricCI:
    est: float
    lo: float
    hi: float

    def to_json(self) -> dict:
        return {"est": self.est, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class StudyMetrics:
    id: str
    se: MetricCI
    sp: MetricCI
    lnDOR: MetricCI
    lr_pos: MetricCI
    lr_neg: MetricCI

    def metric(self, which: str) -> MetricCI:
        if which not in FOREST_METRICS:
            raise ValueFormatError(f"unknown metric {which!r}")
        return getattr(self, which)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            **{m: self.metric(m).to_json() for m in FOREST_METRICS},
        }


@dataclass(frozen=True)
class ScatterDatum:
    id: str
    fpr: float
    se: float
    fpr_lo: float = np.nan
    fpr_hi: float = np.nan
    se_lo: float = np.nan
    se_hi: float = np.nan
    region: np.ndarray | None = None  # (n, 2) closed polyline (fpr, se)

    def to_json(self) -> dict:
        out = {"id": self.id, "fpr": self.fpr, "se": self.se}
        if self.region is None:
            out.update(
                fpr_lo=self.fpr_lo, fpr_hi=self.fpr_hi,
                se_lo=self.se_lo, se_hi=self.se_hi,
            )
        else:
            out["region"] = [[float(x), float(y)] for x, y in self.region]
        return out


def study_metrics(
    sample: BivariateSample, corrected: CorrectedTable, alpha: float = 0.05
) -> list[StudyMetrics]:
    """Per-study se, sp, lnDOR, and likelihood ratios with 1-alpha CIs."""
    if len(sample) == 0:
        raise EmptyInputError("empty sample")
    z = norm.ppf(1.0 - alpha / 2.0)
    counts = corrected.counts()
    out = []
    for i in range(len(sample)):
        y1, y2 = sample.y1[i], sample.y2[i]
        s1, s2 = np.sqrt(sample.s1sq[i]), np.sqrt(sample.s2sq[i])
        tp, fp, fn, tn = counts[i]
        se = MetricCI(float(expit(y1)), float(expit(y1 - z * s1)), float(expit(y1 + z * s1)))
        sp = MetricCI(float(expit(y2)), float(expit(y2 - z * s2)), float(expit(y2 + z * s2)))
        ld = y1 + y2
        sld = np.sqrt(sample.s1sq[i] + sample.s2sq[i])
        lndor = MetricCI(float(ld), float(ld - z * sld), float(ld + z * sld))
        # delta-method variances of the log likelihood ratios
        lrp = (tp / (tp + fn)) / (fp / (fp + tn))
        var_lrp = 1.0 / tp - 1.0 / (tp + fn) + 1.0 / fp - 1.0 / (fp + tn)
        lrn = (fn / (tp + fn)) / (tn / (fp + tn))
        var_lrn = 1.0 / fn - 1.0 / (tp + fn) + 1.0 / tn - 1.0 / (fp + tn)
        lr_pos = MetricCI(
            float(lrp),
            float(np.exp(np.log(lrp) - z * np.sqrt(var_lrp))),
            float(np.exp(np.log(lrp) + z * np.sqrt(var_lrp))),
        )
        lr_neg = MetricCI(
            float(lrn),
            float(np.exp(np.log(lrn) - z * np.sqrt(var_lrn))),
            float(np.exp(np.log(lrn) + z * np.sqrt(var_lrn))),
        )
        out.append(StudyMetrics(sample.ids[i], se, sp, lndor, lr_pos, lr_neg))
    return out


def scatter_data(
    sample: BivariateSample, shape: str = "interval", alpha: float = 0.05, region_points: int = 96
) -> list[ScatterDatum]:
    """Per-study ROC points with CI bars or confidence-region polylines."""
    if len(sample) == 0:
        raise EmptyInputError("empty sample")
    if shape not in ("interval", "region"):
        raise ValueFormatError(f"unknown scatter shape {shape!r}")
    z = norm.ppf(1.0 - alpha / 2.0)
    level = chi2.ppf(1.0 - alpha, df=2)
    out = []
    for i in range(len(sample)):
        y1, y2 = float(sample.y1[i]), float(sample.y2[i])
        s1, s2 = float(np.sqrt(sample.s1sq[i])), float(np.sqrt(sample.s2sq[i]))
        fpr = float(1.0 - expit(y2))
        se = float(expit(y1))
        if shape == "interval":
            out.append(
                ScatterDatum(
                    id=sample.ids[i], fpr=fpr, se=se,
                    fpr_lo=float(1.0 - expit(y2 + z * s2)),
                    fpr_hi=float(1.0 - expit(y2 - z * s2)),
                    se_lo=float(expit(y1 - z * s1)),
                    se_hi=float(expit(y1 + z * s1)),
                )
            )
        else:
            # within-study normal ellipse on the logit scale, mapped to ROC space
            angles = np.linspace(0.0, 2.0 * np.pi, region_points + 1)
            e1 = y1 + np.sqrt(level) * s1 * np.cos(angles)
            e2 = y2 + np.sqrt(level) * s2 * np.sin(angles)
            region = np.column_stack([1.0 - expit(e2), expit(e1)])
            out.append(ScatterDatum(id=sample.ids[i], fpr=fpr, se=se, region=region))
    return out


def forest_series(metrics: list[StudyMetrics], which: str = "se") -> dict:
    """Ordered per-study rows plus a min/median/max footer (not pooled)."""
    if not metrics:
        raise EmptyInputError("empty metrics")
    if which not in FOREST_METRICS:
        raise ValueFormatError(f"unknown metric {which!r}")
    rows = [
        {"id": m.id, "est": m.metric(which).est, "lo": m.metric(which).lo,
         "hi": m.metric(which).hi}
        for m in metrics
    ]
    ests = np.array([r["est"] for r in rows])
    return {
        "metric": which,
        "rows": rows,
        "footer": {
            "min": float(ests.min()),
            "median": float(np.median(ests)),
            "max": float(ests.max()),
        },
    }
