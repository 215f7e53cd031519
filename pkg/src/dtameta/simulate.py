"""Synthetic study populations with known truth, plus selective publication.

Ground-truth generator for estimator-recovery and calibration tests.
Randomness is counter-based (Philox) and keyed by (seed, study index,
purpose), so output is reproducible regardless of how generation is
parallelized or reordered.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import StudyRecord, StudyTable, prepare_sample
from .errors import ValueFormatError
from .reitsma import BivariateParams
from .selection import SelectionMechanism, t_statistic

ARM_LAWS = ("fixed", "uniform", "lognormal")

_PURPOSE = {"latent": 1, "arms": 2, "counts": 3, "select": 4}


@dataclass(frozen=True)
class SimConfig:
    params: BivariateParams
    n_studies: int
    arm_law: str = "fixed"
    arm_args: tuple = (200,)
    seed: int = 0

    def __post_init__(self):
        if self.arm_law not in ARM_LAWS:
            raise ValueFormatError(f"unknown arm size law {self.arm_law!r}")
        if self.n_studies < 1:
            raise ValueFormatError("n_studies must be >= 1")

    def to_json(self) -> dict:
        p = self.params
        return {
            "params": {"mu1": p.mu1, "mu2": p.mu2, "tau1": p.tau1, "tau2": p.tau2,
                       "rho": p.rho},
            "n_studies": self.n_studies,
            "arm_law": self.arm_law,
            "arm_args": list(self.arm_args),
            "seed": self.seed,
        }


def _rng(seed: int, study: int, purpose: str) -> np.random.Generator:
    key = (np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
           np.uint64(((study + 1) << 8) | _PURPOSE[purpose]))
    return np.random.Generator(np.random.Philox(key=np.array(key, dtype=np.uint64)))


def _draw_arm(cfg: SimConfig, study: int) -> tuple[int, int]:
    g = _rng(cfg.seed, study, "arms")
    if cfg.arm_law == "fixed":
        n = int(cfg.arm_args[0])
        return n, n
    if cfg.arm_law == "uniform":
        lo, hi = int(cfg.arm_args[0]), int(cfg.arm_args[1])
        draws = g.integers(lo, hi + 1, size=2)
        return int(draws[0]), int(draws[1])
    m, s = cfg.arm_args
    draws = np.maximum(1, np.round(g.lognormal(m, s, size=2))).astype(int)
    return int(draws[0]), int(draws[1])


def simulate_population(cfg: SimConfig) -> tuple[StudyTable, dict]:
    """Draw a population of studies; returns the table and the latent truth."""
    p = cfg.params
    chol = np.linalg.cholesky(
        p.sigma() + 1e-15 * np.eye(2)
    ) if p.tau1 > 0 or p.tau2 > 0 else np.zeros((2, 2))
    records = []
    latent_se = []
    latent_sp = []
    for i in range(cfg.n_studies):
        z = _rng(cfg.seed, i, "latent").standard_normal(2)
        eta = np.array([p.mu1, p.mu2]) + chol @ z
        n_dis, n_hea = _draw_arm(cfg, i)
        g = _rng(cfg.seed, i, "counts")
        se_i, sp_i = float(expit(eta[0])), float(expit(eta[1]))
        tp = int(g.binomial(n_dis, se_i))
        tn = int(g.binomial(n_hea, sp_i))
        records.append(
            StudyRecord(id=f"sim_{i + 1}", tp=tp, fp=n_hea - tn, fn=n_dis - tp, tn=tn)
        )
        latent_se.append(se_i)
        latent_sp.append(sp_i)
    table = StudyTable(studies=tuple(records), source_name=f"sim(seed={cfg.seed})")
    truth = {
        "config": cfg.to_json(),
        "latent_se": latent_se,
        "latent_sp": latent_sp,
    }
    return table, truth


def apply_selection(
    table: StudyTable,
    mech: SelectionMechanism,
    beta: float,
    correction: str = "zero-studies-only",
    seed: int = 0,
) -> tuple[StudyTable, float]:
    """Step-selection on observed t: keep t >= u, else keep with probability beta.

    Selection sees the post-correction statistics, mirroring what a real
    editorial process sees (reported results).  Returns the published
    table and the empirical publication fraction.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueFormatError("beta must lie in [0, 1]")
    sample = prepare_sample(table, correction)
    t = t_statistic(sample.y1, sample.y2, sample.s1sq, sample.s2sq, mech)
    kept = []
    for i, rec in enumerate(table.studies):
        if t[i] >= mech.cutoff_u:
            kept.append(rec)
        elif _rng(seed, i, "select").uniform() < beta:
            kept.append(rec)
    empirical_p = len(kept) / len(table)
    if not kept:
        raise ValueFormatError("selection removed every study")
    return StudyTable(studies=tuple(kept), source_name=table.source_name), empirical_p
