"""Meta-analysis of diagnostic test accuracy from 2x2 study tables.

Estimates summary ROC curves, operating points, and SAUC under bivariate
normal (ML/REML) and exact-binomial GLMM models, and quantifies the
impact of selective publication through a likelihood-based sensitivity
analysis over publication mechanisms and marginal selection
probabilities.  Exposed as a library, CLI (``dtameta``), and HTTP
service (``dtameta.service``).
"""
from .data import (
    BivariateSample,
    CorrectedTable,
    StudyRecord,
    StudyTable,
    continuity_correct,
    logit_transform,
    parse_dataset,
    prepare_sample,
)
from .descriptives import forest_series, scatter_data, study_metrics
from .funnel import asymmetry_test, funnel_data
from .glmm import QuadratureConfig, fit_glmm, glmm_nll
from .kernels import backend_name
from .reitsma import BivariateFit, BivariateParams, OptimOptions, fit_reitsma
from .selection import (
    SelectionFit,
    SelectionMechanism,
    SensitivityGrid,
    conditional_nll,
    fit_sensitivity,
    implied_unpublished,
    sensitivity_grid,
    solve_alpha,
    solve_beta,
    study_publish_prob,
    t_statistic,
)
from .simulate import SimConfig, apply_selection, simulate_population
from .sroc import SaucEstimate, SopEstimate, SrocCurve, sauc, sop, sroc_curve

__version__ = "0.1.0"

__all__ = [
    "BivariateFit",
    "BivariateParams",
    "BivariateSample",
    "CorrectedTable",
    "OptimOptions",
    "QuadratureConfig",
    "SaucEstimate",
    "SelectionFit",
    "SelectionMechanism",
    "SensitivityGrid",
    "SimConfig",
    "SopEstimate",
    "SrocCurve",
    "StudyRecord",
    "StudyTable",
    "apply_selection",
    "asymmetry_test",
    "backend_name",
    "conditional_nll",
    "continuity_correct",
    "fit_glmm",
    "fit_reitsma",
    "fit_sensitivity",
    "forest_series",
    "funnel_data",
    "glmm_nll",
    "implied_unpublished",
    "logit_transform",
    "parse_dataset",
    "prepare_sample",
    "sauc",
    "scatter_data",
    "sensitivity_grid",
    "simulate_population",
    "solve_alpha",
    "solve_beta",
    "sop",
    "sroc_curve",
    "study_metrics",
    "study_publish_prob",
    "t_statistic",
]
