"""Kernel backend selection.

The compiled extension (``_core``, Cython) is preferred when importable;
the numpy reference (``_ref``) is the fallback.  Set DTAMETA_BACKEND=ref
or DTAMETA_BACKEND=core to force a choice (forcing ``core`` raises if the
extension is missing, instead of silently falling back).
"""
from __future__ import annotations

import os

from . import _ref

_FUNCTIONS = (
    "reitsma_nll",
    "reitsma_nll_grad",
    "reml_nll",
    "gls_mean",
    "glmm_nll",
    "probit_publish_probs",
    "probit_solve_alpha",
    "probit_cond_nll",
    "step_sig_probs",
    "step_publish_probs",
    "step_solve_beta",
    "step_cond_nll",
)


def _load():
    choice = os.environ.get("DTAMETA_BACKEND", "").strip().lower()
    if choice == "ref":
        return _ref
    try:
        from . import _core
    except ImportError:
        if choice == "core":
            raise
        return _ref
    # gls_mean stays in numpy; the rest come from the extension
    return _core


_impl = _load()

BACKEND_NAME = getattr(_impl, "BACKEND_NAME", "ref")

reitsma_nll = getattr(_impl, "reitsma_nll", _ref.reitsma_nll)
reitsma_nll_grad = getattr(_impl, "reitsma_nll_grad", _ref.reitsma_nll_grad)
reml_nll = getattr(_impl, "reml_nll", _ref.reml_nll)
gls_mean = _ref.gls_mean
glmm_nll = getattr(_impl, "glmm_nll", _ref.glmm_nll)
probit_publish_probs = getattr(_impl, "probit_publish_probs", _ref.probit_publish_probs)
probit_solve_alpha = getattr(_impl, "probit_solve_alpha", _ref.probit_solve_alpha)
probit_cond_nll = getattr(_impl, "probit_cond_nll", _ref.probit_cond_nll)
step_sig_probs = getattr(_impl, "step_sig_probs", _ref.step_sig_probs)
step_publish_probs = getattr(_impl, "step_publish_probs", _ref.step_publish_probs)
step_solve_beta = getattr(_impl, "step_solve_beta", _ref.step_solve_beta)
step_cond_nll = getattr(_impl, "step_cond_nll", _ref.step_cond_nll)


def backend_name() -> str:
    """Which kernel implementation is live: 'core' (compiled) or 'ref'."""
    return BACKEND_NAME
