import numpy as np
import pytest
from scipy.special import expit
from scipy.stats import binom

import dtameta as dm
from dtameta.errors import FitFailedError, ValueFormatError


class TestNll:
    def test_degenerate_tau_reduces_to_binomial(self, toy_table):
        # tau -> 0: integral collapses onto the fixed effect
        mu1, mu2 = 0.9, 1.4
        p = dm.BivariateParams(mu1, mu2, 1e-7, 1e-7, 0.0)
        val = dm.glmm_nll(p, toy_table)
        direct = 0.0
        for r in toy_table.studies:
            direct -= binom.logpmf(r.tp, r.tp + r.fn, expit(mu1))
            direct -= binom.logpmf(r.tn, r.tn + r.fp, expit(mu2))
        assert val == pytest.approx(direct, rel=1e-8)

    def test_quadrature_refinement_covid(self, covid_table):
        p = dm.BivariateParams(1.88, 1.23, 1.03, 1.12, -0.44)
        v7 = dm.glmm_nll(p, covid_table, dm.QuadratureConfig(nodes_per_dim=7))
        v15 = dm.glmm_nll(p, covid_table, dm.QuadratureConfig(nodes_per_dim=15))
        v21 = dm.glmm_nll(p, covid_table, dm.QuadratureConfig(nodes_per_dim=21))
        assert abs(v7 - v15) / abs(v15) <= 1e-6
        assert abs(v7 - v21) / abs(v21) <= 1e-5

    def test_quadrature_refinement_sparse_counts(self):
        table, _ = dm.parse_dataset(
            "TP,FP,FN,TN\n5,1,2,7\n9,0,3,12\n4,2,1,9\n11,3,4,6\n"
        )
        p = dm.BivariateParams(0.8, 1.0, 0.5, 0.5, -0.3)
        v7 = dm.glmm_nll(p, table, dm.QuadratureConfig(nodes_per_dim=7))
        v21 = dm.glmm_nll(p, table, dm.QuadratureConfig(nodes_per_dim=21))
        assert abs(v7 - v21) / abs(v21) <= 1e-5

    def test_permutation_invariance(self, covid_table):
        p = dm.BivariateParams(1.8, 1.2, 1.0, 1.1, -0.4)
        rng = np.random.default_rng(5)
        order = rng.permutation(len(covid_table))
        permuted = dm.StudyTable(
            studies=tuple(covid_table.studies[i] for i in order)
        )
        assert dm.glmm_nll(p, covid_table) == pytest.approx(
            dm.glmm_nll(p, permuted), abs=1e-9
        )

    def test_arm_swap_identity(self, toy_table):
        # exact symmetry is quadrature-limited: the Cholesky-rotated node
        # cloud is not swap-invariant, so the residual shrinks with nodes
        p = dm.BivariateParams(0.9, 1.3, 0.6, 0.5, -0.4)
        swapped = dm.StudyTable(
            studies=tuple(
                dm.StudyRecord(id=r.id, tp=r.tn, fp=r.fn, fn=r.fp, tn=r.tp)
                for r in toy_table.studies
            )
        )
        ps = dm.BivariateParams(1.3, 0.9, 0.5, 0.6, -0.4)
        q7 = dm.QuadratureConfig(nodes_per_dim=7)
        q21 = dm.QuadratureConfig(nodes_per_dim=21)
        assert dm.glmm_nll(p, toy_table, q7) == pytest.approx(
            dm.glmm_nll(ps, swapped, q7), rel=1e-5
        )
        assert dm.glmm_nll(p, toy_table, q21) == pytest.approx(
            dm.glmm_nll(ps, swapped, q21), abs=1e-9
        )

    def test_gradient_self_consistency(self, covid_table):
        # central differences at two step sizes agree
        from dtameta.reitsma import from_working, to_working

        w0 = to_working(np.array([1.8, 1.2, 1.0, 1.1, -0.4]))

        def f(w):
            return dm.glmm_nll(
                dm.BivariateParams.from_array(from_working(w)), covid_table
            )

        for h1, h2 in [(1e-4, 2.5e-5)]:
            g1 = np.empty(5)
            g2 = np.empty(5)
            for k in range(5):
                for g, h in ((g1, h1), (g2, h2)):
                    wp, wm = w0.copy(), w0.copy()
                    wp[k] += h
                    wm[k] -= h
                    g[k] = (f(wp) - f(wm)) / (2 * h)
            assert np.linalg.norm(g1 - g2) / max(np.linalg.norm(g2), 1.0) <= 1e-5

    def test_nonadaptive_option(self, toy_table):
        p = dm.BivariateParams(0.9, 1.3, 0.4, 0.4, -0.3)
        va = dm.glmm_nll(p, toy_table, dm.QuadratureConfig(nodes_per_dim=21))
        vn = dm.glmm_nll(
            p, toy_table, dm.QuadratureConfig(nodes_per_dim=21, adaptive=False)
        )
        # both converge to the same integral when the rule is rich enough
        assert va == pytest.approx(vn, rel=1e-3)

    def test_config_validation(self):
        with pytest.raises(ValueFormatError):
            dm.QuadratureConfig(nodes_per_dim=8)
        with pytest.raises(ValueFormatError):
            dm.QuadratureConfig(nodes_per_dim=1)


class TestFit:
    def test_zero_cells_fit_without_correction(self):
        table, _ = dm.parse_dataset(
            "TP,FP,FN,TN\n19,19,0,67\n40,4,5,50\n33,8,7,41\n25,2,9,30\n18,0,6,22\n"
        )
        fit = dm.fit_glmm(table)
        assert fit.method == "glmm"
        assert np.isfinite(fit.loglik)

    def test_likelihood_dominates_moment_start(self, covid_table):
        from dtameta.glmm import _rule, _table_arrays
        from dtameta.reitsma import default_starts, from_working
        from dtameta import kernels

        fit = dm.fit_glmm(covid_table)
        tp, n1, tn, n0, lc1, lc2 = _table_arrays(covid_table)
        z, logw = _rule(7)
        for w in default_starts(dm.prepare_sample(covid_table)):
            start_nll = kernels.glmm_nll(
                from_working(w), tp, n1, tn, n0, lc1, lc2, z, logw
            )
            assert -fit.loglik <= start_nll + 1e-9

    def test_too_few_studies(self):
        table, _ = dm.parse_dataset("TP,FP,FN,TN\n10,2,3,40\n")
        with pytest.raises(FitFailedError):
            dm.fit_glmm(table)

    def test_fit_json_echoes_quadrature(self, covid_table):
        fit = dm.fit_glmm(covid_table)
        payload = fit.to_json()
        assert payload["method"] == "glmm"
        assert payload["quadrature"]["nodes_per_dim"] == 7
