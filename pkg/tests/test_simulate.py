import numpy as np
import pytest
from scipy.special import logit

import dtameta as dm


@pytest.fixture(scope="module")
def base_params():
    return dm.BivariateParams(0.8, 0.6, 0.5, 0.4, -0.4)


class TestSimulatePopulation:
    def test_determinism(self, base_params):
        cfg = dm.SimConfig(params=base_params, n_studies=50, seed=123)
        a, truth_a = dm.simulate_population(cfg)
        b, truth_b = dm.simulate_population(cfg)
        assert a == b
        assert truth_a == truth_b

    def test_different_seed_differs(self, base_params):
        a, _ = dm.simulate_population(dm.SimConfig(base_params, 50, seed=1))
        b, _ = dm.simulate_population(dm.SimConfig(base_params, 50, seed=2))
        assert a != b

    def test_law_of_large_numbers(self, base_params):
        cfg = dm.SimConfig(
            params=base_params, n_studies=100_000, arm_law="fixed",
            arm_args=(200,), seed=9,
        )
        table, _ = dm.simulate_population(cfg)
        counts = table.counts()
        se_hat = counts[:, 0] / (counts[:, 0] + counts[:, 2])
        se_hat = np.clip(se_hat, 1e-6, 1 - 1e-6)
        y1 = logit(se_hat)
        # var(y1) ~ tau1^2 + E within-study var; SE of mean ~ sqrt(var/n)
        se_mean = y1.std(ddof=1) / np.sqrt(len(y1))
        assert abs(y1.mean() - base_params.mu1) <= 3 * se_mean + 0.01

    def test_tau_zero_latents_identical(self):
        p = dm.BivariateParams(0.8, 0.6, 0.0, 0.0, 0.0)
        _, truth = dm.simulate_population(dm.SimConfig(p, 20, seed=5))
        assert len(set(truth["latent_se"])) == 1
        assert len(set(truth["latent_sp"])) == 1

    def test_arm_laws(self, base_params):
        for law, args in (("fixed", (100,)), ("uniform", (50, 150)),
                          ("lognormal", (4.5, 0.4))):
            cfg = dm.SimConfig(base_params, 30, arm_law=law, arm_args=args, seed=3)
            table, _ = dm.simulate_population(cfg)
            assert len(table) == 30
            for rec in table.studies:
                assert rec.n_diseased >= 1 and rec.n_healthy >= 1

    def test_csv_export_round_trip(self, base_params):
        cfg = dm.SimConfig(base_params, 10, seed=42)
        table, _ = dm.simulate_population(cfg)
        text = "id,TP,FP,FN,TN\n" + "\n".join(
            f"{r.id},{r.tp},{r.fp},{r.fn},{r.tn}" for r in table.studies
        )
        again, _ = dm.parse_dataset(text)
        assert again.studies == table.studies


class TestApplySelection:
    def test_beta_one_keeps_all(self, base_params):
        table, _ = dm.simulate_population(dm.SimConfig(base_params, 200, seed=7))
        mech = dm.SelectionMechanism.preset("lnDOR", form="step")
        published, p_emp = dm.apply_selection(table, mech, beta=1.0)
        assert p_emp == 1.0
        assert published == table

    def test_beta_zero_keeps_exactly_significant(self, base_params):
        table, _ = dm.simulate_population(dm.SimConfig(base_params, 300, seed=8))
        mech = dm.SelectionMechanism.preset("lnDOR", form="step")
        sample = dm.prepare_sample(table)
        t = dm.t_statistic(sample.y1, sample.y2, sample.s1sq, sample.s2sq, mech)
        published, p_emp = dm.apply_selection(table, mech, beta=0.0)
        expected_ids = {
            table.studies[i].id for i in range(len(table)) if t[i] >= mech.cutoff_u
        }
        assert {r.id for r in published.studies} == expected_ids
        assert p_emp == pytest.approx(len(expected_ids) / len(table), abs=1e-12)

    def test_empirical_p_matches_analytic_marginal(self):
        # 10^5 studies: kept fraction agrees with the mean model-implied
        # publication probability under the generating parameters
        params = dm.BivariateParams(0.3, 0.4, 0.5, 0.45, -0.3)
        cfg = dm.SimConfig(
            params=params, n_studies=100_000, arm_law="uniform",
            arm_args=(80, 400), seed=31,
        )
        table, _ = dm.simulate_population(cfg)
        mech = dm.SelectionMechanism.preset("lnDOR", form="step")
        beta = 0.3
        published, p_emp = dm.apply_selection(table, mech, beta=beta, seed=31)
        sample = dm.prepare_sample(table)
        probs = dm.study_publish_prob(
            params, (sample.s1sq, sample.s2sq), mech, beta=beta
        )
        analytic = float(np.mean(probs))
        se = np.sqrt(analytic * (1 - analytic) / len(table))
        # binomial-sampling and correction effects add a small systematic
        # gap on top of the Monte-Carlo error
        assert abs(p_emp - analytic) <= 3 * se + 0.01

    def test_selection_determinism(self, base_params):
        table, _ = dm.simulate_population(dm.SimConfig(base_params, 500, seed=12))
        mech = dm.SelectionMechanism.preset("sensitivity", form="step")
        a, pa = dm.apply_selection(table, mech, beta=0.4, seed=99)
        b, pb = dm.apply_selection(table, mech, beta=0.4, seed=99)
        assert a == b and pa == pb
        c, _ = dm.apply_selection(table, mech, beta=0.4, seed=100)
        assert a != c
