import numpy as np
import pytest

import dtameta as dm
from dtameta.errors import TooFewStudiesError


class TestFunnelData:
    def test_known_precision_value(self):
        # n_dis = n_hea = 100 -> ESS = 200, 1/sqrt(200) = 0.07071...
        table, _ = dm.parse_dataset("TP,FP,FN,TN\n80,10,20,90\n70,20,30,80\n")
        points, _ = dm.funnel_data(dm.prepare_sample(table), table)
        assert points[0].inv_sqrt_ess == pytest.approx(0.07071067811865475, abs=1e-12)

    def test_identical_rows_coincide(self):
        table, _ = dm.parse_dataset("TP,FP,FN,TN\n80,10,20,90\n80,10,20,90\n")
        points, _ = dm.funnel_data(dm.prepare_sample(table), table)
        assert points[0].lnDOR == points[1].lnDOR
        assert points[0].inv_sqrt_ess == points[1].inv_sqrt_ess

    def test_output_length_and_pooled(self, covid_table, covid_sample):
        points, pooled = dm.funnel_data(covid_sample, covid_table)
        assert len(points) == len(covid_table)
        lndor = covid_sample.y1 + covid_sample.y2
        w = 1.0 / (covid_sample.s1sq + covid_sample.s2sq)
        assert pooled == pytest.approx(float(np.sum(w * lndor) / np.sum(w)), abs=1e-12)


class TestAsymmetryTest:
    def test_constant_lndor_gives_flat_slope(self):
        # same accuracy at different sizes: lnDOR constant, ESS varies
        rows = [
            "80,10,20,90", "160,20,40,180", "240,30,60,270",
            "320,40,80,360", "400,50,100,450",
        ]
        table, _ = dm.parse_dataset("TP,FP,FN,TN\n" + "\n".join(rows))
        res = dm.asymmetry_test(dm.prepare_sample(table), table)
        assert res.slope == pytest.approx(0.0, abs=1e-12)
        assert res.p_value == pytest.approx(1.0, abs=1e-12)

    def test_fully_degenerate_rows_do_not_crash(self):
        rows = "\n".join(["80,10,20,90"] * 6)
        table, _ = dm.parse_dataset("TP,FP,FN,TN\n" + rows)
        res = dm.asymmetry_test(dm.prepare_sample(table), table)
        assert res.slope == 0.0
        assert res.p_value == 1.0

    def test_too_few_studies(self):
        table, _ = dm.parse_dataset("TP,FP,FN,TN\n80,10,20,90\n70,20,30,80\n")
        with pytest.raises(TooFewStudiesError):
            dm.asymmetry_test(dm.prepare_sample(table), table)

    def test_p_value_in_unit_interval_many_datasets(self):
        from tests.conftest import random_table

        rng = np.random.default_rng(77)
        for _ in range(1000):
            table = random_table(rng, m=int(rng.integers(3, 15)))
            res = dm.asymmetry_test(dm.prepare_sample(table), table)
            assert 0.0 <= res.p_value <= 1.0

    def test_permutation_invariance(self, covid_table, covid_sample):
        res_a = dm.asymmetry_test(covid_sample, covid_table)
        rng = np.random.default_rng(4)
        order = rng.permutation(len(covid_table))
        table_b = dm.StudyTable(studies=tuple(covid_table.studies[i] for i in order))
        res_b = dm.asymmetry_test(dm.prepare_sample(table_b), table_b)
        assert res_a.slope == pytest.approx(res_b.slope, abs=1e-12)
        assert res_a.p_value == pytest.approx(res_b.p_value, abs=1e-12)

    def test_json_schema(self, covid_table, covid_sample):
        payload = dm.asymmetry_test(covid_sample, covid_table).to_json()
        assert set(payload) == {"points", "pooled", "test"}
        assert set(payload["test"]) == {"slope", "se_slope", "t_value", "p_value"}
        assert set(payload["points"][0]) == {"id", "lnDOR", "inv_sqrt_ess"}

    def test_calibration_under_no_selection(self):
        # loose band: the test is known to be low-powered and only roughly
        # calibrated under binomial sampling
        params = dm.BivariateParams(1.0, 0.9, 0.3, 0.3, -0.2)
        rejections = 0
        n_rep = 1000
        for rep in range(n_rep):
            cfg = dm.SimConfig(
                params=params, n_studies=15, arm_law="uniform",
                arm_args=(50, 500), seed=rep,
            )
            table, _ = dm.simulate_population(cfg)
            res = dm.asymmetry_test(dm.prepare_sample(table), table)
            rejections += res.p_value < 0.05
        assert 0.02 <= rejections / n_rep <= 0.10
