import json

import pytest

from dtameta.cli import main
from tests.conftest import COVID_CSV


def run(argv):
    return main([str(a) for a in argv])


class TestFit:
    def test_reitsma_ml_covid(self, tmp_path):
        code = run(["fit", "--model", "reitsma", "--method", "ml",
                    "--input", COVID_CSV, "--out", tmp_path])
        assert code == 0
        sauc = json.loads((tmp_path / "sauc.json").read_text())
        assert abs(sauc["value"] - 0.891) <= 0.005
        fit = json.loads((tmp_path / "fit.json").read_text())
        assert fit["method"] == "ml"
        curve = json.loads((tmp_path / "sroc.json").read_text())
        assert len(curve["points"]) == 201
        sop = json.loads((tmp_path / "sop.json").read_text())
        assert abs(sop["se"] - 0.86) <= 0.01

    def test_missing_column_exits_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("TP,FP,FN\n1,2,3\n")
        code = run(["fit", "--input", bad, "--out", tmp_path / "o"])
        assert code == 2

    def test_missing_file_exits_2(self, tmp_path):
        code = run(["fit", "--input", tmp_path / "nope.csv", "--out", tmp_path])
        assert code == 2

    def test_stderr_carries_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("TP,FP,FN\n1,2,3\n")
        run(["fit", "--input", bad, "--out", tmp_path / "o"])
        assert "E_SCHEMA" in capsys.readouterr().err


class TestSa:
    def test_p1_single_row_equals_ml(self, tmp_path):
        code = run(["sa", "--input", COVID_CSV, "--out", tmp_path,
                    "--mechanisms", "lndor", "--p", "1"])
        assert code == 0
        grid = json.loads((tmp_path / "grid.json").read_text())
        assert len(grid["cells"]) == 1
        csv_lines = (tmp_path / "grid.csv").read_text().strip().splitlines()
        assert len(csv_lines) == 2

        fitdir = tmp_path / "fit"
        run(["fit", "--input", COVID_CSV, "--out", fitdir])
        fit = json.loads((fitdir / "fit.json").read_text())
        cell = grid["cells"][0]
        assert abs(cell["mu"][0] - fit["mu"][0]) <= 1e-9

    def test_custom_mechanism(self, tmp_path):
        code = run(["sa", "--input", COVID_CSV, "--out", tmp_path,
                    "--mechanisms", "custom:3:4", "--p", "1,0.8"])
        assert code == 0
        grid = json.loads((tmp_path / "grid.json").read_text())
        assert grid["mechanisms"][0]["c1"] == pytest.approx(0.6)

    def test_unknown_mechanism_exits_2(self, tmp_path):
        code = run(["sa", "--input", COVID_CSV, "--out", tmp_path,
                    "--mechanisms", "banana"])
        assert code == 2


class TestSummaryAndFunnel:
    def test_summary_outputs(self, tmp_path):
        code = run(["summary", "--input", COVID_CSV, "--out", tmp_path])
        assert code == 0
        for name in ("metrics.json", "forest.json", "scatter.json",
                     "transformed.json"):
            assert (tmp_path / name).exists()
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert len(metrics) == 69

    def test_funnel_output(self, tmp_path):
        code = run(["funnel", "--input", COVID_CSV, "--out", tmp_path])
        assert code == 0
        payload = json.loads((tmp_path / "funnel.json").read_text())
        assert len(payload["points"]) == 69


class TestSimulate:
    def test_simulate_writes_table_and_truth(self, tmp_path):
        code = run(["simulate", "--params", "0.8,0.6,0.5,0.4,-0.3",
                    "--n-studies", 50, "--seed", 7, "--out", tmp_path])
        assert code == 0
        table = (tmp_path / "table.csv").read_text().strip().splitlines()
        assert len(table) == 51
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert truth["config"]["seed"] == 7

    def test_simulate_with_selection(self, tmp_path):
        code = run(["simulate", "--params", "0.2,0.4,0.5,0.4,-0.3",
                    "--n-studies", 200, "--seed", 3, "--out", tmp_path,
                    "--arm-law", "uniform", "--arm-args", "100,400",
                    "--select", "se", "--select-beta", "0.3"])
        assert code == 0
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert 0.0 < truth["selection"]["empirical_p"] <= 1.0

    def test_byte_stable_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["simulate", "--params", "0.8,0.6,0.5,0.4,-0.3",
                        "--n-studies", 30, "--seed", 11, "--out", out]) == 0
        assert (a / "table.csv").read_bytes() == (b / "table.csv").read_bytes()
        assert (a / "truth.json").read_bytes() == (b / "truth.json").read_bytes()

    def test_invalid_params_exit_2(self, tmp_path):
        assert run(["simulate", "--params", "1,2,3", "--n-studies", 5,
                    "--out", tmp_path]) == 2


class TestConfigAndHelp:
    def test_config_file_mirrors_flags(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"model": "reitsma", "method": "reml"}))
        code = run(["fit", "--input", COVID_CSV, "--out", tmp_path,
                    "--config", cfg])
        assert code == 0
        fit = json.loads((tmp_path / "fit.json").read_text())
        assert fit["method"] == "reml"

    @pytest.mark.parametrize(
        "cmd", ["summary", "fit", "sa", "funnel", "simulate"]
    )
    def test_help_exits_zero(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        assert cmd in capsys.readouterr().out

    def test_fit_byte_stable(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["fit", "--input", COVID_CSV, "--out", out]) == 0
        for name in ("fit.json", "sroc.json", "sauc.json", "sop.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
