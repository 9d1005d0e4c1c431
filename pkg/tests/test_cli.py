"""Command line surface: flags, exit codes, tables, JSON reports."""

import json

import pytest

import enumsr
from enumsr.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_RUNTIME, main
from enumsr.datasets import DatasetError

LINEAR_CSV = ("a,y\n" + "".join(f"{v},{3.0 * v + 2.0}\n"
                                for v in (-2.0, -1.4, -0.6, 0.0, 0.7, 1.1, 1.8, 2.0)))


@pytest.fixture()
def linear_csv(tmp_path):
    path = tmp_path / "linear.csv"
    path.write_text(LINEAR_CSV)
    return str(path)


def _table(out: str) -> dict:
    rows = {}
    for line in out.splitlines():
        parts = line.split("  ")
        parts = [p.strip() for p in parts if p.strip()]
        if len(parts) == 2:
            rows[parts[0]] = parts[1]
    return rows


class TestRunCommand:

    ARGS = ["--max-var-refs", "2", "--budget", "400", "--seed", "1"]

    def test_csv_linear_is_solved(self, linear_csv, capsys):
        code = main(["run", "--csv", linear_csv, "--target", "y",
                     "--train-fraction", "1.0", *self.ARGS])
        assert code == EXIT_OK
        table = _table(capsys.readouterr().out)
        assert table["solved"] == "yes"
        assert table["stop reason"] == "target train NMSE reached"

    def test_explicit_row_ranges_reach_the_table(self, linear_csv, capsys):
        code = main(["run", "--csv", linear_csv, "--target", "y",
                     "--train-rows", "0:6", "--test-rows", "6:8", *self.ARGS])
        assert code == EXIT_OK
        assert _table(capsys.readouterr().out)["train/test rows"] == "6/2"

    def test_json_report(self, linear_csv, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main(["run", "--csv", linear_csv, "--target", "y",
                     "--train-fraction", "1.0", *self.ARGS, "--out", str(out)])
        capsys.readouterr()
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["tool"] == {"name": "enumsr", "version": enumsr.__version__}
        assert report["dataset"]["train_rows"] == 8
        assert report["config"]["seed"] == 1
        assert report["config"]["lm_restarts"] == 10
        assert report["result"]["solved"] is True
        assert report["result"]["train_nmse"] < 1e-8
        assert report["improvements"][0]["expression"] == "c0"
        assert len(report["result"]["coefficients"]) >= 2

    def test_benchmark_run(self, tmp_path, capsys):
        out = tmp_path / "n1.json"
        code = main(["run", "--benchmark", "nguyen-1", "--max-var-refs", "10",
                     "--budget", "50000", "--seed", "1", "--out", str(out)])
        capsys.readouterr()
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["result"]["solved"] is True
        assert report["result"]["stop_reason"] == "target train NMSE reached"
        assert 0 < report["result"]["counters"]["evaluated_sentences"] <= 100

    def test_reports_identical_modulo_timing(self, linear_csv, tmp_path,
                                             capsys):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            main(["run", "--csv", linear_csv, "--target", "y",
                  "--train-fraction", "1.0", *self.ARGS, "--out", str(path)])
        capsys.readouterr()
        reports = [json.loads(p.read_text()) for p in paths]
        for report in reports:
            del report["timing"]
            for record in report["improvements"]:
                del record["elapsed_ms"]
        assert reports[0] == reports[1]


class TestExitCodes:

    def test_unknown_benchmark(self, capsys):
        assert main(["run", "--benchmark", "nguyen-99"]) == EXIT_CONFIG
        assert "unknown benchmark" in capsys.readouterr().err

    def test_both_data_sources(self, linear_csv):
        assert main(["run", "--benchmark", "nguyen-1", "--csv", linear_csv,
                     "--target", "y"]) == EXIT_CONFIG

    def test_no_data_source(self):
        assert main(["run"]) == EXIT_CONFIG

    def test_csv_without_target(self, linear_csv):
        assert main(["run", "--csv", linear_csv]) == EXIT_CONFIG

    def test_bad_row_range_format(self, linear_csv):
        assert main(["run", "--csv", linear_csv, "--target", "y",
                     "--train-rows", "0-6", "--test-rows", "6:8"]) == EXIT_CONFIG

    def test_zero_budget(self):
        assert main(["run", "--benchmark", "nguyen-1", "--budget", "0"]) \
            == EXIT_CONFIG

    def test_missing_csv_file(self, tmp_path):
        assert main(["run", "--csv", str(tmp_path / "absent.csv"),
                     "--target", "y"]) == EXIT_DATA

    def test_malformed_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,y\n1,oops\n")
        assert main(["run", "--csv", str(path), "--target", "y"]) == EXIT_DATA

    def test_unexpected_failure(self, linear_csv, monkeypatch, capsys):
        from enumsr import cli

        def explode(data, cfg):
            raise RuntimeError("boom")

        monkeypatch.setattr(cli, "run", explode)
        code = main(["run", "--csv", linear_csv, "--target", "y"])
        capsys.readouterr()
        assert code == EXIT_RUNTIME

    def test_missing_subcommand(self, capsys):
        assert main([]) == 2
        capsys.readouterr()

    def test_version_flag(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert enumsr.__version__ in capsys.readouterr().out


class TestSuiteCommand:

    ARGS = ["--max-var-refs", "2", "--budget", "30", "--no-early-stop",
            "--seed", "1"]

    def test_two_benchmarks(self, tmp_path, capsys):
        out = tmp_path / "suite.json"
        code = main(["suite", "--benchmarks", "nguyen-1,keijzer-14",
                     *self.ARGS, "--out", str(out)])
        table_text = capsys.readouterr().out
        assert code == EXIT_OK
        assert "nguyen-1" in table_text and "keijzer-14" in table_text
        payload = json.loads(out.read_text())
        assert [r["benchmark"] for r in payload["rows"]] \
            == ["nguyen-1", "keijzer-14"]
        # neither target fits within two variable references
        assert all(r["status"] == "unsolved" for r in payload["rows"])
        assert all(r["evaluated"] == 30 for r in payload["rows"])

    def test_unknown_member(self):
        assert main(["suite", "--benchmarks", "nguyen-1,nope",
                     *self.ARGS]) == EXIT_CONFIG

    def test_empty_list(self):
        assert main(["suite", "--benchmarks", " , ", *self.ARGS]) == EXIT_CONFIG

    def test_failing_member_does_not_stop_the_suite(self, monkeypatch, capsys):
        from enumsr import cli

        real_generate = cli.generate

        def flaky(benchmark_id, seed=1):
            if benchmark_id == "nguyen-2":
                raise DatasetError("synthetic failure")
            return real_generate(benchmark_id, seed)

        monkeypatch.setattr(cli, "generate", flaky)
        code = main(["suite", "--benchmarks", "nguyen-2,nguyen-1", *self.ARGS])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "synthetic failure" in out
        assert "unsolved" in out


class TestSpaceStats:

    def test_small_space_numbers(self, capsys):
        code = main(["space-stats", "--features", "1", "--max-var-refs", "2"])
        assert code == EXIT_OK
        table = _table(capsys.readouterr().out)
        assert table["derivations (tree)"] == "1676"
        assert table["sentences (tree)"] == "304"
        assert table["distinct sentences"] == "296"
        assert table["distinct canonical"] == "175"
        assert table["graph rejected"] == "129"
        assert table["graph sentences"] == "175"

    def test_feature_guard(self):
        assert main(["space-stats", "--features", "4"]) == EXIT_CONFIG

    def test_budget_guard(self):
        assert main(["space-stats", "--max-var-refs", "5"]) == EXIT_CONFIG
