import json

import pandas as pd
import pytest

from topobreak.cli.commands import test as cli_test
from topobreak.cli.main import EXIT_CONFIG, EXIT_OK, build_parser, main
from topobreak.exceptions import NumericError
from topobreak.models.database import RunRecord, get_session
from topobreak.services.config_loader import config_loader
from topobreak.services.report_generator import RunReporter


@pytest.fixture
def config_path(tmp_path, small_config_dict):
    small_config_dict["outputs"] = str(tmp_path / "out")
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(small_config_dict), encoding="utf-8")
    return path


def _read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestParser:
    def test_shared_flags_on_every_command(self):
        parser = build_parser()
        for command in ("stability", "critvals", "test", "approx", "simulate"):
            args = parser.parse_args([command, "--seed", "3", "--threads", "2"])
            assert args.seed == 3 and args.threads == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["fit"])


class TestSimulateCommand:
    def test_writes_series_and_diagrams(self, config_path, tmp_path):
        assert main(["simulate", "--config", str(config_path), "--log-level", "WARNING"]) == EXIT_OK
        out = tmp_path / "out"
        series = pd.read_csv(out / "series.csv")
        assert len(series) == 30 * 4
        diagrams = pd.read_csv(out / "diagrams.csv")
        assert set(diagrams['k']) == {0}
        manifest = _read_json(out / "manifest.json")
        assert manifest['command'] == "simulate"
        assert manifest['derived']['N_k'] == 4 + 6
        assert (out / "summary.html").exists()


class TestTestCommand:
    def test_pipeline_outputs(self, config_path, tmp_path):
        assert main(["test", "--config", str(config_path), "--log-level", "WARNING"]) == EXIT_OK
        out = tmp_path / "out"
        frame = pd.read_csv(out / "replications.csv")
        assert len(frame) == 2 * 2
        assert set(frame['statistic']) == {"Lambda", "Omega"}
        assert (frame['reject'] == (frame['value'] > frame['critical_value'])).all()
        aggregate = _read_json(out / "aggregate.json")
        assert 0.0 <= aggregate['rejection_rate_Lambda'] <= 1.0
        derived = _read_json(out / "manifest.json")['derived']
        assert derived['ell'] == 2
        assert derived['N_k'] == 10

    def test_rerun_is_byte_identical(self, config_path, tmp_path):
        first_out, second_out = tmp_path / "a", tmp_path / "b"
        assert main(["test", "--config", str(config_path), "--out", str(first_out)]) == EXIT_OK
        assert main(["test", "--config", str(config_path), "--out", str(second_out)]) == EXIT_OK
        first = (first_out / "replications.csv").read_bytes()
        assert first == (second_out / "replications.csv").read_bytes()
        assert b"\r\n" not in first

    def test_seed_changes_output(self, config_path, tmp_path):
        main(["test", "--config", str(config_path), "--out", str(tmp_path / "a")])
        main(["test", "--config", str(config_path), "--out", str(tmp_path / "b"), "--seed", "43"])
        assert (tmp_path / "a" / "replications.csv").read_bytes() != (tmp_path / "b" / "replications.csv").read_bytes()

    def test_h1_estimates_changepoint(self, tmp_path, small_config_dict):
        small_config_dict["outputs"] = str(tmp_path / "h1")
        small_config_dict["break"] = {"theta": 0.5, "kind": "ScaleChange", "factor": 0.5}
        small_config_dict["test"]["estimate_changepoint"] = True
        path = tmp_path / "h1.json"
        path.write_text(json.dumps(small_config_dict), encoding="utf-8")
        assert main(["test", "--config", str(path)]) == EXIT_OK
        frame = pd.read_csv(tmp_path / "h1" / "replications.csv")
        assert frame['theta_error'].between(0.0, 1.0).all()
        assert _read_json(tmp_path / "h1" / "manifest.json")['derived']['v_star'] == 15


class TestCritvalsCommand:
    def test_without_config(self, tmp_path):
        out = tmp_path / "cv"
        argv = ["critvals", "--statistic", "Lambda", "--ell", "1", "--grid", "1024", "--reps", "1000",
                "--seed", "5", "--out", str(out)]
        assert main(argv) == EXIT_OK
        frame = pd.read_csv(out / "quantiles.csv")
        assert frame['level'].tolist() == [0.90, 0.95, 0.99]
        summary = _read_json(out / "table_summary.json")
        assert summary['kolmogorov_reference_q0.95'] == pytest.approx(1.8444, abs=1e-3)

    def test_small_grid_is_config_error(self, tmp_path):
        argv = ["critvals", "--grid", "10", "--reps", "1000", "--out", str(tmp_path / "cv")]
        assert main(argv) == EXIT_CONFIG

    def test_from_config(self, config_path, tmp_path):
        assert main(["critvals", "--config", str(config_path), "--statistic", "Omega"]) == EXIT_OK
        frame = pd.read_csv(tmp_path / "out" / "quantiles.csv")
        assert set(frame['statistic']) == {"Omega"}
        assert frame['n_rep'].iloc[0] == 1000


class TestApproxCommand:
    def test_iid_profile_is_zero(self, config_path, tmp_path):
        assert main(["approx", "--config", str(config_path), "--m-list", "1,3"]) == EXIT_OK
        frame = pd.read_csv(tmp_path / "out" / "approx_profile.csv")
        assert frame['m'].tolist() == [1, 3]
        assert (frame['nu_hat'] == 0.0).all()

    def test_p_below_one(self, config_path):
        assert main(["approx", "--config", str(config_path), "--p", "0.5"]) == EXIT_CONFIG

    def test_bad_m_list(self, config_path):
        assert main(["approx", "--config", str(config_path), "--m-list", "1,x"]) == EXIT_CONFIG


class TestErrors:
    def test_missing_config_flag(self):
        assert main(["test"]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG

    def test_zero_stability_samples(self, config_path):
        assert main(["stability", "--config", str(config_path), "--reps", "0"]) == EXIT_CONFIG


class TestRunRegistry:
    def test_records_status(self, tmp_path):
        db_path = str(tmp_path / "runs.db")
        reporter = RunReporter("simulate", "registry", tmp_path / "reg", seed=1, db_path=db_path).start()
        reporter.write_json("x.json", {"a": 1})
        manifest = reporter.finish({}, {}, {"a": 1})
        assert manifest.artifacts == ["x.json", "manifest.json", "summary.html"]

        failed = RunReporter("test", "broken", tmp_path / "reg2", db_path=db_path).start()
        failed.fail("boom")

        session = get_session(db_path)
        try:
            statuses = {r.run_id: r.status for r in session.query(RunRecord).all()}
        finally:
            session.close()
        assert statuses == {"registry": "ok", "broken": "failed"}

    def test_failure_after_replications_marks_run_failed(self, tmp_path, monkeypatch, small_config_dict):
        db_path = str(tmp_path / "runs.db")
        small_config_dict["outputs"] = str(tmp_path / "late")
        config = config_loader.validate(small_config_dict)
        monkeypatch.setattr(
            cli_test, "reporter_for",
            lambda command, cfg: RunReporter(command, cfg.run_id, tmp_path / "late", db_path=db_path).start(),
        )

        def broken_n_features(r, k):
            raise NumericError("derived constants failed")

        monkeypatch.setattr(cli_test, "n_features", broken_n_features)
        with pytest.raises(NumericError):
            cli_test.cmd_test(config)

        session = get_session(db_path)
        try:
            record = session.query(RunRecord).one()
        finally:
            session.close()
        assert record.status == "failed"
        assert "derived constants failed" in record.message
