"""
Tests for command parsing, execution and exit codes.
"""

import json
from fractions import Fraction

import pytest

from bigbang.cli import Command, OutputFormat, Verb, execute, main, parse_command
from bigbang.exceptions import UsageError
from bigbang.flow import Direction
from utils.data_manager import TRAJECTORY_COLUMNS


@pytest.mark.unit
class TestParseCommand:
    """Argument parsing and validation"""

    def test_classify(self):
        cmd = parse_command(["classify", "--w", "7/3"])
        assert cmd.verb is Verb.CLASSIFY
        assert cmd.w == Fraction(7, 3)
        assert cmd.format is OutputFormat.JSON

    def test_bounce_with_params(self, write_params):
        path = write_params("p.json")
        cmd = parse_command(["bounce", "--params", str(path), "--w", "5/3"])
        assert cmd.verb is Verb.BOUNCE
        assert cmd.params_path == path
        assert cmd.w == Fraction(5, 3)

    def test_negative_w_with_equals(self):
        assert parse_command(["classify", "--w=-1/3"]).w == Fraction(-1, 3)

    def test_simulate_flags(self, tmp_output_dir):
        cmd = parse_command(["simulate", "--a0", "1", "--direction", "away", "--a-stop", "5",
                             "--out", str(tmp_output_dir), "--set", "K=0.25"])
        assert cmd.direction is Direction.AWAY
        assert (cmd.a0, cmd.a_stop) == (1.0, 5.0)
        assert cmd.overrides == (("K", "0.25"),)
        assert cmd.output_dir == tmp_output_dir

    @pytest.mark.parametrize("argv, reason", [
        (["classify", "--w", "2.5"], "float-w"),
        (["classify", "--w", "two"], "malformed-rational"),
        (["explode"], "bad-arguments"),
        (["classify", "--bogus"], "bad-arguments"),
        (["classify", "--params", "no/such/file.json"], "params-not-found"),
        (["classify", "--format", "csv"], "format-unsupported"),
        (["simulate", "--a0", "1"], "missing-flag"),
        (["sweep"], "missing-flag"),
        (["sweep", "--w-list", "1/2,,2"], "malformed-w-list"),
        (["reduce", "--set", "lambda=1"], "bad-override"),
        (["simulate", "--a0", "-1", "--direction", "toward"], "bad-arguments"),
    ])
    def test_usage_errors(self, argv, reason):
        with pytest.raises(UsageError) as excinfo:
            parse_command(argv)
        assert excinfo.value.reason == reason
        assert excinfo.value.exit_code == 2


@pytest.mark.unit
class TestExecute:
    """Verbs without long integrations"""

    def test_classify_output(self, capsys):
        assert main(["classify", "--w", "2"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert {key: data[key] for key in ("kind", "gamma", "parity")} == {
            "kind": "BranchRegularizable", "gamma": "2/9", "parity": "even"}

    def test_classify_uses_params_w(self, write_params, capsys):
        assert main(["classify", "--params", str(write_params(w="5/3"))]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["kind"] == "NotBranchRegularizable"
        assert data["reason"] == "q-even"

    def test_float_w_exit_code(self, capsys):
        assert main(["classify", "--w", "2.5"]) == 2
        assert '"reason": "float-w"' in capsys.readouterr().err

    def test_invalid_params_file(self, write_params, capsys):
        assert main(["reduce", "--params", str(write_params(sigma=-1.0))]) == 2
        assert '"reason": "invalid-params"' in capsys.readouterr().err

    def test_reduce_report(self, capsys):
        assert main(["reduce", "--w", "1/2"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["model"]["regime"] == "w<1"
        assert all(record["matches"] for record in data["printed_coefficients"])
        assert {r["label"] for r in data["printed_field_terms"]} == {"rho_m", "rho_rad", "rho_w"}
        assert data["omega_branches"]["omega1"]["value"] == "1/3"

    def test_reduce_override(self, capsys):
        assert main(["reduce", "--w", "2", "--set", "G=1"]) == 0
        records = {r["name"]: r for r in json.loads(capsys.readouterr().out)["printed_coefficients"]}
        assert not records["c3"]["matches"]

    def test_execute_returns_outcome(self):
        outcome = execute(Command(verb=Verb.CLASSIFY, w=Fraction(1, 2)))
        assert outcome.exit_code == 0
        assert json.loads(outcome.stdout)["kind"] == "AlwaysRegularizable"
        assert outcome.artifacts == []

    def test_verify_single_suite(self, tmp_output_dir, capsys):
        assert main(["verify", "--suite", "classification", "--out", str(tmp_output_dir)]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["passed"] is True
        assert {check["suite"] for check in data["checks"]} == {"classification"}
        assert (tmp_output_dir / "verify.json").is_file()


@pytest.mark.integration
class TestExecuteRuns:
    """Verbs that integrate"""

    def test_simulate_toward(self, tmp_output_dir, capsys, data_manager):
        assert main(["simulate", "--a0", "1", "--direction", "toward", "--w", "2",
                     "--out", str(tmp_output_dir)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["physical"]["status"] == "stop-event"
        assert report["handoff"] == "time-left"
        assert report["regularized"]["status"] == "stop-event"
        assert report["files"] == ["simulate_w2_toward_physical.csv", "simulate_w2_toward_regularized.csv"]
        frame = data_manager.read_trajectory_csv(tmp_output_dir / "simulate_w2_toward_physical.csv")
        assert tuple(frame.columns) == TRAJECTORY_COLUMNS
        assert (tmp_output_dir / "simulate_w2_toward_diagnostics.json").is_file()

    def test_simulate_toward_above_one_completes(self, tmp_output_dir, capsys):
        assert main(["simulate", "--a0", "1", "--direction", "toward", "--w", "7/3",
                     "--out", str(tmp_output_dir)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["handoff"] in ("time-left", "step-underflow")
        assert report["regularized"]["status"] == "stop-event"

    def test_simulate_away_csv(self, tmp_output_dir, capsys):
        assert main(["simulate", "--a0", "0.1", "--direction", "away", "--w", "7/3", "--format", "csv",
                     "--out", str(tmp_output_dir)]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == ",".join(TRAJECTORY_COLUMNS)
        assert (tmp_output_dir / "simulate_w7-3_away_physical.csv").is_file()
        assert not (tmp_output_dir / "simulate_w7-3_away_regularized.csv").exists()

    def test_bounce_artifacts(self, tmp_output_dir, capsys, data_manager):
        assert main(["bounce", "--w", "2", "--out", str(tmp_output_dir)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["sign_rule"] == "SameSign"
        assert report["pre_csv"] == "bounce_w2_pre.csv"
        pre = data_manager.read_trajectory_csv(tmp_output_dir / "bounce_w2_pre.csv")
        post = data_manager.read_trajectory_csv(tmp_output_dir / "bounce_w2_post.csv")
        assert (pre["tau"] > 0).all()
        assert (post["tau"] < 0).all()
        assert (post["a"] > 0).all()

    def test_bounce_obstructed(self, write_params, tmp_output_dir, capsys):
        path = write_params("p.json")
        assert main(["bounce", "--params", str(path), "--w", "5/3", "--out", str(tmp_output_dir)]) == 3
        assert '"reason": "q-even"' in capsys.readouterr().err

    @pytest.mark.slow
    def test_sweep_rows(self, tmp_output_dir, capsys):
        assert main(["sweep", "--w-list", "1/2,1,2,5/3,7/3", "--jobs", "2", "--out", str(tmp_output_dir)]) == 0
        data = json.loads(capsys.readouterr().out)
        assert len(data["rows"]) == 5
        flagged = [row["w"] for row in data["rows"] if not row["regularizable"]]
        assert flagged == ["5/3"]
        assert (tmp_output_dir / "sweep.json").is_file()

    def test_classify_output_repeatable(self, capsys):
        outputs = []
        for _ in range(2):
            assert main(["classify", "--w", "7/3"]) == 0
            outputs.append(capsys.readouterr().out)
        assert outputs[0] == outputs[1]

    @pytest.mark.slow
    def test_sweep_output_repeatable(self, tmp_output_dir, capsys):
        outputs = []
        for _ in range(2):
            assert main(["sweep", "--w-list", "2,5/3", "--jobs", "1", "--out", str(tmp_output_dir)]) == 0
            outputs.append(capsys.readouterr().out)
        assert outputs[0] == outputs[1]
        assert json.loads(outputs[0])["rows"][0]["continuity_gap"] == 0.0

    @pytest.mark.slow
    def test_verify_defaults(self, capsys):
        assert main(["verify"]) == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True
