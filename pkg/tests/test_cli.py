import json

import numpy as np
import pytest

from qefrate import cli
from qefrate.errors import InvalidParams

from conftest import BJ, matrix_json


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


@pytest.fixture()
def classical_model_file(tmp_path):
    # rank-one input keeps B J B^T = 0, so zero CCR matrix stays physically
    # consistent: a purely classical model with spectral density 1/(1+lam^2)
    doc = {
        "mode": "explicit_ss",
        "a_matrix": matrix_json(-np.eye(2)),
        "b_matrix": matrix_json(np.array([[1.0, 0.0], [0.0, 0.0]])),
        "s_matrix": matrix_json(np.eye(2)),
        "theta_matrix": matrix_json(np.zeros((2, 2))),
    }
    return write_json(tmp_path / "classical.json", doc)


def run_main(args):
    return cli.main([str(a) for a in args])


class TestRateCommand:
    def test_json_document_fields(self, tmp_path, one_mode_model_file, capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "rate", "model_path": str(one_mode_model_file),
            "theta": 0.1,
        })
        assert run_main(["--config", cfg]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["method"] == "frequency"
        assert doc["upsilon"] == pytest.approx(0.1, abs=1e-7)
        assert doc["margin"] == pytest.approx(1.0 - np.tanh(0.1), abs=1e-5)
        cli.validate_result_document(doc)

    def test_method_dispatch(self, tmp_path, one_mode_model_file, capsys):
        for method in ("homotopy", "small_theta", "classical"):
            cfg = write_json(tmp_path / f"cfg_{method}.json", {
                "command": "rate", "model_path": str(one_mode_model_file),
                "theta": 0.05, "method": method,
            })
            assert run_main(["--config", cfg]) == 0
            doc = json.loads(capsys.readouterr().out)
            assert doc["method"] == method

    def test_theta_override(self, tmp_path, one_mode_model_file, capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "rate", "model_path": str(one_mode_model_file),
            "theta": 0.1,
        })
        assert run_main(["--config", cfg, "--theta", "0.02"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["theta"] == pytest.approx(0.02)

    def test_output_file_deterministic(self, tmp_path, one_mode_model_file,
                                       capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "rate", "model_path": str(one_mode_model_file),
            "theta": 0.1, "output_path": str(tmp_path / "out.json"),
        })
        assert run_main(["--config", cfg]) == 0
        first = (tmp_path / "out.json").read_bytes()
        assert run_main(["--config", cfg]) == 0
        assert (tmp_path / "out.json").read_bytes() == first
        capsys.readouterr()


class TestRateCurve:
    def test_csv_rows(self, tmp_path, one_mode_model_file, capsys):
        grid = [round(0.01 * k, 3) for k in range(1, 12)]
        out_csv = tmp_path / "curve.csv"
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "rate-curve", "model_path": str(one_mode_model_file),
            "theta_grid": grid, "output_path": str(out_csv),
        })
        assert run_main(["--config", cfg]) == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "theta,upsilon,method,est_error"
        assert len(lines) == 1 + 11
        doc = json.loads(capsys.readouterr().out)
        assert doc["n_rows"] == 11

    def test_non_increasing_grid_rejected(self, tmp_path, one_mode_model_file):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "rate-curve", "model_path": str(one_mode_model_file),
            "theta_grid": [0.1, 0.05], "output_path": str(tmp_path / "c.csv"),
        })
        assert run_main(["--config", cfg]) == 2


class TestValidationFailures:
    def test_malformed_model_names_field(self, tmp_path, capsys):
        bad_model = write_json(tmp_path / "bad.json", {
            "theta": matrix_json(BJ),
            "r_matrix": matrix_json(np.array([[1.0, 0.4], [0.0, 1.0]])),
            "m_matrix": matrix_json(np.eye(2)),
            "s_matrix": matrix_json(np.eye(2)),
        })
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "rate", "model_path": str(bad_model), "theta": 0.1,
        })
        assert run_main(["--config", cfg]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["field"] == "r_matrix"
        assert err["error"] == "InvalidParams"

    def test_missing_required_field(self, tmp_path, one_mode_model_file,
                                    capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "rate", "model_path": str(one_mode_model_file),
        })
        assert run_main(["--config", cfg]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["field"] == "theta"

    def test_unknown_command(self, tmp_path, one_mode_model_file):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "solve", "model_path": str(one_mode_model_file),
        })
        assert run_main(["--config", cfg]) == 2


class TestNumericFailures:
    def test_inadmissible_theta_exits_3(self, tmp_path, classical_model_file,
                                        capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "rate", "model_path": str(classical_model_file),
            "theta": 2.0,
        })
        assert run_main(["--config", cfg]) == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "NotAdmissible"
        assert "condition" in err


class TestOtherCommands:
    def test_validate(self, tmp_path, one_mode_model_file, capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "validate", "model_path": str(one_mode_model_file),
        })
        assert run_main(["--config", cfg]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["valid"] and doc["hurwitz"]
        assert doc["pr_residual"] <= 1e-10
        cli.validate_result_document(doc)

    def test_horizon_single(self, tmp_path, one_mode_model_file, capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "horizon", "model_path": str(one_mode_model_file),
            "theta": 0.1, "T": 2.0, "N": 50,
        })
        assert run_main(["--config", cfg]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["rate_estimate"] == pytest.approx(0.1, abs=1e-10)

    def test_horizon_sweep_csv(self, tmp_path, one_mode_model_file, capsys):
        out_csv = tmp_path / "sweep.csv"
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "horizon", "model_path": str(one_mode_model_file),
            "theta": 0.1, "t_sweep": [1.0, 2.0], "nodes_per_unit": 30,
            "output_path": str(out_csv),
        })
        assert run_main(["--config", cfg]) == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "T,rate_estimate,target,rel_error"
        assert len(lines) == 3
        capsys.readouterr()

    def test_montecarlo(self, tmp_path, one_mode_model_file, capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "montecarlo", "model_path": str(one_mode_model_file),
            "theta": 0.05, "T": 1.0, "N": 16, "n_samples": 20000, "seed": 11,
        })
        assert run_main(["--config", cfg]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["within_3_stderr"]
        cli.validate_result_document(doc)

    def test_worst_case_zero_uncertainty(self, tmp_path, one_mode_model_file,
                                         capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "worst-case", "model_path": str(one_mode_model_file),
            "epsilon": 0.0, "theta_max": 1.0,
        })
        assert run_main(["--config", cfg]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["bound"] == pytest.approx(2.0, abs=1e-6)
        assert doc["at_zero_limit"] is True

    def test_tail_exponent(self, tmp_path, one_mode_model_file, capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "tail", "model_path": str(one_mode_model_file),
            "alpha": 0.5, "theta_max": 1.0,
        })
        assert run_main(["--config", cfg]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["exponent"] == 0.0

    def test_appendix_check(self, tmp_path, capsys):
        cfg = write_json(tmp_path / "cfg.json", {
            "command": "appendix-check", "omega": 0.1, "n_trunc": 24,
            "quad_order": 20,
        })
        assert run_main(["--config", cfg]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["max_block_error"] <= 1e-3
        cli.validate_result_document(doc)


class TestResultDocument:
    def test_round_trip_through_validator(self, tmp_path, one_mode_model_file):
        cfg = cli.load_config(write_json(tmp_path / "cfg.json", {
            "command": "rate", "model_path": str(one_mode_model_file),
            "theta": 0.05, "output_path": str(tmp_path / "out.json"),
        }))
        import io
        buffer = io.StringIO()
        assert cli.run(cfg, stdout=buffer) == 0
        reread = json.loads((tmp_path / "out.json").read_text())
        cli.validate_result_document(reread)
        assert json.loads(buffer.getvalue()) == reread

    def test_17_digit_floats(self):
        text = cli.render_document({"command": "validate", "inputs": {},
                                    "diagnostics": {}, "valid": True,
                                    "hurwitz": True, "pr_residual": 0.1})
        assert "0.10000000000000001" in text

    def test_validator_rejects_missing_fields(self):
        with pytest.raises(InvalidParams):
            cli.validate_result_document({"command": "rate", "inputs": {},
                                          "diagnostics": {}})
