import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.algebra.errors import IFockError, QuadratureError
from src.app import commands
from src.app.commands import max_relative_deviation
from src.app.main import EXIT_CONFIG, EXIT_DEGENERATE, EXIT_FAILURE, EXIT_OK, EXIT_QUADRATURE, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"
GAUSSIAN = {"type": "gaussian", "re_amp": 1.0, "im_amp": 0.0, "center": [0.0], "width": 1.0}


def write_config(tmp_path, **data):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"schema": 1, **data}))
    return str(path)


def reference_config(tmp_path, **overrides):
    data = json.loads((CONFIGS / "reference_n1.json").read_text())
    data.update(overrides)
    path = tmp_path / "reference.json"
    path.write_text(json.dumps(data))
    return str(path)


class TestPartition:
    def test_trivial_sequence(self, capsys):
        assert main(["partition", "--epsilon", "1,0,0,1"]) == EXIT_OK
        captured = capsys.readouterr()
        assert captured.out == "pair_index,mbar,m,depth\n"
        assert "trivial" in captured.err.splitlines()

    def test_rainbow_rows(self, tmp_path, capsys):
        out = tmp_path / "partition.csv"
        assert main(["partition", "--epsilon", "1,1,0,0", "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert frame.values.tolist() == [[1, 4, 1, 0], [2, 3, 2, 1]]
        assert "non-trivial; wigner pairing (4,1) (3,2); 2 pairings" in capsys.readouterr().err

    def test_bad_epsilon(self):
        assert main(["partition", "--epsilon", "1,1,0"]) == EXIT_CONFIG


class TestMoment:
    def test_all_routes_agree(self, tmp_path):
        out = tmp_path / "moment.csv"
        assert main(["moment", "--config", reference_config(tmp_path), "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert frame["route"].tolist() == ["theorem1", "fock", "noise"]
        values = frame["re"].to_numpy() + 1j * frame["im"].to_numpy()
        assert np.allclose(values, values[0], rtol=1e-6)

    def test_single_route(self, tmp_path):
        out = tmp_path / "moment.csv"
        config = reference_config(tmp_path, route="noise", probe_p=[3.0, 3.5])
        assert main(["moment", "--config", config, "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert frame["route"].tolist() == ["noise", "noise"]
        assert frame["p"].tolist() == [3.0, 3.5]

    def test_tangent_shell_exit_code(self, tmp_path):
        config = reference_config(tmp_path, probe_p=[float(np.sqrt(2.0))])
        assert main(["moment", "--config", config, "--out", str(tmp_path / "m.csv")]) == EXIT_DEGENERATE

    def test_needs_config(self):
        assert main(["moment"]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert main(["moment", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG

    def test_output_is_deterministic(self, tmp_path):
        config = reference_config(tmp_path, probe_p=[3.0, 3.25])
        first, second = tmp_path / "first.csv", tmp_path / "second.csv"
        assert main(["moment", "--config", config, "--out", str(first)]) == EXIT_OK
        assert main(["moment", "--config", config, "--out", str(second)]) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()
        assert b"\r\n" not in first.read_bytes()


class TestCrosscheck:
    def test_reference_configuration_passes(self, tmp_path):
        out = tmp_path / "crosscheck.csv"
        assert main(["crosscheck", "--config", str(CONFIGS / "reference_n1.json"), "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert list(frame.columns) == [
            "p", "theorem1_re", "theorem1_im", "fock_re", "fock_im", "noise_re", "noise_im", "max_rel_dev",
        ]
        assert frame["max_rel_dev"].max() < 1e-6

    def test_disagreement_exits_one(self, tmp_path, monkeypatch):
        original = commands._route_evaluators

        def skewed(config):
            evaluators = original(config)
            noise = evaluators["noise"]
            evaluators["noise"] = lambda p: 1.01 * noise(p)
            return evaluators

        monkeypatch.setattr(commands, "_route_evaluators", skewed)
        config = reference_config(tmp_path)
        assert main(["crosscheck", "--config", config, "--out", str(tmp_path / "c.csv")]) == EXIT_FAILURE


class TestMaxRelativeDeviation:
    def test_values(self):
        assert max_relative_deviation([1.0, 1.0, 1.0]) == 0.0
        assert max_relative_deviation([1.0, 2.0]) == pytest.approx(0.5)
        assert max_relative_deviation([0.0, 0.0]) == 0.0


class TestKernelScan:
    def test_tangent_momentum_is_flagged(self, tmp_path):
        out = tmp_path / "scan.csv"
        assert main(["kernel-scan", "--config", str(CONFIGS / "kernel_scan_tangent.json"),
                     "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert frame["status"].tolist() == ["ok", "degenerate", "ok", "ok"]
        assert frame["n_roots"].tolist() == [0, 0, 2, 2]
        assert np.isnan(frame.loc[1, "re"])
        assert frame.loc[2, "min_jacobian"] == pytest.approx(np.sqrt(2.0))


class TestBoseMoment:
    def test_linear_reference(self, tmp_path):
        config = write_config(
            tmp_path,
            dispersion={"type": "linear", "c": 1.0},
            form_factors=[GAUSSIAN],
            epsilon="1,0",
            times=[1.0, 1.0],
            omega_probe=[1.0],
        )
        out = tmp_path / "bose.csv"
        assert main(["bose-moment", "--config", config, "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert frame.loc[0, "re"] == pytest.approx(4 * np.pi / np.e)
        assert frame.loc[0, "n_pairings"] == 1


class TestPrelimit:
    def test_rows(self, tmp_path):
        out = tmp_path / "prelimit.csv"
        config = reference_config(tmp_path, lambda_list=[0.5])
        assert main(["prelimit", "--config", config, "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert frame["pairing_id"].tolist() == ["(2,1)", "total", "limit"]
        assert frame["lambda"].tolist() == [0.5, 0.5, 0.0]
        assert frame.loc[0, "crossing_flag"] == 0
        assert pd.isna(frame.loc[1, "crossing_flag"])
        assert frame.loc[0, "re"] == pytest.approx(frame.loc[1, "re"])

    def test_needs_single_momentum(self, tmp_path):
        config = reference_config(tmp_path, probe_p=[3.0, 3.5])
        assert main(["prelimit", "--config", config]) == EXIT_CONFIG


class TestExitCodes:
    def test_quadrature_failure(self, tmp_path, monkeypatch):
        def failing(config):
            raise QuadratureError("did not converge", routine="test", estimate=1.0, error=1.0)

        monkeypatch.setitem(commands.COMMANDS, "moment", failing)
        assert main(["moment", "--config", reference_config(tmp_path)]) == EXIT_QUADRATURE

    def test_other_library_failure(self, tmp_path, monkeypatch):
        def failing(config):
            raise IFockError("boom")

        monkeypatch.setitem(commands.COMMANDS, "moment", failing)
        assert main(["moment", "--config", reference_config(tmp_path)]) == EXIT_FAILURE

    def test_log_level_override(self, capsys):
        assert main(["partition", "--epsilon", "1,0", "--log-level", "ERROR"]) == EXIT_OK
        err = capsys.readouterr().err
        assert "Command started" not in err
        assert "non-trivial; wigner pairing (2,1); 1 pairings" in err

    def test_metrics_file_written(self, tmp_path):
        metrics_path = tmp_path / "metrics.prom"
        assert main(["partition", "--epsilon", "1,0", "--metrics-out", str(metrics_path)]) == EXIT_OK
        assert "ifock_command_duration_seconds" in metrics_path.read_text()

    def test_three_dimensions_is_a_configuration_error(self, tmp_path):
        config = reference_config(
            tmp_path,
            phys={"hbar": 1.0, "mass": 1.0, "dim": 3},
            form_factors=[dict(GAUSSIAN, center=[0.0, 0.0, 0.0])],
            route="theorem1",
        )
        assert main(["moment", "--config", config, "--out", str(tmp_path / "m.csv")]) == EXIT_CONFIG

    def test_bose_moment_needs_a_band(self, tmp_path):
        config = write_config(
            tmp_path,
            dispersion={"type": "constant", "omega0": 1.0},
            form_factors=[GAUSSIAN],
            epsilon="1,0",
            times=[1.0, 1.0],
            omega_probe=[1.0],
        )
        assert main(["bose-moment", "--config", config, "--out", str(tmp_path / "b.csv")]) == EXIT_CONFIG


class TestWrapperScript:
    def test_relative_paths_follow_the_caller(self, tmp_path):
        config = tmp_path / "configs" / "run.json"
        config.parent.mkdir()
        config.write_text((CONFIGS / "reference_n1.json").read_text())
        env = dict(os.environ, PYTHON=sys.executable)
        result = subprocess.run(
            ["bash", str(SCRIPTS / "ifock"), "moment", "--config", "configs/run.json", "--out", "moment.csv"],
            cwd=tmp_path, env=env, capture_output=True, text=True,
        )
        assert result.returncode == EXIT_OK, result.stderr
        assert pd.read_csv(tmp_path / "moment.csv")["route"].tolist() == ["theorem1", "fock", "noise"]
