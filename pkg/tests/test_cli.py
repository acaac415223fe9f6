import json
from pathlib import Path

import numpy as np
import pytest

from edgeqed.cli import main
from edgeqed.config import ConfigError, load, resolve


class TestConfig:
    def test_defaults_resolve(self):
        cfg = resolve({})
        assert cfg["lattice"]["n1"] == 300
        assert cfg["qubits"]["g"] == 0.05
        assert cfg["run"]["engine"] == "chebyshev"

    def test_unknown_keys_rejected_all_at_once(self):
        raw = {"lattice": {"n1": 10, "n3": 4, "beta": -1.0},
               "qubitz": {}, "qubits": {"positions": [0, 0]}}
        with pytest.raises(ConfigError) as err:
            resolve(raw)
        messages = "\n".join(err.value.errors)
        assert "n3" in messages
        assert "beta" in messages
        assert "qubitz" in messages
        assert "duplicate" in messages
        assert len(err.value.errors) >= 4

    def test_type_checks(self):
        with pytest.raises(ConfigError, match="n1"):
            resolve({"lattice": {"n1": 12.5}})
        with pytest.raises(ConfigError, match="engine"):
            resolve({"run": {"engine": "euler"}})

    def test_toml_and_json_files(self, tmp_path):
        toml = tmp_path / "c.toml"
        toml.write_text("[lattice]\nn1 = 12\nn2 = 14\n")
        cfg = load(toml)
        assert (cfg["lattice"]["n1"], cfg["lattice"]["n2"]) == (12, 14)
        js = tmp_path / "c.json"
        js.write_text(json.dumps({"qubits": {"positions": [0, 3]}}))
        assert load(js)["qubits"]["positions"] == [0, 3]

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load("nonexistent.toml")


class TestCliExitCodes:
    def test_validate_ok(self, tmp_path, capsys):
        path = tmp_path / "ok.toml"
        path.write_text("[lattice]\nn1 = 8\nn2 = 8\n")
        assert main(["validate", str(path)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["lattice"]["n1"] == 8
        assert out["lattice"]["beta"] == 1.0  # resolved default echoed

    def test_validate_bad_beta(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text("[lattice]\nbeta = -1.0\n")
        assert main(["validate", str(path)]) == 2
        assert "beta must be > 0" in capsys.readouterr().err

    def test_duplicate_positions_config_error(self, tmp_path, capsys):
        path = tmp_path / "dup.json"
        path.write_text(json.dumps({"qubits": {"positions": [0, 0]}}))
        assert main(["validate", str(path)]) == 2
        assert "duplicate" in capsys.readouterr().err

    def test_unknown_scenario(self, tmp_path, capsys):
        assert main(["run", "fig9", "--out", str(tmp_path)]) == 2
        assert "unknown scenario" in capsys.readouterr().err

    def test_resource_cap_refusal(self, tmp_path, capsys):
        code = main(["run", "rabi_fig2c", "--n", "1200",
                     "--out", str(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        assert "max_sites" in err and "try n1 = n2 <=" in err

    def test_numerical_failure_exit_code(self, tmp_path, capsys, monkeypatch):
        import edgeqed.cli as cli
        from edgeqed.util import ConvergenceError

        def boom(*args, **kwargs):
            raise ConvergenceError("quadrature stalled at (n=3, m=7)")

        monkeypatch.setattr(cli, "cavity_field", boom)
        code = main(["run", "cavity_profile_fig2ab", "--n", "16",
                     "--out", str(tmp_path)])
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_effective_params_requires_qubit(self, tmp_path, capsys):
        cfg = tmp_path / "empty.json"
        cfg.write_text(json.dumps({"qubits": {"positions": []}}))
        code = main(["run", "effective_params", "--config", str(cfg),
                     "--out", str(tmp_path / "out")])
        assert code == 2
        assert "at least one qubit" in capsys.readouterr().err


class TestScenarios:
    def test_projector_artifacts(self, tmp_path):
        out = tmp_path / "art"
        assert main(["projector", "--positions", "0,2",
                     "--out", str(out)]) == 0
        summary = json.loads((out / "projector" / "summary.json").read_text())
        assert summary["p"][0][0] == pytest.approx(0.21800, abs=5e-6)
        assert summary["p"][0][1] == pytest.approx(0.13783, abs=5e-6)
        manifest = json.loads((out / "projector" / "manifest.json").read_text())
        assert manifest["config"]["qubits"]["positions"] == [0, 2]
        assert manifest["version"]

    def test_effective_model_output(self, tmp_path, capsys):
        out = tmp_path / "art"
        assert main(["effective-model", "--positions", "0", "--g", "0.05",
                     "--out", str(out)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["omega"] == pytest.approx(0.023345, abs=1e-6)

    def test_cavity_scenario_small(self, tmp_path):
        out = tmp_path / "art"
        assert main(["run", "cavity_profile_fig2ab", "--n", "120",
                     "--out", str(out)]) == 0
        summary = json.loads(
            (out / "cavity_profile_fig2ab" / "summary.json").read_text())
        assert summary["edge_slope"] == pytest.approx(-2.0, abs=0.1)
        csv = (out / "cavity_profile_fig2ab" / "cavity.csv").read_text()
        assert csv.startswith("# beta=")
        header = csv.splitlines()[4]
        assert header == "n,m,c"

    def test_spectra_scenario(self, tmp_path):
        out = tmp_path / "art"
        assert main(["spectra", "--beta", "1.5", "--n", "8",
                     "--out", str(out)]) == 0
        summary = json.loads((out / "spectra" / "summary.json").read_text())
        assert summary["support_k_min"] == pytest.approx(2 * np.arccos(0.75))
        bands = (out / "spectra" / "bands.csv").read_text()
        assert "omega_plus" in bands.splitlines()[3]

    def test_circuit_scenario(self, tmp_path):
        out = tmp_path / "art"
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"circuit": {"n1": 6, "n2": 8,
                                               "realizations": 3}}))
        assert main(["circuit", "--config", str(cfg), "--out", str(out)]) == 0
        summary = json.loads((out / "circuit" / "summary.json").read_text())
        assert summary["j2_over_j1"] > 0
        assert summary["flatband_width_mean"] > 0

    def test_evolve_deterministic_csv(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "lattice": {"n1": 16, "n2": 16},
            "run": {"gt_max": 1.0, "sample_gdt": 0.2}}))
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["run", "rabi_fig2c", "--config", str(cfg),
                         "--out", str(out)]) == 0
            outs.append(
                (out / "rabi_fig2c" / "timeseries.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_transfer_scenario_small(self, tmp_path):
        out = tmp_path / "art"
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "lattice": {"n1": 20, "n2": 20},
            "run": {"gt_max": 2.0, "sample_gdt": 0.1}}))
        assert main(["run", "transfer_fig2de", "--config", str(cfg),
                     "--out", str(out)]) == 0
        summary = json.loads(
            (out / "transfer_fig2de" / "summary.json").read_text())
        assert summary["positions"] == [0, 2]
        assert "beating_vs_effective_max" in summary
        csv_text = (out / "transfer_fig2de" / "timeseries.csv").read_text()
        header = next(line for line in csv_text.splitlines()
                      if not line.startswith("#"))
        assert "p_q2_beating" in header.split(",")

    def test_evolve_subcommand(self, tmp_path):
        out = tmp_path / "art"
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "lattice": {"n1": 16, "n2": 16},
            "qubits": {"positions": [0, 3]},
            "run": {"gt_max": 1.0, "sample_gdt": 0.1, "engine": "krylov"}}))
        assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "evolve" / "timeseries.csv").exists()

    def test_convergence_study_smoke(self, tmp_path):
        out = tmp_path / "art"
        assert main(["run", "convergence_study", "--n", "24",
                     "--out", str(out)]) == 0
        summary = json.loads(
            (out / "convergence_study" / "summary.json").read_text())
        assert summary["sizes"] == [24]

    def test_effective_params_dispersive(self, tmp_path, capsys):
        out = tmp_path / "art"
        assert main(["run", "effective_params", "--positions", "0,4",
                     "--delta", "0.05", "--lattice-delta", "0.3",
                     "--out", str(out)]) == 0
        summary = json.loads(
            (out / "effective_params" / "summary.json").read_text())
        assert "k" in summary
        assert summary["k"][0][0] == pytest.approx(summary["k"][1][1])

    def test_json_format_option(self, tmp_path):
        out = tmp_path / "art"
        assert main(["spectra", "--n", "8", "--format", "json",
                     "--out", str(out)]) == 0
        assert (out / "spectra" / "bands.json").exists()
        assert not (out / "spectra" / "bands.csv").exists()
