"""
Tests for run configuration loading and the command-line interface
"""

import json
from argparse import Namespace
from pathlib import Path

import pytest

from oldroyd_fem.__main__ import (
    EXIT_INPUT_ERROR,
    EXIT_OK,
    EXIT_STEP_FAILURE,
    main,
)
from oldroyd_fem.config import RunConfig
from oldroyd_fem.errors import ConfigError
from oldroyd_fem.mesh import build_structured_mesh, write_mesh
from oldroyd_fem.reporters.trace import TRACE_COLUMNS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

EQUILIBRIUM = """\
scheme: dg0
nx: 2
t_final: 0.5
n_steps: 2
initial: equilibrium
"""


class TestRunConfig:
    def test_defaults_are_valid(self):
        config = RunConfig()
        config.validate()
        assert config.total_steps == 10
        assert config.fluid_params().viscosity_fraction == 0.5
        assert config.reg_params().delta == 0.1

    def test_loads_flat_yaml(self, write_config):
        config = RunConfig.from_file(write_config(EQUILIBRIUM + "cutoff: 10\nalpha: 0.01\n"))
        assert config.nx == 2
        assert config.reg_params().cutoff == 10.0
        assert config.fluid_params().diffusion == 0.01

    def test_shipped_configs_load(self):
        for name in ("equilibrium", "cavity_dg0", "cavity_fem1", "lid_continuation"):
            RunConfig.from_file(CONFIGS / f"{name}.yaml")

    def test_bad_delta_names_key_and_line(self):
        with pytest.raises(ConfigError, match="delta") as info:
            RunConfig.from_file(CONFIGS / "bad_delta.yaml")
        assert info.value.key == "delta"
        assert info.value.line == 4

    def test_unknown_key(self, write_config):
        with pytest.raises(ConfigError, match="unknown configuration key") as info:
            RunConfig.from_file(write_config("scheme: dg0\nreynolds: 2.0\n"))
        assert info.value.key == "reynolds"
        assert info.value.line == 2
        assert info.value.column == 1

    def test_nested_sections_rejected(self, write_config):
        with pytest.raises(ConfigError, match="nested"):
            RunConfig.from_file(write_config("physics:\n  re: 1.0\n"))

    def test_yaml_syntax_error_has_a_line(self, write_config):
        with pytest.raises(ConfigError, match="invalid YAML") as info:
            RunConfig.from_file(write_config("scheme: dg0\nnx: [4\n"))
        assert info.value.line is not None

    def test_empty_file_is_all_defaults(self, write_config):
        assert RunConfig.from_file(write_config("")).scheme == "dg0"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            RunConfig.from_file(tmp_path / "absent.yaml")

    @pytest.mark.parametrize(
        "data, key",
        [
            ({"scheme": "dg1"}, "scheme"),
            ({"scheme": "dg0", "velocity_space": "MINI"}, "velocity_space"),
            ({"eps": 1.0}, "eps"),
            ({"re": 0.0}, "re"),
            ({"alpha": -0.1}, "alpha"),
            ({"cutoff": 1.5}, "cutoff"),
            ({"nx": 2.5}, "nx"),
            ({"wi": True}, "wi"),
            ({"dt_list": [0.1, 0.3]}, "dt_list"),
            ({"continuation": [0.25, 0.5]}, "continuation"),
            ({"lambda_min": 3.0, "lambda_max": 2.0}, "lambda_min"),
            ({"initial": "vortex"}, "initial"),
            ({"forcing": "gravity"}, "forcing"),
            ({"domain": [0.0, 1.0, 1.0, 0.0]}, "domain"),
        ],
    )
    def test_range_violations(self, data, key):
        with pytest.raises(ConfigError) as info:
            RunConfig.from_mapping(data)
        assert info.value.key == key

    def test_mini_needs_fem1(self):
        assert RunConfig.from_mapping({"scheme": "fem1", "velocity_space": "MINI"}).velocity_space == "MINI"

    def test_cli_arguments_take_precedence(self):
        config = RunConfig()
        config.merge_cli_args(Namespace(out="elsewhere", parallel_assembly=True, snapshots=2, quiet=True))
        assert config.output_dir == "elsewhere"
        assert config.parallel_assembly
        assert config.snapshots == 2
        assert config.quiet

    def test_negative_snapshot_interval(self):
        with pytest.raises(ConfigError):
            RunConfig().merge_cli_args(Namespace(snapshots=-1))

    def test_hash_keys_exclude_display_flags(self):
        keys = RunConfig().to_dict().keys()
        assert "quiet" not in keys
        assert "delta" in keys


class TestRunCommand:
    def test_equilibrium_run_writes_reports(self, write_config, tmp_path):
        out = tmp_path / "results"
        code = main(["run", "--config", str(write_config(EQUILIBRIUM)), "--out", str(out), "-q"])
        assert code == EXIT_OK
        for name in ("certificate.txt", "trace.csv", "summary.json", "report.html"):
            assert (out / name).is_file()
        assert "verdict = pass" in (out / "certificate.txt").read_text()
        trace = (out / "trace.csv").read_text().splitlines()
        assert trace[0].split(",") == TRACE_COLUMNS
        assert len(trace) == 3
        summary = json.loads((out / "summary.json").read_text())
        assert summary["certificate"]["verdict"] == "pass"
        assert len(summary["steps"]) == 2

    def test_snapshots(self, write_config, tmp_path):
        out = tmp_path / "results"
        code = main(
            ["run", "--config", str(write_config(EQUILIBRIUM)), "--out", str(out), "--snapshots", "1", "-q"]
        )
        assert code == EXIT_OK
        assert sorted(p.name for p in out.glob("*.vtk")) == [
            "snapshot_00000.vtk",
            "snapshot_00001.vtk",
            "snapshot_00002.vtk",
        ]

    def test_bad_config_exits_with_input_error(self, tmp_path, capsys):
        code = main(["run", "--config", str(CONFIGS / "bad_delta.yaml"), "--out", str(tmp_path), "-q"])
        assert code == EXIT_INPUT_ERROR
        assert "delta" in capsys.readouterr().err
        assert not (tmp_path / "certificate.txt").exists()

    def test_missing_mesh_file(self, write_config, tmp_path):
        config = write_config(EQUILIBRIUM + f"mesh_file: {tmp_path / 'absent.mesh'}\n")
        assert main(["run", "--config", str(config), "--out", str(tmp_path), "-q"]) == EXIT_INPUT_ERROR

    def test_step_failure_writes_failure_report(self, write_config, tmp_path, monkeypatch):
        from oldroyd_fem import __main__ as cli
        from oldroyd_fem.errors import StepFailure
        from oldroyd_fem.stepper import Trajectory

        def failing_run(scheme, state, grid, forcing=None, progress=False):
            return Trajectory(scheme.name, grid, [state], failure=StepFailure("diverged", None, [1.0, 2.0], 1))

        monkeypatch.setattr(cli, "run", failing_run)
        out = tmp_path / "results"
        code = main(["run", "--config", str(write_config(EQUILIBRIUM)), "--out", str(out), "-q"])
        assert code == EXIT_STEP_FAILURE
        report = (out / "failure.txt").read_text()
        assert "step = 1" in report
        assert "residual_history = 1, 2" in report
        assert "verdict = incomplete" in (out / "certificate.txt").read_text()

    def test_unregularized_dg0_losing_definiteness_exits_with_step_failure(self, write_config, tmp_path):
        config = write_config(
            "scheme: dg0-unreg\n"
            "nx: 4\n"
            "wi: 10.0\n"
            "t_final: 5.0\n"
            "n_steps: 5\n"
            "initial: lid-driven-cavity\n"
            "forcing: cavity-lid\n"
            "forcing_amplitude: 1000.0\n"
        )
        out = tmp_path / "results"
        code = main(["run", "--config", str(config), "--out", str(out), "-q"])
        assert code == EXIT_STEP_FAILURE
        assert "step = " in (out / "failure.txt").read_text()
        assert "verdict = incomplete" in (out / "certificate.txt").read_text()
        assert (out / "trace.csv").is_file()


class TestOtherCommands:
    def test_mesh_audit(self, tmp_path, capsys):
        path = tmp_path / "square.mesh"
        write_mesh(build_structured_mesh(4, 4), path)
        assert main(["mesh-audit", "--mesh", str(path), "-q"]) == EXIT_OK
        output = capsys.readouterr().out
        assert "non_obtuse = true" in output
        assert "inverse_lumping" in output

    def test_mesh_audit_rejects_bad_file(self, tmp_path):
        path = tmp_path / "bad.mesh"
        path.write_text("2 3 1 0\n0 0\n1 zero\n0 1\n0 1 2\n")
        assert main(["mesh-audit", "--mesh", str(path), "-q"]) == EXIT_INPUT_ERROR

    def test_props_lumping(self, tmp_path, capsys):
        out = tmp_path / "lumping.txt"
        assert main(["props", "--suite", "lumping", "--out", str(out), "-q"]) == EXIT_OK
        assert "passed = true" in capsys.readouterr().out
        assert "suite = lumping" in out.read_text()

    def test_unknown_suite_is_a_usage_error(self):
        with pytest.raises(SystemExit):
            main(["props", "--suite", "nonsense"])
