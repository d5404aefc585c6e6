"""Command-line interface tests: config handling, commands, exit codes."""
import json
import math
from hashlib import sha256

import numpy as np
import pytest

import lipstep as ls
from lipstep.cli import (EXIT_BOUNDARY, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE,
                         RunConfig, main, parse_config, serialize_config)

# nominal-gait boundary pair in CLI syntax, frozen from make_nominal_step()
X0_NOMINAL = "0.010800004087452728,0.21080000408745275,0,0"
XF_NOMINAL = "0.21080000408745275,0.010800004087452728,0,0"

WIDE = ["--omega", "1", "--bounds-x=-1,2", "--bounds-y=-1,2"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


class TestConfig:
    def test_defaults_round_trip(self):
        assert parse_config(serialize_config(RunConfig())) == RunConfig()

    def test_parse_serialize_parse_is_identity(self):
        text = ("com_height = 0.5\nsignal_kind = square_wave\n"
                "signal_magnitude = 0.2\ntick = 0.002\nqp_nodes = 6\n"
                "out_dir = /tmp/somewhere\n")
        cfg = parse_config(text)
        assert parse_config(serialize_config(cfg)) == cfg

    def test_omega_and_bounds_derived_from_geometry(self):
        cfg = parse_config("com_height = 0.5\nfoot_length = 0.3\n")
        assert cfg.omega == pytest.approx(math.sqrt(9.81 / 0.5), rel=1e-15)
        assert cfg.bound_x_min == -0.15 and cfg.bound_x_max == 0.15
        assert cfg.bound_y_min == -0.05 and cfg.bound_y_max == 0.05

    def test_explicit_omega_wins_over_geometry(self):
        cfg = parse_config("com_height = 0.5\nomega = 1.0\n")
        assert cfg.omega == 1.0

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config("# header\n\n  tick = 0.002  # trailing\n")
        assert cfg.tick == 0.002

    @pytest.mark.parametrize("text", [
        "not_a_key = 3\n",
        "tick = 0.001\ntick = 0.002\n",
        "tick\n",
        "tick = \n",
        "tick = fast\n",
        "qp_nodes = 3.5\n",
        "tick = -0.001\n",
        "qp_nodes = 1\n",
        "bisect_iters = 0\n",
        "seed = -1\n",
        "bound_x_min = 2\nbound_x_max = 1\n",
        "signal_kind = triangle\n",
        "com_height = 0\n",
    ])
    def test_rejects_bad_config(self, text):
        with pytest.raises(ValueError):
            parse_config(text)


class TestScan:
    def test_equilibrium_pair_is_half_line_from_zero(self, capsys, tmp_path):
        out = tmp_path / "scan.csv"
        code, stdout, _ = run_cli(
            capsys, "scan", "--x0", "0.05,-0.05,0,0", "--xf", "0.05,-0.05,0,0",
            "--tmax", "0.5", "--dt", "0.1", "--out", str(out))
        assert code == EXIT_OK
        assert "sagittal: HalfLine t_min=0 (infimum)" in stdout
        assert "lateral: HalfLine t_min=0 (infimum)" in stdout
        lines = out.read_text().splitlines()
        assert lines[0] == "t,s;feasible,0/1"
        assert [ln.split(";")[1] for ln in lines[1:]] == ["1"] * 5

    def test_two_component_witness_endpoints(self, capsys, tmp_path):
        # ground truth from the exhaustive scan of this pair at omega = 1,
        # bounds (-1, 2): feasible on [0.45583, 0.63938] and [3.04950, inf)
        out = tmp_path / "scan.csv"
        code, stdout, _ = run_cli(
            capsys, "scan", *WIDE, "--x0", "1,2,1,2", "--xf", "1,0.8,1,0.8",
            "--tmax", "4.0", "--dt", "0.5", "--out", str(out))
        assert code == EXIT_OK
        line = stdout.splitlines()[0]
        assert line.startswith("sagittal: TwoComponents")
        vals = dict(tok.split("=") for tok in line.split()[2:])
        assert float(vals["t_min"]) == pytest.approx(0.4558322766124229, abs=1e-6)
        assert float(vals["a"]) == pytest.approx(0.6393843361057856, abs=1e-4)
        assert float(vals["b"]) == pytest.approx(3.04949511800815, abs=1e-4)
        feas = [ln.split(";")[1] for ln in out.read_text().splitlines()[1:]]
        assert feas == ["1", "0", "0", "0", "0", "0", "1", "1"]

    def test_unreachable_pair_is_empty(self, capsys, tmp_path):
        out = tmp_path / "scan.csv"
        code, stdout, _ = run_cli(
            capsys, "scan", *WIDE, "--x0", "3,-3,3,-3", "--xf", "0.5,-0.5,0.5,-0.5",
            "--tmax", "1.0", "--dt", "0.25", "--out", str(out))
        assert code == EXIT_OK
        assert "sagittal: Empty" in stdout
        feas = {ln.split(";")[1] for ln in out.read_text().splitlines()[1:]}
        assert feas == {"0"}

    def test_boundary_state_exits_2(self, capsys, tmp_path):
        code, _, stderr = run_cli(
            capsys, "scan", *WIDE, "--x0", "2,0,0,0", "--xf", "0.5,-0.5,0.5,-0.5",
            "--out", str(tmp_path / "s.csv"))
        assert code == EXIT_BOUNDARY
        assert "boundary-state rejection" in stderr

    def test_malformed_state_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["scan", "--x0", "1,2,3", "--xf", "0,0,0,0",
                  "--out", str(tmp_path / "s.csv")])
        assert exc.value.code == EXIT_USAGE

    def test_bad_grid_exits_1(self, capsys, tmp_path):
        code, _, stderr = run_cli(
            capsys, "scan", "--x0", "0.05,-0.05,0,0", "--xf", "0.05,-0.05,0,0",
            "--tmax", "0.5", "--dt", "-0.1", "--out", str(tmp_path / "s.csv"))
        assert code == EXIT_USAGE
        assert "dt" in stderr


class TestReplan:
    def test_feasible_target_echoed(self, capsys):
        code, stdout, _ = run_cli(
            capsys, "replan", "--x0", X0_NOMINAL, "--xf", XF_NOMINAL,
            "--t-target", "0.9", "--t-guess", "0.9")
        assert code == EXIT_OK
        res = json.loads(stdout)
        assert res["t_star"] == 0.9
        assert res["target_was_feasible"] is True
        assert res["iterations_used"] == 0
        assert len(res["plan"]["nodes"]) == 8
        assert res["plan"]["nodes"][-1] == 0.9
        # 17-significant-digit float formatting, not repr shortest
        assert "0.90000000000000002" in stdout

    def test_infeasible_target_projects_toward_boundary(self, capsys):
        code, stdout, _ = run_cli(
            capsys, "replan", "--x0", X0_NOMINAL, "--xf", XF_NOMINAL,
            "--t-target", "0.05", "--t-guess", "0.9")
        assert code == EXIT_OK
        res = json.loads(stdout)
        assert res["target_was_feasible"] is False
        assert res["iterations_used"] == 10
        assert 0.05 < res["t_star"] < 0.9
        assert res["qp_calls"] >= 12

    def test_infeasible_guess_exits_3(self, capsys):
        code, _, stderr = run_cli(
            capsys, "replan", "--x0", X0_NOMINAL, "--xf", XF_NOMINAL,
            "--t-target", "0.05", "--t-guess", "0.01")
        assert code == EXIT_INFEASIBLE
        assert "warm start" in stderr

    def test_qp_nodes_flag_sets_plan_size(self, capsys):
        code, stdout, _ = run_cli(
            capsys, "replan", "--x0", X0_NOMINAL, "--xf", XF_NOMINAL,
            "--t-target", "0.9", "--t-guess", "0.9", "--qp-nodes", "4")
        assert code == EXIT_OK
        assert len(json.loads(stdout)["plan"]["nodes"]) == 4

    def test_bad_target_exits_1(self, capsys):
        code, _, stderr = run_cli(
            capsys, "replan", "--x0", X0_NOMINAL, "--xf", XF_NOMINAL,
            "--t-target", "-1.0", "--t-guess", "0.9")
        assert code == EXIT_USAGE
        assert "t_target" in stderr


class TestFig1:
    def test_writes_trace_and_sidecar(self, capsys, tmp_path):
        code, stdout, _ = run_cli(
            capsys, "fig1", "--tick", "0.01", "--out-dir", str(tmp_path))
        assert code == EXIT_OK
        out = tmp_path / "fig1.csv"
        lines = out.read_text().splitlines()
        assert lines[0] == ls.gait_sim.FIG1_HEADER
        assert len(lines) - 1 > 50
        meta = json.loads((tmp_path / "fig1.csv.meta.json").read_text())
        assert meta["seed"] == 0
        assert set(meta) == {"seed", "config_hash", "git_revision"}
        assert "fig1:" in stdout and "ticks" in stdout

    def test_flag_override_lands_in_config_hash(self, capsys, tmp_path):
        run_cli(capsys, "fig1", "--tick", "0.01", "--out-dir", str(tmp_path))
        meta = json.loads((tmp_path / "fig1.csv.meta.json").read_text())
        cfg = RunConfig()
        assert meta["config_hash"] != sha256(
            serialize_config(cfg).encode()).hexdigest()
        from dataclasses import replace
        expected = sha256(serialize_config(replace(
            cfg, tick=0.01, out_dir=str(tmp_path))).encode()).hexdigest()
        assert meta["config_hash"] == expected

    def test_reruns_are_byte_identical(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli(capsys, "fig1", "--tick", "0.01", "--out", str(a))
        run_cli(capsys, "fig1", "--tick", "0.01", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_config_file_drives_run(self, capsys, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("tick = 0.01\nsignal_magnitude = 1.2\n")
        code, _, _ = run_cli(capsys, "fig1", "--config", str(cfgfile),
                             "--out-dir", str(tmp_path))
        assert code == EXIT_OK
        rows = (tmp_path / "fig1.csv").read_text().splitlines()[1:]
        v = np.array([float(r.split(";")[1]) for r in rows])
        assert v.max() == pytest.approx(1.2, abs=0.01)
        assert v.min() == pytest.approx(0.8, abs=0.01)

    def test_missing_config_file_exits_1(self, capsys, tmp_path):
        code, _, stderr = run_cli(
            capsys, "fig1", "--config", str(tmp_path / "nope.cfg"))
        assert code == EXIT_USAGE
        assert "nope.cfg" in stderr


class TestHeatmap:
    def test_single_cell_both_modes(self, capsys, tmp_path):
        code, stdout, _ = run_cli(
            capsys, "heatmap", "--magnitudes", "1.5", "--durations", "0.4",
            "--n-starts", "2", "--horizon", "2.5", "--qp-nodes", "4",
            "--out-dir", str(tmp_path))
        assert code == EXIT_OK
        lines = (tmp_path / "heatmap.csv").read_text().splitlines()
        assert lines[0] == ls.gait_sim.HEATMAP_HEADER
        assert len(lines) == 3
        assert lines[1].split(";")[2] == "naive"
        assert lines[2].split(";")[2] == "replan"
        assert (tmp_path / "heatmap.csv.meta.json").exists()

    def test_mode_filter_keeps_requested_rows(self, capsys, tmp_path):
        out = tmp_path / "hm.csv"
        code, _, _ = run_cli(
            capsys, "heatmap", "--magnitudes", "1.5", "--durations", "0.4",
            "--n-starts", "1", "--horizon", "2.0", "--qp-nodes", "4",
            "--mode", "replan", "--out", str(out))
        assert code == EXIT_OK
        rows = out.read_text().splitlines()[1:]
        assert len(rows) == 1 and rows[0].split(";")[2] == "replan"

    def test_invalid_cell_written_blank(self, capsys, tmp_path):
        out = tmp_path / "hm.csv"
        code, _, _ = run_cli(
            capsys, "heatmap", "--magnitudes", "1.0", "--durations", "1.0",
            "--n-starts", "1", "--out", str(out))
        assert code == EXIT_OK
        rows = out.read_text().splitlines()[1:]
        assert all(r.split(";")[3] == "" and r.split(";")[4] == "0"
                   for r in rows)


class TestBench:
    def test_stats_line_and_files(self, capsys, tmp_path):
        code, stdout, _ = run_cli(
            capsys, "bench", "--bench-iters", "64", "--seed", "7",
            "--qp-nodes", "4", "--out-dir", str(tmp_path))
        assert code == EXIT_OK
        text = (tmp_path / "bench.csv").read_text()
        assert stdout == text
        header, line = text.splitlines()
        assert header == ls.gait_sim.BENCH_HEADER
        vals = [float(v) for v in line.split(";")]
        assert len(vals) == 5
        assert 0.0 < vals[0] <= vals[2] <= vals[1]
        meta = json.loads((tmp_path / "bench.csv.meta.json").read_text())
        assert meta["seed"] == 7


class TestExitCodes:
    def test_help_exits_0(self):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0

    def test_no_command_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EXIT_USAGE

    def test_unknown_command_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == EXIT_USAGE

    def test_unknown_config_key_exits_1(self, capsys, tmp_path):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text("frobnication_level = 11\n")
        code, _, stderr = run_cli(capsys, "fig1", "--config", str(cfgfile))
        assert code == EXIT_USAGE
        assert "unknown key" in stderr
