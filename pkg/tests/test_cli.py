"""End-to-end tests of the command line interface, run in-process."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lapdiff.cli import main
from lapdiff.experiments import SweepInterrupted, SweepRow
from lapdiff.matio import (
    read_keyvalue,
    read_matrix_csv,
    write_matrix_csv,
    write_samples_csv,
)
from lapdiff.matpower import bundled_case_text
from lapdiff.sampling import sample_potentials

TWO_BUS = """\
function mpc = case2
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;
  2 1 0 0 0 0 1 1 0 0 1 1.1 0.9;
];
mpc.branch = [
  1 2 0.0 0.5 0 0 0 0 0 0 1;
];
"""


def run(*argv):
    return main(list(argv))


def gen_scenario(out, p=16, seed=7, extra=()):
    rc = run(
        "gen",
        "--p", str(p),
        "--seed", str(seed),
        "--out", str(out),
        "--margin", "0.3",
        "--scale", str(1.0 / (10 * p)),
        "--weight-min", "1.0",
        "--weight-max", "1.0",
        *extra,
    )
    assert rc == 0
    return out


class TestGen:
    def test_writes_five_matrices_and_manifest(self, tmp_path):
        gen_scenario(tmp_path)
        for name in ("b1", "b2", "delta_true", "sigma_x1", "sigma_x2"):
            assert read_matrix_csv(tmp_path / f"{name}.csv").shape == (16, 16)
        manifest = read_keyvalue(tmp_path / "manifest.txt")
        assert manifest["p"] == "16" and manifest["seed"] == "7"

    def test_b2_is_b1_plus_delta(self, tmp_path):
        gen_scenario(tmp_path)
        b1 = read_matrix_csv(tmp_path / "b1.csv")
        b2 = read_matrix_csv(tmp_path / "b2.csv")
        delta = read_matrix_csv(tmp_path / "delta_true.csv")
        assert_allclose(b2, b1 + delta, atol=1e-8)

    def test_deterministic_bytes(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        gen_scenario(first)
        gen_scenario(second)
        for name in ("b1", "b2", "delta_true", "sigma_x1", "sigma_x2", "manifest"):
            ext = "txt" if name == "manifest" else "csv"
            assert (first / f"{name}.{ext}").read_bytes() == (
                second / f"{name}.{ext}"
            ).read_bytes()

    def test_non_square_p_rejected(self, tmp_path, capsys):
        rc = run("gen", "--p", "15", "--out", str(tmp_path))
        assert rc == 2
        assert "p = 15" in capsys.readouterr().err

    def test_unwritable_out_is_io_error(self, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("x")
        rc = run("gen", "--p", "16", "--out", str(blocker / "sub"))
        assert rc == 4


@pytest.fixture
def scenario_with_samples(tmp_path):
    gen_scenario(tmp_path, p=16, seed=7)
    b1 = read_matrix_csv(tmp_path / "b1.csv")
    b2 = read_matrix_csv(tmp_path / "b2.csv")
    sigma1 = read_matrix_csv(tmp_path / "sigma_x1.csv")
    sigma2 = read_matrix_csv(tmp_path / "sigma_x2.csv")
    y1 = sample_potentials(b1, sigma1, 4000, seed=[7, 101])
    y2 = sample_potentials(b2, sigma2, 4000, seed=[7, 102])
    write_samples_csv(tmp_path / "y1.csv", y1)
    write_samples_csv(tmp_path / "y2.csv", y2)
    return tmp_path


def estimate_flags(d, out, *extra):
    return (
        "estimate",
        "--samples1", str(d / "y1.csv"),
        "--samples2", str(d / "y2.csv"),
        "--sigma-x1", str(d / "sigma_x1.csv"),
        "--sigma-x2", str(d / "sigma_x2.csv"),
        "--out", str(out),
        *extra,
    )


class TestEstimate:
    def test_recovers_support_at_large_n(self, scenario_with_samples, tmp_path):
        d = scenario_with_samples
        out = tmp_path / "est"
        rc = run(*estimate_flags(d, out, "--lambda-scale", "2.0", "--rho", "0.1"))
        assert rc == 0
        delta_hat = read_matrix_csv(out / "delta_hat.csv")
        truth = read_matrix_csv(d / "delta_true.csv")
        off = ~np.eye(16, dtype=bool)
        assert np.array_equal((np.abs(delta_hat) > 0.25) & off, (truth != 0) & off)
        report = read_keyvalue(out / "report.txt")
        assert report["converged"] == "true"
        assert report["estimator"] == "dtrace"

    def test_huge_lambda_zeroes_off_diagonals(self, scenario_with_samples, tmp_path):
        d = scenario_with_samples
        out = tmp_path / "shrunk"
        rc = run(*estimate_flags(d, out, "--lambda", "1e9", "--rho", "0.1"))
        assert rc == 0
        delta_hat = read_matrix_csv(out / "delta_hat.csv")
        off = ~np.eye(16, dtype=bool)
        assert np.max(np.abs(delta_hat[off])) == 0.0

    def test_plugin_undefined_below_p(self, tmp_path, capsys):
        gen_scenario(tmp_path, p=16)
        b1 = read_matrix_csv(tmp_path / "b1.csv")
        sigma1 = read_matrix_csv(tmp_path / "sigma_x1.csv")
        y = sample_potentials(b1, sigma1, 8, seed=3)
        write_samples_csv(tmp_path / "y1.csv", y)
        write_samples_csv(tmp_path / "y2.csv", y)
        rc = run(*estimate_flags(tmp_path, tmp_path / "o", "--estimator", "plugin"))
        assert rc == 3
        assert "plugin undefined for n <= p" in capsys.readouterr().err

    def test_covariance_route_matches_samples_route(self, scenario_with_samples, tmp_path):
        d = scenario_with_samples
        y1 = np.loadtxt(d / "y1.csv", delimiter=",", skiprows=1)
        y2 = np.loadtxt(d / "y2.csv", delimiter=",", skiprows=1)
        write_matrix_csv(d / "c1.csv", y1.T @ y1 / y1.shape[0])
        write_matrix_csv(d / "c2.csv", y2.T @ y2 / y2.shape[0])
        out_a = tmp_path / "from_samples"
        out_b = tmp_path / "from_cov"
        assert run(*estimate_flags(d, out_a, "--lambda", "0.05", "--rho", "0.1")) == 0
        rc = run(
            "estimate",
            "--cov1", str(d / "c1.csv"),
            "--cov2", str(d / "c2.csv"),
            "--sigma-x1", str(d / "sigma_x1.csv"),
            "--sigma-x2", str(d / "sigma_x2.csv"),
            "--lambda", "0.05",
            "--rho", "0.1",
            "--out", str(out_b),
        )
        assert rc == 0
        # the covariance CSV is quantized to 9 significant digits, so the two
        # routes agree to CSV precision, not machine precision
        assert_allclose(
            read_matrix_csv(out_a / "delta_hat.csv"),
            read_matrix_csv(out_b / "delta_hat.csv"),
            atol=1e-6,
        )

    def test_unknown_sigma_route(self, scenario_with_samples, tmp_path):
        d = scenario_with_samples
        out = tmp_path / "uns"
        rc = run(
            "estimate",
            "--samples1", str(d / "y1.csv"),
            "--samples2", str(d / "y2.csv"),
            "--unknown-sigma",
            "--lambda", "0.05",
            "--rho", "0.1",
            "--out", str(out),
        )
        assert rc == 0
        report = read_keyvalue(out / "report.txt")
        assert report["unknown_sigma"] == "true"
        assert (out / "delta_hat.csv").exists()

    def test_sigma_flags_conflict_with_unknown_sigma(self, scenario_with_samples, tmp_path):
        d = scenario_with_samples
        rc = run(*estimate_flags(d, tmp_path / "x", "--unknown-sigma"))
        assert rc == 2

    def test_missing_sigma_flags_rejected(self, scenario_with_samples, tmp_path, capsys):
        d = scenario_with_samples
        rc = run(
            "estimate",
            "--samples1", str(d / "y1.csv"),
            "--samples2", str(d / "y2.csv"),
            "--out", str(tmp_path / "x"),
        )
        assert rc == 2
        assert "--sigma-x1" in capsys.readouterr().err

    def test_both_input_modes_rejected(self, scenario_with_samples, tmp_path):
        d = scenario_with_samples
        rc = run(
            "estimate",
            "--samples1", str(d / "y1.csv"),
            "--samples2", str(d / "y2.csv"),
            "--cov1", str(d / "y1.csv"),
            "--cov2", str(d / "y2.csv"),
            "--unknown-sigma",
            "--out", str(tmp_path / "x"),
        )
        assert rc == 2

    def test_missing_input_file(self, tmp_path, capsys):
        rc = run(
            "estimate",
            "--samples1", str(tmp_path / "absent.csv"),
            "--samples2", str(tmp_path / "absent.csv"),
            "--unknown-sigma",
            "--out", str(tmp_path),
        )
        assert rc == 2
        assert "absent.csv" in capsys.readouterr().err

    def test_unconverged_exit_code(self, scenario_with_samples, tmp_path):
        d = scenario_with_samples
        out = tmp_path / "short"
        rc = run(*estimate_flags(d, out, "--max-iter", "1", "--lambda", "0.05"))
        assert rc == 3
        # outputs are still written for inspection
        assert (out / "delta_hat.csv").exists()
        assert read_keyvalue(out / "report.txt")["converged"] == "false"


class TestExperiment:
    def test_synth_row_count_and_determinism(self, tmp_path):
        cfg = tmp_path / "desk.cfg"
        cfg.write_text(
            "# desk scale sweep\n"
            "dims = 9\n"
            "ratios = 0.5, 2\n"
            "instances = 2\n"
            "lambda_scale = 2.0\n"
            "margin = 0.3\n"
            "base_scale = 0.0111\n"
            "weight_min = 1.0\n"
            "weight_max = 1.0\n"
            "support_epsilon = 0.25\n"
            "rho = 0.1\n"
            "seed = 7\n"
        )
        out1 = tmp_path / "rows1.csv"
        out2 = tmp_path / "rows2.csv"
        assert run("experiment", "synth", "--config", str(cfg), "--out", str(out1)) == 0
        assert run("experiment", "synth", "--config", str(cfg), "--out", str(out2)) == 0
        lines1 = out1.read_text().splitlines()
        lines2 = out2.read_text().splitlines()
        assert len(lines1) == 1 + 2 * 2
        assert lines1[0].startswith("p,n,ratio,instance,estimator")
        # identical apart from the wall-time column
        strip = lambda lines: [",".join(l.split(",")[:-1]) for l in lines]
        assert strip(lines1) == strip(lines2)

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "desk.cfg"
        cfg.write_text("dims = 9\nratios = 0.5\ninstances = 4\nrho = 0.1\nseed = 1\n")
        out = tmp_path / "rows.csv"
        rc = run(
            "experiment", "synth",
            "--config", str(cfg),
            "--instances", "1",
            "--out", str(out),
        )
        assert rc == 0
        assert len(out.read_text().splitlines()) == 2

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("dims = 9\nvoltage = 11\n")
        rc = run("experiment", "synth", "--config", str(cfg), "--out", str(tmp_path / "r.csv"))
        assert rc == 2
        assert "voltage" in capsys.readouterr().err

    def test_ratios_and_sample_sizes_conflict(self, tmp_path, capsys):
        rc = run(
            "experiment", "synth",
            "--dims", "9",
            "--ratios", "1,2",
            "--sample-sizes", "20,40",
            "--out", str(tmp_path / "r.csv"),
        )
        assert rc == 2
        assert "not both" in capsys.readouterr().err

    def test_power_emits_117_dim_rows(self, tmp_path):
        out = tmp_path / "power.csv"
        rc = run(
            "experiment", "power",
            "--sample-sizes", "200",
            "--instances", "1",
            "--rho", "0.1",
            "--max-iter", "2000",
            "--base-scale", str(1.0 / 600.0),
            "--weight-min", "4.0",
            "--weight-max", "4.0",
            "--support-epsilon", "2.0",
            "--lambda-scale", "2.0",
            "--out", str(out),
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert lines[1].startswith("117,200,")

    def test_plugin_compare_writes_per_density_files(self, tmp_path):
        prefix = tmp_path / "cmp"
        rc = run(
            "experiment", "plugin-compare",
            "--p", "12",
            "--densities", "0.5,0.8",
            "--sample-sizes", "6,40",
            "--instances", "2",
            "--rho", "0.1",
            "--lambda-scale", "2.0",
            "--base-scale", str(1.0 / 120.0),
            "--margin", "0.3",
            "--out", str(prefix),
        )
        assert rc == 0
        for tag in ("0.5", "0.8"):
            lines = (tmp_path / f"cmp_s{tag}.csv").read_text().splitlines()
            # 2 sample sizes x 2 instances x 2 estimators
            assert len(lines) == 1 + 8
            tags = {line.split(",")[4] for line in lines[1:]}
            assert tags == {"dtrace", "plugin"}

    def test_interrupt_flushes_rows(self, tmp_path, monkeypatch, capsys):
        rows = (
            SweepRow(
                p=9, n=36, ratio=1.0, instance=0, estimator="dtrace",
                support_recovered=True, sup_norm_error=0.1, iterations=10,
                converged=True, wall_time_ms=1.0,
            ),
        )

        def fake_run_sweep(cfg, row_callback=None):
            raise SweepInterrupted(rows)

        monkeypatch.setattr("lapdiff.cli.run_sweep", fake_run_sweep)
        out = tmp_path / "partial.csv"
        rc = run("experiment", "synth", "--dims", "9", "--out", str(out))
        assert rc == 130
        assert "flushed 1 completed rows" in capsys.readouterr().err
        lines = out.read_text().splitlines()
        assert len(lines) == 2 and lines[1].startswith("9,36,")


class TestParseMatpower:
    def test_two_bus_laplacian(self, tmp_path):
        case = tmp_path / "two.m"
        case.write_text(TWO_BUS)
        out = tmp_path / "parsed"
        rc = run("parse-matpower", "--case", str(case), "--out", str(out))
        assert rc == 0
        lap = read_matrix_csv(out / "laplacian.csv")
        assert_allclose(lap, np.array([[2.0, -2.0], [-2.0, 2.0]]))
        reduced = read_matrix_csv(out / "reduced.csv")
        assert reduced.shape == (1, 1)
        summary = read_keyvalue(out / "summary.txt")
        assert summary["bus_count"] == "2"
        assert summary["ground_bus"] == "1"

    def test_bundled_118_case_reduces_to_117(self, tmp_path):
        case = tmp_path / "grid118.m"
        case.write_text(bundled_case_text())
        out = tmp_path / "parsed"
        rc = run("parse-matpower", "--case", str(case), "--out", str(out))
        assert rc == 0
        assert read_matrix_csv(out / "reduced.csv").shape == (117, 117)
        summary = read_keyvalue(out / "summary.txt")
        assert summary["bus_count"] == "118"
        assert summary["branch_count"] == "186"
        assert summary["ground_bus"] == "69"

    def test_corrupt_case_cites_line(self, tmp_path, capsys):
        case = tmp_path / "bad.m"
        case.write_text(TWO_BUS.replace("2 1 0 0", "2 oops 0 0"))
        rc = run("parse-matpower", "--case", str(case), "--out", str(tmp_path / "x"))
        assert rc == 2
        assert "line" in capsys.readouterr().err

    def test_ground_override(self, tmp_path):
        case = tmp_path / "two.m"
        case.write_text(TWO_BUS)
        out = tmp_path / "g"
        rc = run("parse-matpower", "--case", str(case), "--ground", "2", "--out", str(out))
        assert rc == 0
        assert read_keyvalue(out / "summary.txt")["ground_bus"] == "2"


class TestParser:
    def test_missing_subcommand_exits_2(self):
        assert run() == 2

    def test_unknown_flag_exits_2(self):
        assert run("gen", "--p", "16", "--frequency", "50") == 2

    def test_help_exits_0(self):
        assert run("--help") == 0
