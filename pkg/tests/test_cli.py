"""Command-line driver: forcing grammar, config hashing, artifacts, exits.

Exit convention under test: 0 success, 1 usage/config/runtime errors,
2 reserved for honest invariant-violation reports (a checker that ran and
failed). Artifact determinism: identical configs give byte-identical
artifacts, with manifest.json (timestamps) the single allowed exception.
"""

import dataclasses
import json
import math

import numpy as np
import pytest

from qprenorm_lab.cli import (
    RunConfig,
    load_config,
    main,
    parse_forcing,
    parse_omega,
)
from qprenorm_lab.errors import ForcingParseError

TWO_PI = 2.0 * math.pi


# -------------------------------------------------------- forcing grammar

def test_forcing_single_cosine():
    g, modes = parse_forcing("[1]*cos(1w)")
    assert modes == [1]
    assert g(0.0, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert g(0.25, 0.7) == pytest.approx(0.0, abs=1e-15)


def test_forcing_coefficients_are_ascending_x_powers():
    g, modes = parse_forcing("[0,1]*sin(1w)")
    assert modes == [1]
    assert g(0.25, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert g(0.25, -0.3) == pytest.approx(-0.3, abs=1e-15)


def test_forcing_sums_terms():
    g, modes = parse_forcing("[1]*cos(1w) + [0.5,0,2]*sin(2w)")
    assert modes == [1, 2]
    th, x = 0.15, 0.4
    want = (math.cos(TWO_PI * th)
            + (0.5 + 2.0 * x ** 2) * math.sin(2 * TWO_PI * th))
    assert g(th, x) == pytest.approx(want, rel=1e-14)


def test_forcing_tolerates_whitespace():
    g, modes = parse_forcing("  [ 1 , 0.5 ] * cos( 2 w )  ")
    assert modes == [2]
    assert g(0.0, 1.0) == pytest.approx(1.5, abs=1e-15)


@pytest.mark.parametrize("bad", [
    "cos(1w)",             # coefficients missing
    "[1]*tan(1w)",         # unknown waveform
    "[1]*cos(w)",          # mode index missing
    "[]*cos(1w)",          # empty coefficient list
    "[1]*cos(1w) % extra", # trailing garbage
])
def test_forcing_rejects_malformed(bad):
    with pytest.raises(ForcingParseError) as err:
        parse_forcing(bad)
    assert err.value.pos is not None


def test_forcing_rejects_mode_beyond_truncation():
    with pytest.raises(ForcingParseError):
        parse_forcing("[1]*cos(17w)", k_max=16)


# -------------------------------------------------------- rotation parsing

def test_omega_named_golden():
    w = parse_omega("golden", 0.0, 1.0, 0)
    assert float(w) == pytest.approx((math.sqrt(5.0) - 1.0) / 2.0, abs=1e-12)


def test_omega_fraction():
    w = parse_omega("1/3", 0.0, 1.0, 0)
    assert float(w) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_omega_continued_fraction_converges_to_golden():
    w = parse_omega("[" + ",".join(["1"] * 30) + "]", 0.0, 1.0, 0)
    assert float(w) == pytest.approx((math.sqrt(5.0) - 1.0) / 2.0, abs=1e-10)


def test_omega_garbage_rejected():
    with pytest.raises(ValueError):
        parse_omega("not-a-number", 0.0, 1.0, 0)


# ------------------------------------------------------------ config hash

def test_config_hash_deterministic_and_out_dir_exempt():
    cfg = RunConfig()
    assert cfg.sha256() == RunConfig().sha256()
    assert dataclasses.replace(cfg, out_dir="elsewhere").sha256() \
        == cfg.sha256()
    assert dataclasses.replace(cfg, plot_data=True).sha256() == cfg.sha256()
    assert dataclasses.replace(cfg, n_max=9).sha256() != cfg.sha256()
    assert dataclasses.replace(cfg, seed=8).sha256() != cfg.sha256()


def test_config_file_round_trip(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(
        "[run]\nnmax = 4\nseed = 11\n\n[family2]\nforcing = [1]*sin(1w)\n")
    cfg = load_config(str(p))
    assert cfg.n_max == 4
    assert cfg.seed == 11
    assert cfg.forcing2 == "[1]*sin(1w)"


@pytest.mark.parametrize("text,fragment", [
    ("[run]\nbogus = 1\n", "unknown key"),
    ("[mystery]\nx = 1\n", "unknown section"),
    ("[run]\nmode = sideways\n", "mode"),
    ("[family]\nforcing = [1]*cos(99w)\n", "mode"),
])
def test_config_file_rejected(tmp_path, text, fragment):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    with pytest.raises((ValueError, ForcingParseError)) as err:
        load_config(str(p))
    assert fragment.split()[0] in str(err.value).lower()


def test_config_missing_file(tmp_path):
    with pytest.raises(ValueError):
        load_config(str(tmp_path / "absent.ini"))


# ------------------------------------------------------------- subcommands

def test_delta_run_and_report(tmp_path):
    out = tmp_path / "out"
    assert main(["--out", str(out), "delta"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["delta_feig"] == pytest.approx(4.6692016091, abs=1e-5)
    assert len(rep["config_sha256"]) == 64
    manifest = json.loads((out / "manifest.json").read_text())
    names = {e["file"] for e in manifest["artifacts"]}
    assert "report.json" in names


def test_fixed_point_run(tmp_path):
    out = tmp_path / "out"
    assert main(["--out", str(out), "fixed-point"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["renorm_residual"] <= 1e-10
    assert rep["h0"]["contained"] is True
    assert (out / "phi_coefficients.csv").exists()


def test_superstable_csv_format(tmp_path):
    out = tmp_path / "out"
    assert main(["--out", str(out), "--nmax", "4", "superstable"]) == 0
    raw = (out / "superstable.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("ascii").strip().split("\n")
    header = lines[0].split(",")
    assert all("[" in cell and "]" in cell for cell in header)
    first = lines[1].split(",")
    assert float(first[1]) == pytest.approx(2.0, abs=1e-9)


def test_spectrum_run(tmp_path):
    out = tmp_path / "out"
    assert main(["--out", str(out), "spectrum"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["pairing_ok"] is True
    lines = (out / "spectrum.csv").read_text().strip().split("\n")
    assert lines[0].count(",") == 2  # re, im, modulus
    re0, im0, mod0 = (float(v) for v in lines[1].split(","))
    assert math.hypot(re0, im0) == pytest.approx(mod0, rel=1e-12)
    assert mod0 == pytest.approx(rep["spectral_radius"], rel=1e-12)


def test_dt_check_run(tmp_path):
    out = tmp_path / "out"
    assert main(["--out", str(out), "dt-check"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["max_residual"] <= 1e-10


def test_curve_run(tmp_path):
    out = tmp_path / "out"
    assert main(["--out", str(out), "--nmax", "2", "curve"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["residual"] <= 1e-10
    assert rep["lyapunov"] < 0.0
    lines = (out / "curve.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + rep["grid"]


def test_slopes_run_beta_mirrors_alpha(tmp_path):
    out = tmp_path / "out"
    assert main(["--out", str(out), "--nmax", "2", "slopes"]) == 0
    rep = json.loads((out / "report.json").read_text())
    for n in rep["alpha_prime"]:
        assert rep["beta_prime"][n] == pytest.approx(
            -rep["alpha_prime"][n], rel=1e-9)


def test_plot_data_flag_emits_dat(tmp_path):
    out = tmp_path / "out"
    assert main(["--out", str(out), "--nmax", "4", "--plot-data",
                 "superstable"]) == 0
    assert (out / "superstable.dat").exists()


# ------------------------------------------------------------ determinism

def test_identical_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--out", str(a), "--nmax", "4", "superstable"]) == 0
    assert main(["--out", str(b), "--nmax", "4", "superstable"]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "superstable.csv").read_bytes() \
        == (b / "superstable.csv").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert {e["file"]: e["sha256"] for e in ma["artifacts"]} \
        == {e["file"]: e["sha256"] for e in mb["artifacts"]}


# -------------------------------------------------------------- exit codes

def test_exit_zero_help():
    assert main(["--help"]) == 0


def test_exit_one_usage_errors():
    assert main([]) == 1
    assert main(["observe", "--which", "5"]) == 1
    assert main(["no-such-command"]) == 1


def test_exit_one_bad_forcing_config(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[family]\nforcing = [1]*tan(1w)\n")
    assert main(["--config", str(p), "--out", str(tmp_path / "o"),
                 "delta"]) == 1


def test_exit_one_rational_rotation(tmp_path):
    assert main(["--omega", "1/3", "--out", str(tmp_path / "o"),
                 "observe", "--which", "2"]) == 1


def test_exit_two_on_failed_checker(tmp_path):
    # second-mode forcing renormalizes along 2 omega: observation 1 must
    # report FAIL, which the driver maps to exit code 2
    p = tmp_path / "neg.ini"
    p.write_text("[run]\nnmax = 6\n\n[family2]\nforcing = [1]*cos(2w)\n")
    out = tmp_path / "o"
    assert main(["--config", str(p), "--out", str(out),
                 "observe", "--which", "1"]) == 2
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] is False


# --------------------------------------------------------------- env knob

def test_thread_cap_env(tmp_path):
    import subprocess, sys
    code = ("import os; os.environ['QPRENORM_THREADS'] = '2'; "
            "import qprenorm_lab; print(os.environ['OMP_NUM_THREADS'])")
    res = subprocess.run([sys.executable, "-c", code],
                         capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "2"
