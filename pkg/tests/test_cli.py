"""Command-line entry points: exit codes, output formats, round trips."""

import math

import numpy as np
import pytest

from vaporplate import (OpticalResponse, load_preset, read_sweep_csv,
                        synthesize_scan)
from vaporplate.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_preset(capsys):
    code, out, _ = run(capsys, "validate", "--preset", "fig1-ideal")
    assert code == 0
    assert "OK" in out
    assert "levels: 4" in out


def test_solve_prints_populations_and_response(capsys):
    code, out, _ = run(capsys, "solve", "--preset", "fig1-ideal",
                       "--signal-detuning", "0")
    assert code == 0
    assert "populations:" in out
    assert "phi_d" in out
    lines = out.splitlines()
    start = lines.index("populations:") + 1
    stop = lines.index("single-velocity response:")
    pops = [float(line.split()[-1]) for line in lines[start:stop]]
    # printed with 7 significant digits, so the sum carries rounding noise
    assert sum(pops) == pytest.approx(1.0, abs=1e-5)


def test_sweep_writes_readable_csv(tmp_path, capsys):
    out_csv = str(tmp_path / "sweep.csv")
    code, out, _ = run(capsys, "sweep", "--preset", "fig1-ideal",
                       "--out", out_csv, "--points", "5")
    assert code == 0
    assert "wrote 5 rows" in out
    det, responses = read_sweep_csv(out_csv)
    assert len(det) == 5 and len(responses) == 5
    with open(out_csv) as fh:
        assert fh.readline().startswith("# vaporplate sweep CSV")


def test_lcr_scan_output(capsys):
    code, out, _ = run(capsys, "lcr", "--preset", "fig1-ideal",
                       "--signal-detuning", "-50",
                       "--thetas-deg", "0", "90", "180")
    assert code == 0
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines[0] == "retardance,theta_deg,intensity"
    assert len(lines) == 4
    for line in lines[1:]:
        assert float(line.split(",")[2]) >= 0.0


def test_invert_round_trip(tmp_path, capsys):
    response = OpticalResponse(phi_plus=0.35, phi_minus=0.05,
                               alpha_plus=0.22, alpha_minus=0.10)
    thetas = np.radians([30.0, 90.0, 150.0])
    scan = synthesize_scan(response, thetas, e0=2.0)
    path = tmp_path / "scan.csv"
    path.write_text("theta_deg,intensity\n" + "\n".join(
        f"{math.degrees(t):.10f},{i:.12e}"
        for t, i in zip(scan.thetas, scan.intensities)))
    code, out, _ = run(capsys, "invert", "--scan", str(path),
                       "--e0", "2.0", "--alpha-minus", "0.10")
    assert code == 0
    got = {}
    for line in out.splitlines():
        key, _, value = line.partition("=")
        got[key.strip()] = value.split()[0]
    assert float(got["alpha_d"]) == pytest.approx(response.alpha_d, abs=1e-6)
    assert float(got["phi_d"]) == pytest.approx(
        math.degrees(response.phi_d), abs=1e-4)


def test_invert_least_squares_path(tmp_path, capsys):
    response = OpticalResponse(phi_plus=0.9, phi_minus=0.1,
                               alpha_plus=0.15, alpha_minus=0.05)
    thetas = np.radians(np.linspace(10.0, 170.0, 9))
    scan = synthesize_scan(response, thetas, e0=1.0)
    path = tmp_path / "scan.csv"
    path.write_text("\n".join(
        f"{math.degrees(t):.10f},{i:.12e}"
        for t, i in zip(scan.thetas, scan.intensities)))
    code, out, _ = run(capsys, "invert", "--scan", str(path),
                       "--e0", "1.0", "--alpha-minus", "0.05")
    assert code == 0
    alpha_line = next(l for l in out.splitlines() if l.startswith("alpha_d"))
    assert float(alpha_line.split("=")[1]) == pytest.approx(
        response.alpha_d, abs=1e-6)


def test_export_branching_table(tmp_path, capsys):
    out_csv = str(tmp_path / "branching.csv")
    code, _, _ = run(capsys, "export-table1", "--out", out_csv)
    assert code == 0
    lines = open(out_csv).read().splitlines()
    assert len(lines) == 9          # header + 8 ground rows
    first = lines[1].split(",")
    assert len(first) == 9          # label + 8 columns


def test_config_error_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema: 99\nscheme: {}\ndecay: {}\nfields: {}\n")
    code, _, err = run(capsys, "validate", "--scenario", str(bad))
    assert code == 1
    assert "error:" in err


def test_io_error_exits_two(capsys):
    code, _, err = run(capsys, "validate", "--scenario", "/no/such/file.yaml")
    assert code == 2
    assert "error:" in err


def test_invert_requires_three_points(tmp_path, capsys):
    path = tmp_path / "short.csv"
    path.write_text("10.0,0.5\n20.0,0.6\n")
    code, _, err = run(capsys, "invert", "--scan", str(path), "--e0", "1.0")
    assert code == 1
    assert "3 scan points" in err
