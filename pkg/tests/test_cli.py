import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from scipy.special import jv

from blowup_lab import cli
from blowup_lab.spectral.transform import radial_quadrature

from conftest import TAN_HALF, smooth_bump


def read_output(path):
    with open(path) as fh:
        text = fh.read()
    first, rest = text.split("\n", 1)
    assert first.startswith("# manifest: ")
    manifest = json.loads(first[len("# manifest: "):])
    rows = list(csv.reader(io.StringIO(rest)))
    try:
        body = np.array(rows[1:], dtype=float)
    except ValueError:
        body = rows[1:]          # text columns
    return manifest, rows[0], body


def run(argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def series_profile(tmp_path):
    from blowup_lab.surface import perturbed_sphere_coeffs
    p = tmp_path / "bumpy.txt"
    coeffs = ",".join("%.17g" % c for c in perturbed_sphere_coeffs(0.05))
    p.write_text(f"# perturbed sphere\nkind = series\ncoeffs = {coeffs}\nrho_m_hint = 3.0\n")
    return p


def test_harmonic_map_output(tmp_path):
    out = tmp_path / "q.csv"
    assert run(["harmonic-map", "--profile", "sphere", "--r-grid", "1e-2:1e2:11", "--out", out]) == 0
    m, header, data = read_output(out)
    assert header == ["r", "Q", "Qprime", "Qsecond"]
    assert m["command"] == "harmonic-map" and m["Q0_coeff"] == pytest.approx(2 * TAN_HALF)
    assert np.allclose(data[:, 1], 2 * np.arctan(data[:, 0] * TAN_HALF), atol=1e-10)
    assert json.loads((tmp_path / "q.csv.manifest.json").read_text()) == m


def test_output_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(["spectral", "measure", "--profile", "sphere", "--xi-grid", "1e-3:1e2:9",
                    "--out", p]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_free_measure_matches_closed_form(tmp_path):
    out = tmp_path / "rho.csv"
    assert run(["spectral", "measure", "--free", "--xi-grid", "0.1:100:64", "--out", out]) == 0
    m, header, data = read_output(out)
    assert header == ["xi", "re_a", "im_a", "rho"]
    assert np.max(np.abs(data[:, 3] / (data[:, 0] / 8) - 1)) <= 1e-6


def test_free_basis_is_bessel(tmp_path):
    out = tmp_path / "phi.csv"
    assert run(["spectral", "basis", "--free", "--xi", "4", "--r-grid", "0.1:10:50",
                "--scale", "linear", "--out", out]) == 0
    _, header, data = read_output(out)
    r = data[:, 0]
    assert header == ["r", "phi", "dphi"]
    assert np.allclose(data[:, 1], np.sqrt(r) * jv(1, 2 * r), atol=1e-9)


def test_surface_validate_exit_codes(tmp_path, series_profile):
    assert run(["surface", "validate", "--profile", "sphere", "--out", tmp_path / "v.csv"]) == 0
    assert run(["surface", "validate", "--profile", series_profile, "--samples", "200",
                "--out", tmp_path / "w.csv"]) == 0
    bad = tmp_path / "cosh.txt"
    bad.write_text("coeffs = 1, 0.16666666666666666, 0.008333333333333333, -1e-3\n")
    assert run(["surface", "validate", "--profile", bad, "--samples", "200",
                "--out", tmp_path / "x.csv"]) == 1
    _, header, rows = read_output(tmp_path / "x.csv")
    assert header == ["assumption", "status", "worst_rho", "worst_value"]
    assert any(row[1] == "fail" for row in rows)


def test_usage_errors(tmp_path, capsys):
    assert run(["harmonic-map", "--out", tmp_path / "q.csv"]) == 64
    assert run(["harmonic-map", "--profile", "sphere", "--bogus"]) == 64
    assert run(["spectral", "measure", "--free", "--xi-grid", "1:2"]) == 64
    assert run([]) == 64


def test_invalid_input(tmp_path):
    kind = tmp_path / "k.txt"
    kind.write_text("kind = torus\n")
    assert run(["surface", "validate", "--profile", kind]) == 1
    assert run(["surface", "validate", "--profile", tmp_path / "missing.txt"]) == 1


def test_transform_round(tmp_path):
    r, w = radial_quadrature(1.0, 3.0, 50.0)
    src = tmp_path / "f.csv"
    with open(src, "w") as fh:
        fh.write("r,f,weight\n")
        for a, b, c in zip(r, smooth_bump(r), w):
            fh.write("%.17g,%.17g,%.17g\n" % (a, b, c))
    out = tmp_path / "fhat.csv"
    assert run(["spectral", "transform", "--free", "--in", src, "--out", out]) == 0
    m, header, data = read_output(out)
    assert header == ["xi", "weight", "rho", "fhat"]
    assert m["plancherel_defect"] <= 1e-3
    norm = float(np.dot(w, smooth_bump(r) ** 2))
    assert np.sum(data[:, 1] * data[:, 2] * data[:, 3] ** 2) == pytest.approx(norm, rel=1e-3)


def test_transform_fault_on_coarse_grid(tmp_path):
    r, w = radial_quadrature(1.0, 3.0, 50.0)
    src = tmp_path / "f.csv"
    with open(src, "w") as fh:
        fh.write("r,f,weight\n")
        for a, b, c in zip(r, smooth_bump(r) * np.sin(20 * r), w):
            fh.write("%.17g,%.17g,%.17g\n" % (a, b, c))
    assert run(["spectral", "transform", "--free", "--in", src, "--xi-max", "4",
                "--out", tmp_path / "o.csv"]) == 2


def test_transference_kernel_layout(tmp_path):
    out = tmp_path / "k.csv"
    assert run(["transference", "kernel", "--profile", "sphere", "--grid", "0.1:10:6", "--out", out]) == 0
    m, header, data = read_output(out)
    assert header == ["xi", "eta", "F", "K0_or_nan", "diag_if_diagonal"]
    assert data.shape == (36, 5)
    F = data[:, 2].reshape(6, 6)
    assert np.max(np.abs(F - F.T)) <= 1e-8
    diag = data[:, 4].reshape(6, 6)
    assert np.isnan(diag[0, 0]) and np.isfinite(diag[2, 2]) and np.isnan(diag[2, 3])
    assert np.isnan(data[:, 3].reshape(6, 6)[2, 2])
    assert m["R_cut"] > 0


def test_profile_commands(tmp_path):
    out = tmp_path / "e.csv"
    assert run(["profile", "errors", "--profile", "sphere", "--nu", "1", "--t-grid", "1e-2:1e-1:3",
                "--out", out]) == 0
    _, header, data = read_output(out)
    assert header == ["t", "sup_e0", "sup_e1", "ratio"] and np.all(data[:, 3] < 1)
    out = tmp_path / "l.csv"
    assert run(["profile", "local-energy", "--profile", "sphere", "--nu", "1", "--t-grid",
                "1e-4:1e-2:3", "--out", out]) == 0
    _, header, data = read_output(out)
    assert header == ["t", "Eloc_u0", "E_Q"] and np.all(data[:, 1] > 2.0)


def test_evolve_command(tmp_path):
    out = tmp_path / "traj.csv"
    assert run(["evolve", "--profile", "sphere", "--nu", "1", "--t-start", "0.2", "--t-end", "0.1",
                "--out", out]) == 0
    m, header, data = read_output(out)
    assert header == ["t", "E_total", "Eloc_cone", "sup_u", "min_dt_used"]
    assert list(data[:, 0]) == [0.2, 0.1] and m["complete"] is True
    assert data[-1, 2] >= 0.5 * m["E_Q"]


def test_evolve_unresolved_grid_is_invalid(tmp_path):
    assert run(["evolve", "--profile", "sphere", "--n", "100", "--out", tmp_path / "t.csv"]) == 2


def test_thread_setting(tmp_path, monkeypatch):
    out = tmp_path / "q.csv"
    monkeypatch.setenv("BLOWUP_LAB_THREADS", "2")
    assert run(["harmonic-map", "--profile", "sphere", "--r-grid", "1:2:2", "--out", out]) == 0
    assert read_output(out)[0]["threads"] == 2
    assert run(["harmonic-map", "--profile", "sphere", "--r-grid", "1:2:2", "--threads", "3",
                "--out", out]) == 0
    assert read_output(out)[0]["threads"] == 3
    monkeypatch.setenv("BLOWUP_LAB_THREADS", "many")
    assert run(["harmonic-map", "--profile", "sphere", "--out", out]) == 64


def test_stdout_and_console_script():
    proc = subprocess.run([sys.executable, "-m", "blowup_lab.cli", "harmonic-map", "--profile",
                           "sphere", "--r-grid", "1:1:1"], capture_output=True, text=True)
    assert proc.returncode == 0
    lines = proc.stdout.splitlines()
    assert lines[0].startswith("# manifest: ") and lines[1] == "r,Q,Qprime,Qsecond"
    assert float(lines[2].split(",")[1]) == pytest.approx(1.0, abs=1e-14)
    proc = subprocess.run([sys.executable, "-m", "blowup_lab.cli", "evolve", "--nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 64
