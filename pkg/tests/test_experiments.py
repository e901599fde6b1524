import math
import os

import numpy as np
import pytest

from qthreshold import experiments as ex
from qthreshold.config import RunConfig
from qthreshold.density import SpaceTimeDensity
from qthreshold.errors import ValidationError

QUICK = {"nz": 200, "nt": 200, "n_traj": 100_000, "n_k": 20_000, "spot_check": False}


def test_presets_cover_table_rows():
    assert {p.value for p in ex.PresetId} == {"Fig1", "Fig2", "Fig3", "Fig4", "Fig5", "Table1"}
    assert ex.get_preset("Fig5").base_config().p_i == pytest.approx(1e-4)
    assert ex.get_preset("Fig3").base_config().z_i == 100.0
    with pytest.raises(ValidationError):
        ex.get_preset("Fig9")


def test_table_rows_are_consistent():
    for row in ex.TABLE1:
        assert row.E_i == pytest.approx(0.5 * row.p_i**2, rel=1e-12)
        assert row.t_free < row.t_w < row.t_qm


@pytest.mark.parametrize("criterion,ref,val,tol,ok", [
    ("abs", 1.0, 1.05, 0.1, True),
    ("abs", 1.0, 1.2, 0.1, False),
    ("rel", 100.0, 100.4, 5e-3, True),
    ("rel", 100.0, 99.4, 5e-3, False),
    ("<", 1e-6, 1e-7, 0.0, True),
    (">", 1e-6, 1e-7, 0.0, False),
    ("factor", 1.0, 0.6, 2.0, True),
    ("factor", 1.0, 2.1, 2.0, False),
    ("abs", 0.0, math.nan, 1.0, False),
])
def test_quantity_verdicts(criterion, ref, val, tol, ok):
    assert ex.Quantity("x", ref, val, tol, criterion).passed is ok


def test_contrast_and_first_maximum():
    z = np.linspace(0.0, 20.0, 2001)
    prof = np.sin(z) ** 2 * np.exp(-0.01 * z)
    n, c = ex.local_extrema_contrast(prof)
    assert n == 6 and c > 0.99
    # damping moves the peak to tan z = 200
    assert ex.first_maximum(z, prof) == pytest.approx(math.atan(200.0), abs=1e-5)
    assert math.isnan(ex.first_maximum(z, z))


def test_fig1_outputs(out_root):
    res = ex.run("Fig1")
    assert res.passed
    assert res.directory == os.path.join(str(out_root), "Fig1")
    data = np.loadtxt(os.path.join(res.directory, "reflection.csv"), delimiter=",", skiprows=1)
    assert np.allclose(np.hypot(data[:, 1], data[:, 2]), 1.0, atol=1e-8)
    summ = ex.read_summary(os.path.join(res.directory, "summary.txt"))
    assert summ["run"]["status"] == "OK"
    assert summ["quantity.threshold_slope"]["pass"] == "true"
    assert float(summ["quantity.threshold_slope"]["achieved"]) == pytest.approx(-17.6264, rel=1e-5)


def test_fig2_peaks(out_root):
    res = ex.run("Fig2", {"nz": 500})
    assert res.passed
    peaks = np.loadtxt(os.path.join(res.directory, "badlands_peaks.csv"), delimiter=",",
                       skiprows=1)
    assert np.all(np.diff(peaks[:, 1]) > 0)
    curves = np.loadtxt(os.path.join(res.directory, "badlands.csv"), delimiter=",", skiprows=1)
    assert curves.shape == (500, 6)


def test_rerun_from_written_config(out_root, tmp_path):
    first = ex.run("Fig2", {"nz": 300, "seed": 4}, out_root=str(tmp_path / "a"))
    cfg = RunConfig.read(os.path.join(first.directory, "config.ini"))
    assert cfg == first.config
    second = ex.run("Fig2", cfg, out_root=str(tmp_path / "b"))
    for name in ("badlands.csv", "badlands_peaks.csv", "config.ini"):
        with open(os.path.join(first.directory, name), "rb") as a, \
                open(os.path.join(second.directory, name), "rb") as b:
            assert a.read() == b.read()

    def strip(path):
        return [l for l in open(path) if not l.startswith("wall_clock_s")]

    assert strip(os.path.join(first.directory, "summary.txt")) == \
        strip(os.path.join(second.directory, "summary.txt"))


def test_failed_run_leaves_marker(out_root):
    # a packet starting inside the interaction region is rejected by the quantum solver
    with pytest.raises(Exception):
        ex.run("Fig3", {**QUICK, "z_i": 5.0})
    summ = ex.read_summary(os.path.join(str(out_root), "Fig3", "summary.txt"))
    assert summ["run"]["status"] == "FAILED"
    assert "error" in summ["run"]


def test_fig3_reduced(out_root):
    res = ex.run("Fig3", QUICK)
    names = {os.path.basename(f) for f in res.files}
    assert {"density.qtrd", "wigner.qtrd", "density_zoom.qtrd", "wigner_zoom.qtrd",
            "bounce_slice.csv"} <= names
    assert all(q.passed for q in res.quantities)
    d = SpaceTimeDensity.read_binary(os.path.join(res.directory, "density.qtrd"))
    assert d.values.shape == (200, 200)
    assert 80.0 < res.info["t_bounce"] < 120.0
    assert res.info["quantum_maxima"] >= 5


def test_table1_single_row(out_root):
    res = ex.run("Table1", {"n_traj": 200_000, "seed": 2}, rows=(1,))
    by_name = {q.name: q for q in res.quantities}
    for key in ("z_TP.row1", "t_free.row1", "t_QM.row1", "t_W.row1",
                "ordering_free_W.row1", "ordering_W_QM.row1"):
        assert by_name[key].passed, key
    reports = ex.read_flight_times(os.path.join(res.directory, "table1.csv"))
    assert len(reports) == 1 and reports[0].p_i == pytest.approx(1.0)


def test_flight_time_csv_append(tmp_path):
    rep = ex.FlightTimeReport(0.5, 1.0, 100.0, 1e-2, -0.6, 200.0, 302.7, 302.6, 0.01)
    path = tmp_path / "ft.csv"
    ex.write_flight_times(path, [rep])
    ex.write_flight_times(path, [rep], append=True)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(ex.FlightTimeReport.COLUMNS)
    assert len(lines) == 3
    back = ex.read_flight_times(path)
    assert back[1].t_qm == pytest.approx(302.7) and back[1].p_i == 1.0
