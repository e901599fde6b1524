import csv
import io
import os

import numpy as np
import pytest

from qthreshold import cli
from qthreshold.config import RunConfig
from qthreshold.experiments import TABLE1


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _table(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_reflect_is_unitary(capsys):
    code, out, _ = _run(capsys, "reflect", "--k-min", "1e-4", "--k-max", "1e-2", "--n", "100")
    assert code == 0
    t = _table(out)
    assert t["k"].size == 100
    assert np.all(np.abs(np.hypot(t["Re_R"], t["Im_R"]) - 1.0) <= 1e-8)


def test_reflect_unitarity_full_precision(capsys, tmp_path):
    from qthreshold import morse

    code, _, _ = _run(capsys, "reflect", "--k-min", "1e-4", "--k-max", "1e-2", "--n", "100",
                      "-o", str(tmp_path / "r.csv"))
    assert code == 0
    k = _table((tmp_path / "r.csv").read_text())["k"]
    assert np.max(np.abs(np.abs(morse.reflection_amplitude(morse.MorseParams(), k)) - 1)) <= 1e-12


def test_square_barrier_flux(capsys):
    code, out, _ = _run(capsys, "senn", "--potential", "square_barrier", "--V0", "1",
                        "--a", "1", "--k", "0.5")
    assert code == 0
    t = _table(out)
    assert abs(t["R2_plus_T2"][0] - 1.0) <= 1e-10
    assert abs(t["R2"][0] + t["T2"][0] - 1.0) <= 1e-8


def test_badlands_peaks(capsys):
    code, out, _ = _run(capsys, "badlands", "--energy", "5e-5", "--energy", "5e-9")
    assert code == 0
    t = _table(out)
    assert t["z_BF"] == pytest.approx([11.5, 20.7], abs=0.3)


def test_flight_times_row1(capsys, tmp_path):
    path = tmp_path / "ft.csv"
    code, _, _ = _run(capsys, "flight-times", "--row", "1", "--n-traj", "1000000",
                      "--seed", "7", "-o", str(path))
    assert code == 0
    t = _table(path.read_text())
    row = TABLE1[0]
    assert t["t_QM"][0] == pytest.approx(row.t_qm, rel=5e-3)
    assert t["t_W"][0] == pytest.approx(row.t_w, rel=max(5e-3, 5 * t["t_W_stderr"][0] / row.t_w))
    assert t["t_free"][0] < t["t_W"][0] < t["t_QM"][0]
    cfg = RunConfig.read(str(path) + ".config.ini")
    assert cfg.seed == 7 and cfg.n_traj == 1_000_000


def test_bad_arguments_exit_1(capsys):
    code, _, err = _run(capsys, "reflect", "--n", "0")
    assert code == 1 and "error" in err
    code, _, err = _run(capsys, "reflect", "--k-min", "abc")
    assert code == 1
    code, _, err = _run(capsys, "nonsense")
    assert code == 1


def test_unknown_set_key(capsys):
    code, _, err = _run(capsys, "propagate", "--set", "bogus=1")
    assert code == 1 and "bogus" in err


def test_unknown_preset(capsys):
    code, _, err = _run(capsys, "reproduce", "--preset", "Fig9")
    assert code == 1 and "Fig9" in err


def test_numerical_failure_exit_2(capsys, tmp_path):
    code, _, err = _run(capsys, "propagate", "--set", "z_i=5", "--set", "nz=20", "--set", "nt=20",
                        "-o", str(tmp_path / "p"))
    assert code == 2 and "numerical" in err


def test_unwritable_output_exit_1(capsys, tmp_path):
    code, _, _ = _run(capsys, "reflect", "-o", str(tmp_path / "missing" / "dir" / "r.csv"))
    assert code == 1


def test_config_file_round_trip(capsys, tmp_path):
    base = RunConfig(nz=40, nt=30, n_traj=20_000, n_k=20_000, spot_check=False, seed=3)
    ini = tmp_path / "run.ini"
    base.write(ini)
    code, _, err = _run(capsys, "wigner", "--config", str(ini), "-o", str(tmp_path / "w"))
    assert code == 0, err
    written = [os.path.join(dp, f) for dp, _, fs in os.walk(tmp_path / "w") for f in fs
               if f.endswith(".ini")]
    assert written
    assert RunConfig.read(written[0]) == base
