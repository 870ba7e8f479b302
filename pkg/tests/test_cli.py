import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from bma_identify import cli, ex4_exposure, kernels, report


def _run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_ex1_table_csv(tmp_path):
    assert _run(tmp_path, "ex1", "table", "--draws", "4000") == 0
    rows = _rows(tmp_path / "ex1_table.csv")
    assert tuple(rows[0]) == report.TABLE_HEADER
    cells = {(r[0], r[1]): r for r in rows[1:5]}
    assert round(float(cells["pi0", "pi0"][2]), 4) == 0.1581
    assert float(cells["mix", "pi0"][2]) == pytest.approx(0.162447, abs=1e-6)
    assert sum(float(r[3]) == 0.0 for r in rows[1:5]) == 2
    assert sum(float(r[3]) > 0.0 for r in rows[1:5]) == 2
    names = [r[0] for r in rows[5:]]
    assert names[:2] == ["pct_unwarranted", "pct_warranted"]
    manifest = json.loads((tmp_path / "ex1_table_manifest.json").read_text())
    assert manifest["files"]["ex1_table.csv"] == report.sha256(tmp_path / "ex1_table.csv")
    assert manifest["runs"][0]["config"]["draws_per_prior"] == 4000


def test_ex1_figure_outputs(tmp_path, capsys):
    assert _run(tmp_path, "ex1", "figure", "--draws", "2000") == 0
    summary = json.loads((tmp_path / "ex1_figure1_summary.json").read_text())
    assert f"{summary['bayes_factor']:.2f}" == "3.73"
    assert "(0.211, 0.789)" in capsys.readouterr().out
    dens = _rows(tmp_path / "ex1_figure1_density.csv")
    assert dens[0] == ["psi_grid", "density_nim", "density_mar", "density_bma"]
    assert len(_rows(tmp_path / "ex1_figure1_samples.csv")) == 1 + 2 * 2000


def test_ex2_table_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, "ex2", "table") == 0
    assert _run(b, "ex2", "table", "--seed", "7") == 0
    assert (a / "ex2_table.csv").read_bytes() == (b / "ex2_table.csv").read_bytes()
    rows = _rows(a / "ex2_table.csv")
    assert all(float(r[3]) == 0.0 for r in rows[1:5])
    assert [round(float(r[2]), 4) for r in rows[1:5]] == [0.0464, 0.0473, 0.0288, 0.0278]


def test_json_format_round_trips_digits(tmp_path):
    assert _run(tmp_path, "ex2", "table", "--format", "json") == 0
    d = json.loads((tmp_path / "ex2_table.json").read_text())
    from bma_identify import ex2_stratified

    t = ex2_stratified.amse_table()
    got = {(c["nature"], c["investigator"]): c["ramse"] for c in d["cells"]}
    for key, cell in t.cells.items():
        assert got[key] == cell.value
    assert d["pct_warranted"] == t.pct_warranted


def test_ex4_calibrate(tmp_path):
    assert _run(tmp_path, "ex4", "calibrate", "--draws", "3000") == 0
    d = json.loads((tmp_path / "ex4_calibration.json").read_text())
    for key in ("prob_H", "expected_max_bt", "prob_H_se", "expected_max_bt_se", "draws", "seed", "b", "version"):
        assert key in d
    assert d["draws"] == 3000 and d["b"] == 0.5
    c = ex4_exposure.Calibration.from_dict(d)
    assert 0 < c.prob_H < 1


def test_ex4_reuses_calibration_file(tmp_path):
    assert _run(tmp_path, "ex4", "calibrate", "--draws", "2000") == 0
    cal = tmp_path / "ex4_calibration.json"
    out = tmp_path / "fig"
    assert _run(out, "ex4", "figure", "--draws", "20", "--calibration", str(cal)) == 0
    rows = _rows(out / "ex4_figure3_triplets.csv")
    assert rows[0] == ["source_model", "w0", "w1", "w2"] and len(rows) == 61
    for r in rows[1:]:
        assert sum(float(v) for v in r[1:]) == pytest.approx(1.0, abs=1e-12)
    assert not (out / "ex4_calibration.json").exists()
    # calibration at another b is refused
    assert _run(out, "ex4", "figure", "--draws", "20", "--calibration", str(cal), "--b", "0.6") == 2


def test_ex3_ensembles(tmp_path):
    assert _run(tmp_path, "ex3", "ensembles", "--draws", "500") == 0
    rows = _rows(tmp_path / "ex3_figure2_w1star.csv")
    w = np.array([float(r[1]) for r in rows[1:]])
    from bma_identify import ex3_outcome

    assert w.size == 1000 and w.min() >= ex3_outcome.min_wstar1(ex3_outcome.Ex3Hyper()) - 1e-12
    hist = _rows(tmp_path / "ex3_figure2_hist.csv")
    assert sum(int(float(r[3])) for r in hist[1:]) == 1000


@pytest.mark.parametrize("argv", [
    ("ex1", "table", "--set", "a0=0.9"),
    ("ex3", "table", "--b", "0.5"),
    ("ex3", "table", "--a0", "0.4"),
    ("ex1", "validate"),
    ("ex2", "table", "--weights", "0.5,0.6,0.1"),
    ("ex2", "table", "--set", "k"),
    ("ex1", "table", "--draws", "0"),
    ("all", "table", "--draws", "10"),
])
def test_config_errors_exit_2(tmp_path, argv, capsys):
    assert _run(tmp_path, *argv) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_key_lists_valid_keys(tmp_path, capsys):
    assert _run(tmp_path, "ex3", "table", "--set", "zeta=1") == 2
    assert "a0, a1, w" in capsys.readouterr().err


def test_bad_artifact_choice_exits_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        _run(tmp_path, "ex1", "movie")
    assert err.value.code == 2


def test_numeric_error_exits_3(tmp_path, monkeypatch, capsys):
    def multi(phi, lo, npts, tol, ztol=kernels.ZERO_TOL):
        n = len(np.atleast_2d(phi))
        return np.full(n, kernels.MULTI_ROOT, np.int8), np.full(n, np.nan)

    monkeypatch.setattr(ex4_exposure.kernels, "ex4_scan", multi)
    assert _run(tmp_path, "ex4", "calibrate", "--draws", "100") == 3
    assert "numerical error" in capsys.readouterr().err


SEEDED = [
    ("ex1", "table", "--draws", "3000"),
    ("ex2", "validate", "--draws", "3000"),
    ("ex3", "table", "--draws", "3000"),
    ("ex4", "table", "--draws", "60", "--calib-draws", "3000"),
]


@pytest.mark.parametrize("argv", SEEDED, ids=[a[0] for a in SEEDED])
def test_outputs_identical_across_thread_counts(tmp_path, argv):
    digests = []
    for n in (1, 8):
        out = tmp_path / f"t{n}"
        assert _run(out, *argv, "--threads", str(n)) == 0
        m = json.loads(next(out.glob("*_manifest.json")).read_text())
        assert m["files"]
        digests.append(m["files"])
    assert digests[0] == digests[1]


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "bma_identify", "ex2", "table", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert (tmp_path / "ex2_table.csv").exists()
    ver = subprocess.run([sys.executable, "-m", "bma_identify", "--version"], capture_output=True, text=True)
    assert ver.returncode == 0 and "0.1.0" in ver.stdout
