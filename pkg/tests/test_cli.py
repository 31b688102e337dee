from __future__ import annotations

import json
import subprocess
import sys

import pytest

from kerrwell.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_spectrum_point_emits_json(capsys):
    code, out, _ = run(capsys, "spectrum", "--eps2", "4", "--dim", "40", "--n-keep", "4")
    assert code == 0
    data = json.loads(out)
    assert data["quasi_energies"][0] == pytest.approx(-16.0)
    assert data["transitions"][0] == 0.0


def test_dynamics_sweep_writes_csv_and_manifest(capsys, tmp_path):
    out = tmp_path / "d.csv"
    code, stdout, _ = run(capsys, "dynamics", "--eps2", "4", "--dim", "30", "--axis", "eps1", "0", "1", "3", "--out", str(out))
    assert code == 0 and "3 rows" in stdout
    assert out.read_text().splitlines()[0] == "eps1_over_K,eps2_over_K,phi_deg,kappa_over_K,n_th,dim,T_K,offset,fit_rmse,method"
    assert (tmp_path / "d.manifest.json").exists()


def test_phase_axis_is_in_degrees(capsys):
    code, out, _ = run(capsys, "ebk", "--eps1", "1", "--eps2", "5", "--axis", "phi", "0", "90", "2")
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert [float(r.split(",")[2]) for r in rows] == pytest.approx([0.0, 90.0])


def test_chemical_model_flags(capsys):
    code, out, _ = run(capsys, "steady", "--model", "chemical", "--k1", "0", "--k2", "6", "--dim", "30")
    assert code == 0
    assert json.loads(out)["ratio"] == pytest.approx(1.0, abs=1e-6)


def test_ebk_curve_and_intersections(capsys):
    code, out, _ = run(capsys, "ebk", "--n", "0", "--eps2-range", "2", "3", "0.5")
    assert code == 0 and out.startswith("n,well,eps1_over_K,eps2_over_K")
    code, out, _ = run(capsys, "intersections", "--n-max", "1", "--m-max", "3", "--eps2-range", "1", "4")
    assert code == 0 and out.startswith("n,m,resonance")


def test_sweep_config(capsys, tmp_path):
    cfg = {
        "model": {"family": "kpo", "eps2": 4.0},
        "axes": [{"name": "eps1", "start": 0.0, "stop": 1.0, "count": 2}],
        "task": "spectrum",
        "solver": {"dim": 30, "n_keep": 3},
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    code, _, _ = run(capsys, "sweep", "--config", str(path), "--out", str(tmp_path / "s.csv"))
    assert code == 0
    assert (tmp_path / "s.csv").read_text().splitlines()[0].endswith("dE_1,dE_2")


@pytest.mark.parametrize(
    "argv",
    [
        ["spectrum", "--axis", "k1", "0", "1", "3"],
        ["spectrum", "--axis", "eps1", "0", "1", "2.5"],
        ["dynamics", "--kappa", "-1"],
        ["ebk", "--model", "chemical"],
        ["gaps", "--pairs", "4,5,6", "--axis", "eps1", "0", "1", "2"],
        ["optimal-asymmetry", "--search", "2", "1"],
        ["dynamics", "--axis", "eps1", "0", "1", "2", "--out", "/nonexistent/dir/x.csv"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error:")


def test_bad_config_exits_2(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"family": "kpo"}, "axes": [], "task": "spectrum", "typo": 1}))
    code, _, _ = run(capsys, "sweep", "--config", str(path))
    assert code == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["reproduce", "fig99"])
    assert info.value.code == 2


def test_numerical_failure_exits_3(capsys):
    code, _, err = run(capsys, "ebk", "--eps1", "20", "--eps2", "7.7")
    assert code == 3 and "bistability" in err


def test_workers_flag_overrides_environment(capsys, monkeypatch):
    monkeypatch.setenv("KERRWELL_WORKERS", "not-a-number")
    assert run(capsys, "spectrum", "--dim", "20", "--axis", "eps1", "0", "1", "2")[0] == 2
    assert run(capsys, "spectrum", "--dim", "20", "--workers", "1", "--axis", "eps1", "0", "1", "2")[0] == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kerrwell.cli", "spectrum", "--eps2", "2", "--dim", "20", "--n-keep", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "quasi_energies" in proc.stdout
