import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from hadamard_eig.cli import main


def _run(tmp_path, command, cfg, capsys=None):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = main([command, "--config", str(path), "--out", str(out)])
    return code, out


def _cfg(**kw):
    cfg = {"schema_version": 1, "mesh": {"kind": "rect", "nx": 8, "ny": 8},
           "deformation": {"kind": "analytic", "name": "dilation"}, "t": 0.0, "k_max": 4}
    cfg.update(kw)
    return cfg


def test_report_dilation(tmp_path, capsys):
    code, out = _run(tmp_path, "report", _cfg())
    assert code == 0
    assert capsys.readouterr().out.count("\n") == 1
    rep = json.loads((out / "report.json").read_text())
    lam = np.array(rep["eigenvalues"])
    nu = np.concatenate([c["nu"] for c in rep["clusters"]])
    sigma = np.concatenate([s["sigma"] for c in rep["clusters"] for s in c["subclusters"]])
    assert np.allclose(nu, -2 * lam, rtol=1e-9)
    assert np.allclose(sigma, 6 * lam, rtol=1e-9)


def test_report_identity(tmp_path):
    code, out = _run(tmp_path, "report", _cfg(deformation={"kind": "analytic", "name": "zero"}))
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    for c in rep["clusters"]:
        assert all(x == 0 for x in c["nu"])
        assert all(x == 0 for s in c["subclusters"] for x in s["sigma"])


def test_t_out_of_range(tmp_path, capsys):
    code, out = _run(tmp_path, "report", _cfg(t=5.0))
    assert code == 2
    err = capsys.readouterr()
    assert "'t'" in err.err and err.out == ""
    assert not out.exists()


@pytest.mark.parametrize("bad", [{"k_max": 0}, {"k_max": "4"}, {"schema_version": 9}, {"mesh": {"kind": "disk"}},
                                 {"tolerances": {"nonsense": 1}}, {"command": "sweep"},
                                 {"deformation": {"kind": "analytic", "name": "twist"}}])
def test_config_errors(tmp_path, bad):
    assert _run(tmp_path, "report", _cfg(**bad))[0] == 2


def test_unreadable_config(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    assert main(["report", "--config", str(tmp_path / "c.json")]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    # eigen residual tolerance below what any solve can reach
    cfg = _cfg(deformation={"kind": "analytic", "name": "stretch_x"}, t=-0.5,
               tolerances={"residual": 1e-30})
    code, _ = _run(tmp_path, "report", cfg)
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_sweep_stretch(tmp_path):
    cfg = _cfg(deformation={"kind": "analytic", "name": "stretch_x"}, k_max=3,
               t_grid={"start": -0.2, "stop": 0.2, "num": 41})
    code, out = _run(tmp_path, "sweep", cfg)
    assert code == 0
    events = json.loads((out / "swap_events.json").read_text())["swap_events"]
    assert len(events) == 1 and events[0]["node"] == 20 and events[0]["pairs"] == [[2, 3]]
    rows = list(csv.DictReader(io.StringIO((out / "rearranged.csv").read_text())))
    assert len(rows) == 41


def test_sweep_dilation_no_events(tmp_path):
    code, out = _run(tmp_path, "sweep", _cfg(t_grid=[-0.1, 0.0, 0.1]))
    assert code == 0
    assert json.loads((out / "swap_events.json").read_text())["swap_events"] == []


def test_sweep_needs_grid(tmp_path):
    assert _run(tmp_path, "sweep", _cfg())[0] == 2


def test_oracle_dilation_passes(tmp_path):
    code, out = _run(tmp_path, "oracle", _cfg())
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((out / "oracle.csv").read_text())))
    assert list(rows[0]) == ["index", "side", "order", "g_value", "fd_value", "abs_diff", "rel_diff", "pass"]
    assert len(rows) == 4 * 2 * 2
    assert all(r["pass"] == "1" for r in rows)


def test_oracle_huge_step_fails(tmp_path):
    cfg = _cfg(deformation={"kind": "analytic", "name": "stretch_x"}, tolerances={"fd_h0": 0.5})
    code, out = _run(tmp_path, "oracle", cfg)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO((out / "oracle.csv").read_text())))
    failed = [r for r in rows if r["pass"] == "0"]
    assert failed
    assert max(float(r["abs_diff"]) for r in failed) > 1e-3


def test_outputs_byte_identical(tmp_path):
    cfg = _cfg(deformation={"kind": "analytic", "name": "shear"}, t=0.1)
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir(), b.mkdir()
    _, oa = _run(a, "report", cfg)
    _, ob = _run(b, "report", cfg)
    assert (oa / "report.json").read_bytes() == (ob / "report.json").read_bytes()


def test_mesh_file_and_thread_env(tmp_path, monkeypatch):
    from hadamard_eig.mesh import generate_rect_mesh, save_mesh
    (tmp_path / "m.mesh").write_text(save_mesh(generate_rect_mesh(4, 4)))
    monkeypatch.setenv("HADAMARD_EIG_THREADS", "1")
    assert _run(tmp_path, "report", _cfg(mesh={"kind": "file", "path": "m.mesh"}))[0] == 0
    monkeypatch.setenv("HADAMARD_EIG_THREADS", "many")
    assert _run(tmp_path, "report", _cfg())[0] == 2


def test_console_entry_point(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(_cfg(k_max=1)))
    proc = subprocess.run([sys.executable, "-m", "hadamard_eig.cli", "report", "--config", str(path),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("report:")
