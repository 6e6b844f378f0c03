import json
import math
import subprocess
import sys

import numpy as np
import pytest

from quatrmt import acceptance, cli
from quatrmt.acceptance import CriterionResult
from quatrmt.errors import PoleError


def run(*args):
    return cli.main([str(a) for a in args])


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    return header, np.genfromtxt(body, delimiter=",", names=True, dtype=None, encoding=None)


def stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


class TestDensity:
    def test_ginibre(self, tmp_path):
        out = tmp_path / "g.csv"
        assert run("density", "--bbox", "-2,2,-2,2", "--grid", "41,41", "--workers", 1, "--out", out) == 0
        header, rows = read_csv(out)
        assert any(l.startswith("# config:") for l in header) and any(l.startswith("# version:") for l in header)
        inside = rows["branch"] == "NonHolomorphic"
        assert np.allclose(rows["rho"][inside], 0.15915494, atol=1e-7)
        assert np.all(rows["rho"][~inside] == 0)
        summary = json.loads(out.with_suffix(".summary.json").read_text())
        assert abs(summary["mass_cut_cells"] - 1) < 0.01
        assert summary["borderline_curves"] == 1 and summary["rho_min"] >= -1e-6
        assert summary["config"]["bbox"] == [-2.0, 2.0, -2.0, 2.0] and summary["config"]["nx"] == 41

    def test_lf_and_no_locale(self, tmp_path):
        out = tmp_path / "g.csv"
        run("density", "--bbox=-1,1,-1,1", "--grid", "9,9", "--workers", 1, "--out", out)
        raw = out.read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")
        assert raw.splitlines()[2] == b"x,y,re_g,im_g,c,rho,branch,m"

    def test_idempotent(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"ensemble_h": {"kind": "two_atoms", "mu": 0.5}, "bbox": [-2, 2, -2, 2],
                                   "nx": 17, "ny": 15, "workers": 1, "out": "ignored"}))
        run("density", "--config", cfg, "--out", a)
        run("density", "--config", cfg, "--out", a)
        first = a.read_bytes()
        run("density", "--config", cfg, "--out", b)
        assert first == a.read_bytes()
        # only the echoed output path differs
        assert first.replace(b"a.csv", b"b.csv") == b.read_bytes()


class TestBorderline:
    def test_pastur(self, tmp_path):
        cfg = tmp_path / "p.json"
        cfg.write_text(json.dumps({"ensemble_h": {"kind": "two_atoms", "mu": 0.5}, "nx": 81, "ny": 81,
                                   "bbox": [-2.5, 2.5, -2.5, 2.5]}))
        out = tmp_path / "b.json"
        assert run("borderline", "--config", cfg, "--workers", 1, "--out", out) == 0
        data = json.loads(out.read_text())
        (curve,) = data["curves"]
        assert curve["closed"]
        p = np.array(curve["points"])
        near_axis = p[np.abs(p[:, 0]) < 1e-9]
        assert np.allclose(sorted(near_axis[:, 1]), [-math.sqrt(3), math.sqrt(3)], atol=1e-6)
        assert data["config"]["ensemble_h"] == {"kind": "two_atoms", "mu": 0.5}
        assert "version" in data


class TestHolo:
    def test_contour(self, tmp_path):
        cfg = tmp_path / "h.json"
        cfg.write_text(json.dumps({"contour": [[2, 0], [0, 3], [-1.5, -1.5]]}))
        out = tmp_path / "h.csv"
        assert run("holo", "--config", cfg, "--out", out) == 0
        _, rows = read_csv(out)
        z = rows["x"] + 1j * rows["y"]
        assert np.allclose(rows["re_g"] + 1j * rows["im_g"], 1 / z, atol=1e-12)

    def test_grid(self, tmp_path):
        out = tmp_path / "h.csv"
        assert run("holo", "--bbox", "-2,2,-2,2", "--grid", "21,21", "--workers", 1, "--out", out) == 0
        _, rows = read_csv(out)
        holo = rows["branch"] == "Holomorphic"
        z = rows["x"][holo] + 1j * rows["y"][holo]
        assert np.allclose(rows["re_g"][holo] + 1j * rows["im_g"][holo], 1 / z, atol=1e-10)
        assert np.all(np.isnan(rows["re_g"][~holo]))


class TestMcVerify:
    def test_small_run_is_reproducible(self, tmp_path):
        args = ["mc-verify", "--grid", "41,41", "--n", 32, "--samples", 2, "--seed", 3, "--workers", 1]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(*args, "--out", a) == 0
        assert run(*args, "--out", b) == 0
        da, db = json.loads(a.read_text()), json.loads(b.read_text())
        da["config"].pop("out"), db["config"].pop("out")
        assert da == db
        rep = da["report"]
        assert rep["config"]["n"] == 32 and rep["config"]["seed"] == 3
        assert rep["l1_density"] >= 0 and rep["im_sign"]["zero"] == 0
        assert da["config"]["bbox"] == [-3.0, 3.0, -3.0, 3.0]


class TestSelftest:
    def test_single_criterion(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        assert run("selftest", "--only", "6", "--workers", 1, "--out", out) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("[PASS]  6 ")
        assert any("Wishart sampler calibration" in l for l in lines)
        data = json.loads(out.read_text())
        assert data["passed"] and [c["number"] for c in data["criteria"]] == [6]
        assert "seconds" not in data["criteria"][0]

    def test_failure_exit_code(self, monkeypatch, tmp_path):
        monkeypatch.setitem(acceptance.CRITERIA, 6, lambda workers=1: CriterionResult(6, "forced", False))
        assert run("selftest", "--only", "6", "--out", tmp_path / "s.json") == 3


class TestErrors:
    @pytest.mark.parametrize(
        "args",
        [
            ["nonsense"],
            ["density", "--bbox", "1,-1,0,1"],
            ["density", "--bbox", "1,2"],
            ["density", "--grid", "4,4"],
            ["density", "--seed", "-1"],
            ["density", "--workers", "0"],
            ["density", "--tol", "0"],
            ["selftest", "--only", "11"],
            ["density", "--config", "/nonexistent/cfg.json"],
        ],
    )
    def test_config_errors(self, args, capsys):
        assert run(*args) == 1
        err = stderr_json(capsys)
        assert err["exit_code"] == 1 and err["error"] and err["message"]

    def test_unknown_field(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"grid_size": 10}))
        assert run("density", "--config", cfg) == 1
        assert "grid_size" in stderr_json(capsys)["message"]

    def test_bad_ensemble(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"ensemble_hp": {"kind": "semicircle", "r": -1}}))
        assert run("density", "--config", cfg) == 1

    def test_numerical_failure(self, monkeypatch, tmp_path, capsys):
        def boom(*a, **k):
            raise PoleError("forced pole")

        monkeypatch.setattr(cli, "solve_grid", boom)
        assert run("density", "--out", tmp_path / "x.csv") == 2
        err = stderr_json(capsys)
        assert err == {"error": "PoleError", "exit_code": 2, "message": "forced pole"}

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"nx": 50, "seed": 4}))
        loaded = cli.load_config(["density", "--config", str(cfg), "--grid", "20,30", "--seed", "9"])
        assert (loaded.nx, loaded.ny, loaded.seed) == (20, 30, 9)
        assert loaded.nx == 20 and cli.load_config(["density", "--config", str(cfg)]).nx == 50


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "quatrmt", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("quatrmt ")
