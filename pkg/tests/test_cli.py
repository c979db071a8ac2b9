import json
import subprocess
import sys

import numpy as np
import pytest

from qlbe import io
from qlbe.cli import DEFAULTS, main, resolve_config
from qlbe.errors import ConfigurationError

FP_SMOKE = ["-D", "fp.nx=32", "-D", "fp.np=96", "-D", "fp.p_half_width=6", "-D", "fp.snapshots=2",
            "-D", "fp.t_final=1"]
GRID_SMALL = ["-D", "phys.M=2", "-D", "qlbe.N=7", "-D", "qlbe.strict=false"]


def _summary(path):
    return json.loads((path / "summary.json").read_text())


def test_coefficients_unit(tmp_path, capsys):
    assert main(["coefficients", "--out", str(tmp_path)]) == 0
    s = _summary(tmp_path)
    assert s["results"]["eta"] == pytest.approx(0.02127692, rel=1e-6)
    assert s["results"]["minimality_ratio"] == pytest.approx(1.0, rel=1e-12)
    assert s["results"]["diffusive_valid"] is True
    assert "eta = " in capsys.readouterr().out
    assert (tmp_path / "config.txt").exists()


def test_coefficients_no_gas_and_heavy_gas(tmp_path):
    assert main(["coefficients", "--out", str(tmp_path / "a"), "-D", "phys.n_gas=0"]) == 0
    s = _summary(tmp_path / "a")
    assert s["results"]["eta"] == 0 and s["results"]["D_pp"] == 0 and s["results"]["D_xx"] == 0
    assert any("n_gas" in w for w in s["warnings"])
    assert main(["coefficients", "--out", str(tmp_path / "b"), "-D", "phys.M=2"]) == 0
    s = _summary(tmp_path / "b")
    assert s["results"]["diffusive_valid"] is False
    assert any("DiffusiveLimitWarning" in w for w in s["warnings"])


def test_relax_smoke_and_reproducible(tmp_path):
    args = ["relax", "-D", "mc.n_traj=100", "-D", "mc.n_times=8", "--workers", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    names = ("relax_mc.csv", "relax_closure.csv", "relax_diffusive.csv")
    tables = [io.read_csv(tmp_path / "a" / n)[1] for n in names]
    for t in tables[1:]:
        assert np.array_equal(t[:, 0], tables[0][:, 0])
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    # the echoed config reproduces the run
    assert main(["relax", "--config", str(tmp_path / "a" / "config.txt"), "--out", str(tmp_path / "c")]) == 0
    for n in names:
        a = (tmp_path / "a" / n).read_bytes()
        assert a == (tmp_path / "b" / n).read_bytes() == (tmp_path / "c" / n).read_bytes()
    assert main(args[:-1] + ["2", "--out", str(tmp_path / "d")]) == 0
    assert (tmp_path / "a" / names[0]).read_bytes() == (tmp_path / "d" / names[0]).read_bytes()


def test_fp_smoke_matches_oracle(tmp_path):
    assert main(["fp", "--out", str(tmp_path)] + FP_SMOKE) == 0
    s = _summary(tmp_path)
    for mode in ("quantum", "classical"):
        assert s["results"][mode]["max_scaled_moment_error"] < 1e-3
        assert s["results"][mode]["mass_error"] < 1e-8
        names, tab = io.read_csv(tmp_path / f"fp_{mode}_moments.csv")
        assert np.allclose(tab[:, 1:6], tab[:, 7:12], rtol=1e-3, atol=1e-3 * np.sqrt(np.abs(tab[:, 7:12]).max()))
    W = io.read_field_binary(tmp_path / "field_quantum_002.bin")
    assert W.values.shape == (32, 96)


def test_fp_without_position_terms_equals_classical(tmp_path):
    args = ["fp", "--out", str(tmp_path)] + FP_SMOKE + ["-D", "fp.free_streaming=false", "-D", "phys.hbar=1e-30"]
    assert main(args) == 0
    a = io.read_field_binary(tmp_path / "field_quantum_002.bin")
    b = io.read_field_binary(tmp_path / "field_classical_002.bin")
    assert np.max(np.abs(a.values - b.values)) <= 1e-10


def test_fp_resolution_error_exit_code(tmp_path, capsys):
    assert main(["fp", "--out", str(tmp_path), "-D", "fp.np=32"]) == 2
    assert "coarse" in capsys.readouterr().err


def test_qlbe_ladder_and_thermalize(tmp_path):
    assert main(["qlbe", "--out", str(tmp_path / "l"), "-D", "qlbe.mode=ladder",
                 "-D", "qlbe.K_ladder=[0, 0.5, 1, 2]"] + GRID_SMALL) == 0
    s = _summary(tmp_path / "l")
    assert abs(s["results"]["rates"][0]) < 1e-8
    assert s["results"]["monotone"] is True
    assert main(["qlbe", "--out", str(tmp_path / "t"), "-D", "qlbe.t_final=1", "-D", "qlbe.snapshots=2"]
                + GRID_SMALL) == 0
    s = _summary(tmp_path / "t")
    assert s["results"]["max_trace_change"] <= 1e-8
    sl = io.read_slice_binary(tmp_path / "t" / "slice_002.bin")
    assert sl.grid.N == 7


def test_qlbe_strict_grid_error(tmp_path):
    assert main(["qlbe", "--out", str(tmp_path), "-D", "phys.M=2", "-D", "qlbe.N=7"]) == 2


def test_rates_command(tmp_path):
    assert main(["rates", "--out", str(tmp_path), "-D", "phys.M=10", "-D", "rates.n_points=5"]) == 0
    assert _summary(tmp_path)["results"]["max_rel_out_difference"] < 1e-6


def test_config_errors(tmp_path, capsys):
    assert main(["coefficients", "--out", str(tmp_path), "-D", "phys.mass=1"]) == 2
    assert "unknown config key" in capsys.readouterr().err
    cfg = tmp_path / "bad.txt"
    cfg.write_text("phys.m = 1\nthis line is wrong\n")
    assert main(["coefficients", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert f"{cfg}:2" in capsys.readouterr().err
    assert main(["coefficients", "--config", str(tmp_path / "missing.txt"), "--out", str(tmp_path)]) == 2
    assert main(["coefficients", "--out", str(tmp_path), "-D", "phys.m=-1"]) == 2
    assert main(["coefficients", "--out", str(tmp_path), "--set", "novalue"]) == 2


def test_numeric_failure_exit_code(tmp_path, capsys):
    # initial momentum near the edge of the momentum box
    assert main(["fp", "--out", str(tmp_path), "-D", "fp.p0=7.5", "-D", "fp.mode=classical"]) == 3
    assert "momentum boundary" in capsys.readouterr().err


def test_resolve_config_types():
    cfg = resolve_config({"mc.n_traj": 10.0}, {"fp.mode": "quantum"})
    assert cfg["mc.n_traj"] == 10 and isinstance(cfg["mc.n_traj"], int)
    assert set(cfg) == set(DEFAULTS)
    for bad in ({"mc.n_traj": 1.5}, {"fp.mode": "both-ish"}, {"mc.U0": [1, 2]}, {"qlbe.strict": "yes"}):
        with pytest.raises(ConfigurationError):
            resolve_config(bad, {})


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "qlbe", "coefficients", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "minimality_ratio = 1.0" in out.stdout

