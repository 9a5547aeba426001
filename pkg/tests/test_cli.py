from __future__ import annotations

import json
import math

import pytest

from jscatter import io
from jscatter.cli import RunConfig, main
from jscatter.errors import ConfigError

from conftest import get_spec

FAST = ["--quad-nodes", "64", "--grid", "64", "--glm-window", "20", "--report-range=-5,5"]


def write_spec(tmp_path, name):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(get_spec(name).to_json()))
    return path


def run(tmp_path, command, spec, out, *extra):
    return main([command, "--spec", str(spec), "--out", str(tmp_path / out), *FAST, *extra])


def summary(tmp_path, out):
    s = json.loads((tmp_path / out / "summary.json").read_text())
    return s, {c["name"]: c for c in s["checks"]}


def test_roundtrip_bump(tmp_path, capsys):
    spec = write_spec(tmp_path, "bump")
    assert run(tmp_path, "roundtrip", spec, "rt") == 0
    s, checks = summary(tmp_path, "rt")
    assert s["exit"] == 0 and s["command"] == "roundtrip"
    assert checks["roundtrip_error"]["value"] < 1e-6
    data = io.read_json(tmp_path / "rt" / "scattering.json")
    (lam,) = data["eigenvalues"]
    assert abs(float(lam) - math.sqrt(2)) < 1e-12
    for f in ("kernels.csv", "reconstruction.csv", "band_plus_0.csv", "band_minus_0.csv"):
        assert (tmp_path / "rt" / f).exists()
    assert "roundtrip_error" in capsys.readouterr().out


def test_roundtrip_free_is_exact(tmp_path):
    spec = write_spec(tmp_path, "free")
    assert run(tmp_path, "roundtrip", spec, "rt") == 0
    _, checks = summary(tmp_path, "rt")
    for name in ("roundtrip_error", "coincidence_error", "glm_residual"):
        assert checks[name]["value"] < 1e-10


def test_outputs_are_deterministic(tmp_path):
    spec = write_spec(tmp_path, "two_site")
    assert run(tmp_path, "roundtrip", spec, "a") == 0
    assert run(tmp_path, "roundtrip", spec, "b") == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "scattering.json" in files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_workers_give_identical_data(tmp_path):
    spec = write_spec(tmp_path, "two_site")
    assert run(tmp_path, "direct", spec, "one") == 0
    assert run(tmp_path, "direct", spec, "two", "--workers", "2") == 0
    a = (tmp_path / "one" / "scattering.json").read_bytes()
    assert a == (tmp_path / "two" / "scattering.json").read_bytes()


def test_direct_then_inverse_from_file(tmp_path):
    spec = write_spec(tmp_path, "mixed")
    assert run(tmp_path, "direct", spec, "d") == 0
    data = tmp_path / "d" / "scattering.json"
    assert run(tmp_path, "inverse", spec, "i", "--data", str(data)) == 0
    _, checks = summary(tmp_path, "i")
    assert checks["coincidence_error"]["pass"]


def test_validate_passes_on_clean_data(tmp_path):
    spec = write_spec(tmp_path, "step")
    assert run(tmp_path, "validate", spec, "v") == 0
    _, checks = summary(tmp_path, "v")
    for side in "+-":
        assert checks[f"kernel_symmetry_{side}"]["pass"]
        assert checks[f"kernel_decay_{side}"]["pass"]
    assert (tmp_path / "v" / "validation.json").exists()


def corrupted(tmp_path, name):
    spec = write_spec(tmp_path, name)
    assert run(tmp_path, "direct", spec, "d") == 0
    s = get_spec(name)
    data = io.data_from_json(io.read_json(tmp_path / "d" / "scattering.json"), s)
    path = tmp_path / "bad.json"
    io.write_json(path, io.data_to_json(data.with_scaled_reflection("+", "1.1")))
    return spec, path


def test_validate_rejects_scaled_reflection(tmp_path):
    spec, bad = corrupted(tmp_path, "bump")
    assert run(tmp_path, "validate", spec, "v", "--data", str(bad)) == 1
    s, checks = summary(tmp_path, "v")
    assert s["exit"] == 1
    assert not checks["energy_balance"]["pass"]


def test_inverse_rejects_scaled_reflection(tmp_path):
    spec, bad = corrupted(tmp_path, "bump")
    code = main(["inverse", "--spec", str(spec), "--data", str(bad), "--out", str(tmp_path / "i")])
    assert code == 1
    _, checks = summary(tmp_path, "i")
    failed = [n for n, c in checks.items() if not c["pass"]]
    assert failed


def test_bands(tmp_path):
    spec = write_spec(tmp_path, "golden")
    assert run(tmp_path, "bands", spec, "b") == 0
    bands = io.read_json(tmp_path / "b" / "bands.json")
    assert len(bands["right"]["edges"]) == 4
    assert [d["class"] for d in bands["right"]["dirichlet"]] == ["Mhat"]


def test_bad_spec_exit_two(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"left": {"period": 1, "a": [0.5], "b": [0]}, "right": {"period": 1, "a": [-0.5], "b": [0]}}))
    assert main(["bands", "--spec", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "NonPositiveCoefficient" in capsys.readouterr().err
    path.write_text("{}")
    assert main(["bands", "--spec", str(path), "--out", str(tmp_path / "o")]) == 2
    assert main(["bands", "--spec", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2


def test_bad_config_exit_two(tmp_path):
    spec = write_spec(tmp_path, "free")
    assert main(["bands", "--spec", str(spec), "--quad-nodes", "0", "--out", str(tmp_path / "o")]) == 2
    assert main(["bands", "--spec", str(spec), "--report-range=5,-5", "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(SystemExit):
        main(["bands", "--spec", str(spec), "--report-range", "x"])


def test_run_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig("plot", tmp_path)
    with pytest.raises(ConfigError):
        RunConfig("direct", tmp_path, tol=0)
