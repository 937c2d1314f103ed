import json
import os

import pytest

from rsmodel.cli import main
from rsmodel.io import read_csv
from rsmodel.runconfig import ConfigError, DEFAULT_CONFIG, load_config, strip_comments

TINY = {
    "params": {"alpha": 0.45, "homogeneity_cutoff": 2.0},
    "grid": {"L0": 0.125, "L": 1.0, "N0": 32, "N1": 64},
    "mc": {
        "n_samples": 8,
        "seed": 11,
        "tau_ladder": [5e-7, 2.5e-7, 1.25e-7],
        "probe_radii": [4 / 64, 6 / 64, 8 / 64, 12 / 64],
    },
    "tau": 3.125e-8,
    "calibration_samples": 6,
    "recenter_offset_cells": 4,
}


def write_config(tmp_path, extra=None, comments=False):
    obj = dict(TINY)
    if extra:
        obj = {**obj, **extra}
    text = json.dumps(obj, indent=1)
    if comments:
        text = "// tiny config\n" + text + "\n/* trailing */\n"
    path = os.path.join(tmp_path, "config.json")
    with open(path, "w") as fh:
        fh.write(text)
    return path


def test_strip_comments():
    text = '// a\n{"x": 1 /* inline */ }\n'
    assert json.loads(strip_comments(text)) == {"x": 1}


def test_config_defaults_and_merge(tmp_path):
    cfg = load_config(write_config(tmp_path, comments=True))
    assert cfg.grid.N0 == 32
    assert cfg.params.alpha == 0.45
    assert cfg.mc.workers == DEFAULT_CONFIG["mc"]["workers"]


def test_config_rejects_unknown_key(tmp_path):
    path = write_config(tmp_path, extra={"nonsense": 1})
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_cross_field_validation(tmp_path):
    bad = dict(TINY)
    bad["mc"] = dict(TINY["mc"], probe_radii=[0.7])
    path = os.path.join(tmp_path, "bad.json")
    with open(path, "w") as fh:
        json.dump(bad, fh)
    with pytest.raises(ConfigError):
        load_config(path)


def test_cli_config_error_exit_code(tmp_path):
    path = os.path.join(tmp_path, "bad.json")
    with open(path, "w") as fh:
        fh.write('{"params": {"alpha": 3.0}}')
    assert main(["--config", path, "--out", str(tmp_path / "o"), "enumerate"]) == 2


def test_cli_enumerate(tmp_path, capsys):
    cfgp = write_config(tmp_path)
    out = str(tmp_path / "enum")
    assert main(["--config", cfgp, "--out", out, "enumerate"]) == 0
    header, rows = read_csv(os.path.join(out, "enumerate.csv"))
    assert header[0] == "beta"
    assert len(rows) == 22
    ords = [float(r[3]) for r in rows]
    assert ords == sorted(ords)
    assert os.path.exists(os.path.join(out, "manifest.json"))
    assert os.path.exists(os.path.join(out, "config.json"))
    text = capsys.readouterr().out
    assert "22 populated indices" in text


def test_cli_build_requires_calibration(tmp_path):
    cfgp = write_config(tmp_path)
    out = str(tmp_path / "nocal")
    code = main(["--config", cfgp, "--out", out, "build"])
    assert code == 2


def test_cli_calibrate_then_build(tmp_path):
    cfgp = write_config(tmp_path)
    out = str(tmp_path / "run")
    assert main(["--config", cfgp, "--out", out, "calibrate"]) == 0
    with open(os.path.join(out, "counterterm.json")) as fh:
        ct = json.load(fh)
    assert ct["entries"]["k1"]["value"] != 0.0
    assert main(["--config", cfgp, "--out", out, "build"]) == 0
    assert os.path.exists(os.path.join(out, "report.json"))
    assert os.path.exists(os.path.join(out, "gamma.csv"))
    fields = os.listdir(os.path.join(out, "fields"))
    assert any(f.startswith("pi_0") for f in fields)
    with open(os.path.join(out, "report.json")) as fh:
        report = json.load(fh)
    assert all(item["passed"] for item in report["basics"])
    assert max(r["relative"] for r in report["recenter"]) < 1e-9


def test_cli_build_deterministic(tmp_path):
    cfgp = write_config(tmp_path)
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    for out in (out1, out2):
        assert main(["--config", cfgp, "--out", out, "calibrate"]) == 0
        assert main(["--config", cfgp, "--out", out, "build"]) == 0
    for name in sorted(os.listdir(os.path.join(out1, "fields"))):
        with open(os.path.join(out1, "fields", name), "rb") as fh:
            blob1 = fh.read()
        with open(os.path.join(out2, "fields", name), "rb") as fh:
            blob2 = fh.read()
        assert blob1 == blob2, name


def test_cli_rerun_from_echoed_config(tmp_path):
    cfgp = write_config(tmp_path)
    out1 = str(tmp_path / "first")
    assert main(["--config", cfgp, "--out", out1, "enumerate"]) == 0
    echoed = os.path.join(out1, "config.json")
    out2 = str(tmp_path / "second")
    assert main(["--config", echoed, "--out", out2, "enumerate"]) == 0
    with open(os.path.join(out1, "enumerate.csv"), "rb") as fh:
        a = fh.read()
    with open(os.path.join(out2, "enumerate.csv"), "rb") as fh:
        b = fh.read()
    assert a == b


def test_cli_verify_tiny(tmp_path):
    cfgp = write_config(tmp_path)
    out = str(tmp_path / "verify")
    assert main(["--config", cfgp, "--out", out, "verify"]) == 0
    with open(os.path.join(out, "verify.json")) as fh:
        checks = json.load(fh)
    hard = [c for c in checks if c["hard"]]
    assert hard and all(c["passed"] for c in hard)


def test_cli_resource_limit_exit_code(tmp_path):
    path = write_config(tmp_path, extra={"hard_limit": 4})
    out = str(tmp_path / "rl")
    assert main(["--config", path, "--out", out, "enumerate"]) == 4


def test_cli_build_writes_slices(tmp_path):
    cfgp = write_config(tmp_path)
    out = str(tmp_path / "sl")
    assert main(["--config", cfgp, "--out", out, "calibrate"]) == 0
    assert main(["--config", cfgp, "--out", out, "build"]) == 0
    slices = os.listdir(os.path.join(out, "slices"))
    assert any(s.startswith("pi_0") for s in slices)
    header, rows = read_csv(os.path.join(out, "slices", sorted(slices)[0]))
    assert header == ["coordinate", "value"]
    assert len(rows) == 64
