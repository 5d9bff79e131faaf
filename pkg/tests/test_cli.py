import json
import math
import subprocess
import sys

import pytest

from nodalkit import cli


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main(args + ["-o", str(out)])
    return code, out.read_text() if out.exists() else ""


def strip_timestamp(text):
    return [line for line in text.splitlines() if "timestamp" not in line]


def test_density_near_rows(tmp_path):
    code, text = run(["density", "--ell", "100", "--psi-min", "0.01", "--psi-max", "314"], tmp_path)
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == "# schema=1"
    assert sum("timestamp" in line for line in lines) == 1
    rows = [line.split(",") for line in lines if not line.startswith("#")][1:]
    exact = [(float(p), float(v)) for p, v, r in rows if r == "exact"]
    assert exact[0][1] == pytest.approx(100 / (2 * math.pi), rel=0.01)
    assert {r for _, _, r in rows} == {"exact", "far", "near", "planar"}


def test_length_json(tmp_path):
    code, text = run(["length", "--ells", "50,100,200,400,800"], tmp_path)
    assert code == 0
    doc = json.loads(text)
    assert doc["schema"] == 1
    assert doc["fit"]["slope"] == pytest.approx(-0.0221, rel=0.15)
    assert [row["ell"] for row in doc["table"]] == [50, 100, 200, 400, 800]
    assert doc["config"]["ells"] == "50,100,200,400,800"


def test_length_csv(tmp_path):
    code, text = run(["length", "--ells", "10,20,40,80,160", "--format", "csv"], tmp_path)
    assert code == 0
    body = [line for line in text.splitlines() if not line.startswith("#")]
    assert body[0].startswith("ell,total,leading,deficiency")
    assert len(body) == 6


def test_verify(tmp_path):
    code, text = run(["verify"], tmp_path)
    assert code == 0
    rows = [line for line in text.splitlines() if not line.startswith("#")][1:]
    assert rows and all(line.endswith(",1") for line in rows)


def test_simulate_reproducible(tmp_path):
    args = ["simulate", "--ell", "4", "--replicates", "30", "--seed", "9"]
    _, a = run(args, tmp_path, "a")
    _, b = run(args + ["--threads", "2"], tmp_path, "b")
    assert strip_timestamp(a) == strip_timestamp(b)
    assert "# seed=9" in a


def test_density_byte_identical(tmp_path):
    args = ["density", "--ell", "30", "--n-psi", "20", "--format", "json"]
    _, a = run(args, tmp_path, "a")
    _, b = run(args, tmp_path, "b")
    assert strip_timestamp(a) == strip_timestamp(b)


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# campaign\nell = 3\nreplicates = 31\nseed = 5  # trailing comment\nmode = full\n")
    cfg_obj = cli.config_from_args(["simulate", "--config", str(cfg), "--seed", "6"])
    assert (cfg_obj.ell, cfg_obj.replicates, cfg_obj.seed, cfg_obj.mode) == (3, 31, 6, "full")


def test_simulate_outputs(tmp_path):
    seg = tmp_path / "seg.csv"
    field = tmp_path / "field.bin"
    plot = tmp_path / "hist.png"
    code, text = run(["simulate", "--ell", "3", "--replicates", "30", "--dump-segments", str(seg),
                      "--dump-field", str(field), "--plot", str(plot)], tmp_path)
    assert code == 0
    assert seg.read_text().startswith("theta1,phi1,theta2,phi2")
    assert field.read_bytes()[:4] == b"NDKF"
    assert plot.stat().st_size > 0
    assert "reference_kind=kac_rice" in text


@pytest.mark.parametrize("command", ["density", "length", "verify"])
def test_plots(tmp_path, command):
    plot = tmp_path / f"{command}.png"
    extra = ["--ells", "10,20,40,80,160"] if command == "length" else []
    code, _ = run([command, "--plot", str(plot)] + extra, tmp_path)
    assert code == 0 and plot.stat().st_size > 0


@pytest.mark.parametrize("args", [
    ["density", "--ell", "0"],
    ["density", "--bogus"],
    ["length", "--ells", "10,20"],
    ["simulate", "--ell", "20", "--n-theta", "50"],
    ["simulate", "--replicates", "5"],
    ["density", "--regimes", "exact,sideways"],
])
def test_usage_errors(tmp_path, args, capsys):
    assert cli.main(args + ["-o", str(tmp_path / "x")]) == 2


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("ell 3\n")
    assert cli.main(["density", "--config", str(cfg)]) == 2
    cfg.write_text("colour = blue\n")
    assert cli.main(["density", "--config", str(cfg)]) == 2


def test_numerical_failure_exit(tmp_path, capsys, monkeypatch):
    from nodalkit import kac_rice
    from nodalkit.errors import NumericalFailure

    def boom(*a, **k):
        raise NumericalFailure("no convergence", {"degree": 50, "nodes": 512})

    monkeypatch.setattr(kac_rice, "expected_nodal_length", boom)
    assert cli.main(["length", "-o", str(tmp_path / "x")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["diagnostics"]["nodes"] == 512


def test_env_threads(monkeypatch, tmp_path):
    monkeypatch.setenv("NODALKIT_THREADS", "2")
    cfg = cli.config_from_args(["simulate", "--ell", "2", "--replicates", "30"])
    cli.run(cfg)
    assert cfg.threads == 2


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "nodalkit.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "density" in out.stdout
