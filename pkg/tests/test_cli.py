import json

import pytest

from signorini_lab.cli import EXIT_ERROR, EXIT_OK, main
from signorini_lab.fields import load_field


def _config(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


CONE = {"grid": {"dim": 2, "resolution": 65}, "datum": {"family": "3/2"}}


def _header(path):
    return path.read_text().splitlines()[0]


def test_missing_command_and_bad_configs(tmp_path, capsys):
    assert main([]) == EXIT_ERROR
    assert "commands:" in capsys.readouterr().err
    empty = tmp_path / "empty.json"
    empty.write_text("")
    assert main(["solve", "--config", str(empty), "--out", str(tmp_path)]) == EXIT_ERROR
    assert "usage" in capsys.readouterr().err.lower()
    bad = _config(tmp_path, {"grid": {"dim": 2, "resolution": 33}, "datum": {"family": "cubic"}})
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_ERROR
    assert main(["solve", "--out", str(tmp_path)]) == EXIT_ERROR
    assert main(["nonsense"]) == EXIT_ERROR


def test_solve_writes_field_and_report(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--config", str(_config(tmp_path, CONE)), "--out", str(out)]) == EXIT_OK
    u = load_field(out / "solution.field")
    assert u.grid.resolution == 65
    rep = json.loads((out / "solve_report.json").read_text())
    assert rep["iterations"] > 0 and rep["converged"]
    assert rep["kkt"]["max_product"] <= 1e-6


def test_resolution_override(tmp_path):
    out = tmp_path / "o"
    args = ["solve", "--config", str(_config(tmp_path, CONE)), "--out", str(out), "--resolution", "33"]
    assert main(args) == EXIT_OK
    assert load_field(out / "solution.field").grid.resolution == 33


@pytest.mark.parametrize("command,files", [
    ("profile", ["profile.csv", "profile.json"]),
    ("identities", ["identities.json"]),
    ("fb", ["chart.json", "chart.csv"]),
])
def test_analysis_commands(tmp_path, command, files):
    out = tmp_path / "o"
    cfg = _config(tmp_path, CONE)
    assert main([command, "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    for f in files:
        assert (out / f).exists()
    if command == "profile":
        assert _header(out / "profile.csv") == "r,H,D,N,W"
        info = json.loads((out / "profile.json").read_text())
        assert abs(info["frequency_limit"]["N0"] - 1.5) <= 2e-2
    if command == "fb":
        assert _header(out / "chart.csv") == "x1,x2,N0,regular,skipped"


def test_commands_accept_saved_field(tmp_path):
    out = tmp_path / "o"
    main(["solve", "--config", str(_config(tmp_path, CONE)), "--out", str(out)])
    cfg = _config(tmp_path, {"field": str(out / "solution.field"), "radii": [0.2, 0.4, 0.6]}, "f.json")
    assert main(["profile", "--config", str(cfg), "--out", str(tmp_path / "p")]) == EXIT_OK
    assert len((tmp_path / "p" / "profile.csv").read_text().splitlines()) == 4


def test_epi_is_reproducible(tmp_path):
    spec = {"sweep": {"dims": [2], "resolutions": [33], "mode_sets": [[{"nu": 2.5}, {"nu": 3.5}]],
                      "amplitudes": [0.03], "seeds": [0, 1]}}
    cfg = _config(tmp_path, spec)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["epi", "--config", str(cfg), "--out", str(a), "--seed", "3"]) == EXIT_OK
    assert main(["epi", "--config", str(cfg), "--out", str(b), "--seed", "3", "--jobs", "2"]) == EXIT_OK
    for f in ("sweep.csv", "sweep.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert _header(a / "sweep.csv") == "dim,resolution,family,m,amplitude,dist,G_c,G_v,kappa_obs,flags"


def test_validate_quick(tmp_path, capsys):
    assert main(["validate", "--quick", "--out", str(tmp_path)]) == EXIT_OK
    assert "2/2 criteria passed" in capsys.readouterr().out
    assert (tmp_path / "validation.json").exists()
