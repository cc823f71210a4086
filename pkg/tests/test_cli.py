import csv
import json
import math
from pathlib import Path

import pytest

from collision_asymptotics import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
CYL = {"N": 5, "k": 3, "cyl": [{"J": [1, 2, 3], "alpha": 0.1875}], "pairs": []}


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_dumps_format():
    s = cli.dumps({"a": 0.1, "b": [1, float("nan")], "c": True})
    assert '"a": 0.10000000000000001' in s
    assert "[1, null]" in s and '"c": true' in s
    assert json.loads(s)["b"] == [1, None]


def test_csv_round_trip():
    text = cli.csv_text(("i", "x"), [(0, 1.5), (1, float("inf"))])
    rows = list(csv.reader(text.splitlines()))
    assert rows == [["i", "x"], ["0", "1.5"], ["1", "null"]]


def test_config_hash_is_stable(tmp_path):
    a = cli.load_config(_write(tmp_path, {"potential": CYL, "params": {"count": 3}}), "spectrum")
    b = cli.build_config({"params": {"count": 3}, "potential": CYL}, "spectrum")
    assert a.config_hash == b.config_hash


def test_spectrum_writes_artifacts_and_matches_golden(tmp_path):
    assert cli.main(["spectrum", "--config", str(CONFIGS / "spectrum_example.json"),
                     "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "spectrum.json").read_text())
    assert out["checks"] == {"closed_form": True, "golden": True}
    assert out["mu1"] == pytest.approx(-11 / 16, rel=1e-6)
    assert (tmp_path / "spectrum.csv").read_text().startswith("index,mu\n")


def test_malformed_json_reports_location(tmp_path, capsys):
    code = cli.main(["spectrum", "--config", _write(tmp_path, '{"potential": {\n  "N": 5,,}'),
                     "--out", str(tmp_path)])
    assert code == 2
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize("cfg", [
    {"potential": CYL, "params": {"bogus": 1}},
    {"potential": CYL, "extra": 1},
    {"potential": {**CYL, "k": 7}},
    {"potential": {**CYL, "cyl": [{"J": [1, 1, 2], "alpha": 0.1}]}},
])
def test_invalid_configs_exit_2(tmp_path, cfg):
    assert cli.main(["spectrum", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 2


def test_seed_required_for_seeded_commands(tmp_path):
    assert cli.main(["project", "--config", _write(tmp_path, {"potential": CYL}),
                     "--out", str(tmp_path)]) == 2


def test_potential_by_path(tmp_path):
    cfg = cli.load_config(str(CONFIGS / "bound_check.json"), "bound-check")
    assert cfg.potential.N == 5 and cfg.seed == 0


def test_project_command(tmp_path):
    cfg = {"potential": CYL, "params": {"depth": 1}, "seed": 0}
    assert cli.main(["project", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "project.json").read_text())
    assert out["identity_residual"] < 1e-10
    assert out["checks"]["gamma_tilde_invariant"]


def test_verify_hardy_csv(tmp_path):
    cfg = {"potential": CYL, "params": {"kinds": ["cylindrical"], "families": ["harmonic"]}, "seed": 0}
    assert cli.main(["verify", "--suite", "hardy", "--config", _write(tmp_path, cfg),
                     "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "verify.csv").read_text().splitlines()))
    assert rows and all(r["passed"] == "true" for r in rows)


def test_tolerance_scale_can_fail_a_run(tmp_path):
    # the projection identity holds to roundoff, not exactly
    cfg = {"potential": CYL, "params": {"depth": 0}, "seed": 0}
    assert cli.main(["project", "--config", _write(tmp_path, cfg), "--out", str(tmp_path),
                     "--tolerance-scale", "1e-30"]) == 1
    out = json.loads((tmp_path / "project.json").read_text())
    assert out["checks"]["identity"] is False


def test_unknown_command_rejected():
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])
