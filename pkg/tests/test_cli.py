import io
import json

import pytest

from relent import cli
from relent.errors import ConfigInvalid


def write_cfg(tmp_path, **kw):
    cfg = {"name": "rotation", "t1": 0.02, "dt": 0.01, "quadrature": {"box_cells": 16}}
    cfg.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["--config", write_cfg(tmp_path), "--out", str(out)])
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["pass"] is True and rep["scenario"] == "rotation"
    for key in ("first_violation_t", "max_margin", "delta_star", "E0", "max_residuals"):
        assert key in rep
    lines = (out / "entropy.csv").read_text().splitlines()
    assert lines[0].startswith("t,E_total") and len(lines) == 4


def test_snapshots_written(tmp_path):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, name="perturbed_twin", params={"mu_plus": 2.0}, snapshot_every=1)
    assert cli.main(["--config", cfg, "--out", str(out), "--grid", "128"]) == 0
    assert sorted(p.name for p in (out / "fields").iterdir())[:2] == ["w_00000.bin", "w_00000.json"]


def test_run_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, name="perturbed_twin", seed=4)
    cli.main(["--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["--config", cfg, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a/entropy.csv").read_bytes() == (tmp_path / "b/entropy.csv").read_bytes()


def test_fixed_delta_failure_exit_code(tmp_path):
    # a tiny offset and huge delta pin the envelope at E0 + eps; a growing E fails
    cfg = write_cfg(tmp_path, name="perturbed_twin", params={"vortex_strength": 0.05},
                    t1=0.05, dt=0.01, delta=1e6, eps=1e-14)
    code = cli.main(["--config", cfg, "--out", str(tmp_path / "o")])
    rep = json.loads((tmp_path / "o/report.json").read_text())
    assert code == 2 and rep["pass"] is False
    assert rep["first_violation_t"] == pytest.approx(0.01)
    assert rep["max_margin"] > 0


def test_invalid_configs(tmp_path, capsys):
    cfg = write_cfg(tmp_path, params={"mu_minus": 0.0})
    assert cli.main(["--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "ConfigInvalid" in capsys.readouterr().err
    with pytest.raises(ConfigInvalid):
        cli.RunConfig.from_dict({"name": "rotation", "colour": 1})
    with pytest.raises(ConfigInvalid):
        cli.RunConfig.from_dict({"name": "spiral"})
    assert cli.main(["--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 1


def test_unwritable_out(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["--config", write_cfg(tmp_path), "--out", str(blocker / "sub")]) == 1


def test_check_mode_filter():
    buf = io.StringIO()
    assert cli.check("heights", stream=buf) == 0
    rows = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert rows and all(r["module"] == "heights" for r in rows)


def test_check_mode_fault_injection():
    buf = io.StringIO()
    assert cli.check("coercivity", zeta_fault=True, stream=buf) == 2
    assert json.loads(buf.getvalue())["pass"] is False


def test_check_mode_full_suite():
    assert cli.main(["--mode", "check"]) == 0
