import csv
import io
import json

import pytest

from ehmac.cli import main
from ehmac.experiments import CSV_COLUMNS


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("preset", ["fig2", "fig3", "fig4"])
def test_presets_are_reproducible(tmp_path, capsys, preset):
    code, first, err = run_cli(capsys, "sweep", "--preset", preset, "--out", str(tmp_path / "a"))
    assert code == 0, err
    code, second, _ = run_cli(capsys, "sweep", "--preset", preset, "--out", str(tmp_path / "b"))
    assert code == 0 and first == second
    assert (tmp_path / "a" / f"{preset}.csv").read_bytes() == (tmp_path / "b" / f"{preset}.csv").read_bytes()
    rows = rows_of(first)
    assert tuple(rows[0].keys()) == CSV_COLUMNS
    assert all(r["status"] == "ok" for r in rows)
    meta = json.loads((tmp_path / "a" / f"{preset}.json").read_text())
    assert "runtime_ms" in json.dumps(meta)


def test_threads_do_not_change_output(tmp_path, capsys):
    cfg = tmp_path / "grid.json"
    cfg.write_text(json.dumps({"U": [2, 5, 10], "beta": ["1/U", 0.05], "e_max": [1, 4],
                               "methods": ["sne", "heuristic", "ebp", "nbp"],
                               "simulate": True, "sim": {"K": 20_000}}))
    _, serial, _ = run_cli(capsys, "sweep", "--config", str(cfg), "--out", str(tmp_path / "s"))
    _, parallel, _ = run_cli(capsys, "sweep", "--config", str(cfg), "--threads", "3",
                             "--out", str(tmp_path / "p"))
    assert serial == parallel
    assert (tmp_path / "s" / "grid.csv").exists()


def test_seed_flag_changes_simulation_only(tmp_path, capsys):
    base = ["simulate", "--out", str(tmp_path)]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"U": [3], "beta": [0.2], "e_max": [3], "sim": {"K": 20_000}}))
    _, a, _ = run_cli(capsys, *base, "--config", str(cfg), "--seed", "1")
    _, b, _ = run_cli(capsys, *base, "--config", str(cfg), "--seed", "2")
    ra, rb = rows_of(a)[0], rows_of(b)[0]
    assert ra["R_analytic"] == rb["R_analytic"]
    assert ra["R_sim"] != rb["R_sim"]


@pytest.mark.parametrize("body,line,fragment", [
    ('{\n  "U": [2],\n  "beta": [1.5]\n}', 3, "beta"),
    ('{\n  "U": [2],\n  "colour": 1\n}', 3, "unknown key"),
    ('{\n  "U": [2],\n  "e_max": [3],\n  "methods": ["gop"]\n}', 4, "e_max = 1"),
    ('{\n  "U": [0]\n}', 2, "U"),
    ('{\n  "U": [2],,\n}', 2, ""),
])
def test_bad_config_reports_line(tmp_path, capsys, body, line, fragment):
    cfg = tmp_path / "bad.json"
    cfg.write_text(body)
    code, out, err = run_cli(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 2 and out == ""
    assert f"line {line}:" in err and fragment in err


def test_solve_and_bounds_outputs(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "solve", "--out", str(tmp_path))
    row = rows_of(out)[0]
    assert code == 0 and row["method"] == "sne" and float(row["gap_to_ub"]) >= 0
    _, out, _ = run_cli(capsys, "bounds", "--out", str(tmp_path))
    ub = rows_of(out)[0]
    assert ub["method"] == "upper_bound"
    assert float(ub["R_analytic"]) >= float(row["R_analytic"])


def test_baselines_add_gop_at_unit_battery(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"U": [4], "beta": [0.3], "e_max": [1]}))
    _, out, _ = run_cli(capsys, "baselines", "--config", str(cfg), "--out", str(tmp_path))
    assert [r["method"] for r in rows_of(out)] == ["ebp", "nbp", "gop"]


def test_verify_negative_control_fails(tmp_path, capsys):
    cfg = tmp_path / "v.json"
    cfg.write_text(json.dumps({"simulate": False, "tolerance_scale": 0}))
    code, out, _ = run_cli(capsys, "verify", "--config", str(cfg))
    assert code == 1
    assert "property-only subset" in out
    assert "FAIL" in out
