import csv
import json
from pathlib import Path

import pytest

from warpshare.cli import EXIT_INPUT, EXIT_OK, EXIT_USAGE, main

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def workload(tmp_path):
    path = tmp_path / "k.json"
    assert main(["gen", "--profile", "compute", "--seed", "2", "--out", str(path)]) == EXIT_OK
    return path


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"num_sms": 2}))
    return path


def _rows(text):
    return list(csv.reader(text.strip().splitlines()))


def test_occupancy_csv(capsys):
    rc = main(["occupancy", "--threads-per-block", "256", "--regs-per-thread", "36",
               "--sharing-pct", "0,50,90"])
    assert rc == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["sharing_pct", "U", "S", "M", "limited_by"]
    assert [r[3] for r in rows[1:]] == ["3", "4", "6"]


def test_occupancy_needs_one_resource(capsys):
    assert main(["occupancy", "--threads-per-block", "256"]) == EXIT_USAGE
    assert main(["occupancy", "--threads-per-block", "256", "--regs-per-thread", "4",
                 "--spm-per-block", "4"]) == EXIT_USAGE


def test_occupancy_block_too_big(capsys):
    rc = main(["occupancy", "--threads-per-block", "1024", "--regs-per-thread", "64"])
    assert rc == EXIT_INPUT
    assert "--" in capsys.readouterr().err


def test_hwcost(capsys):
    assert main(["hwcost", "--blocks", "8", "--warps", "48", "--sms", "14"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "register_sharing_bits,3822" in out and "scratchpad_sharing_bits,1302" in out


def test_gen_writes_manifest(workload):
    manifest = json.loads(Path(f"{workload}.manifest.json").read_text())
    assert manifest["command"] == "gen" and manifest["seed"] == 2
    assert len(manifest["workload_hash"]) == 64
    assert "schema_version" in manifest


def test_reorder_report(tmp_path, capsys):
    out = tmp_path / "out.ptxp"
    rc = main(["reorder", "--in", str(FIXTURES / "sgemm_prologue.ptxp"), "--out", str(out),
               "--report"])
    assert rc == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["name", "seq_before", "seq_after", "class"]
    assert ["p0", "31", "1", "unshared"] in rows
    assert out.read_text().startswith(".reg .pred $p0;")


def test_reorder_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.ptxp"
    bad.write_text(".reg .u32 $a; frob $a;")
    assert main(["reorder", "--in", str(bad), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "--in" in capsys.readouterr().err


def test_simulate_and_sweep_agree_at_zero(tmp_path, workload, small_config):
    metrics = tmp_path / "m.json"
    assert main(["simulate", "--config", str(small_config), "--workload", str(workload),
                 "--mode", "baseline", "--out", str(metrics)]) == EXIT_OK
    m = json.loads(metrics.read_text())
    assert m["schema_version"] == 1
    sweep = tmp_path / "s.csv"
    assert main(["sweep", "--config", str(small_config), "--workload", str(workload),
                 "--sharing-pct", "0,90", "--jobs", "2", "--out", str(sweep)]) == EXIT_OK
    rows = list(csv.DictReader(sweep.open()))
    assert list(rows[0]) == ["sharing_pct", "blocks_resident", "ipc", "stall_cycles",
                             "idle_cycles", "l1_miss_rate"]
    assert [r["sharing_pct"] for r in rows] == ["0", "90"]
    assert float(rows[0]["ipc"]) == pytest.approx(m["ipc"], rel=0, abs=1e-12)
    assert int(rows[0]["idle_cycles"]) == m["idle_cycles"]


def test_seed_env_overrides(tmp_path, workload, small_config, monkeypatch):
    monkeypatch.setenv("WARPSHARE_SEED", "11")
    out = tmp_path / "m.json"
    assert main(["simulate", "--config", str(small_config), "--workload", str(workload),
                 "--seed", "3", "--out", str(out)]) == EXIT_OK
    assert json.loads(Path(f"{out}.manifest.json").read_text())["seed"] == 11
    monkeypatch.setenv("WARPSHARE_SEED", "x")
    assert main(["simulate", "--workload", str(workload), "--out", str(out)]) == EXIT_USAGE


def test_trace_locks(tmp_path, workload, small_config, capsys):
    out = tmp_path / "m.json"
    assert main(["simulate", "--config", str(small_config), "--workload", str(workload),
                 "--scheduler", "owf", "--trace-locks", "--out", str(out)]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    assert rows and all(len(r) == 5 for r in rows)
    assert {r[2] for r in rows} <= {"acquire", "deny", "release", "transfer"}
    assert [int(r[0]) for r in rows] == sorted(int(r[0]) for r in rows)


def test_bad_workload(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["simulate", "--workload", str(bad), "--out", str(tmp_path / "m")]) == EXIT_INPUT
    assert "--workload" in capsys.readouterr().err
    missing = tmp_path / "none.json"
    assert main(["simulate", "--workload", str(missing), "--out", str(tmp_path / "m")]) \
        == EXIT_INPUT


def test_bad_config(tmp_path, workload, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"num_sms": 0}))
    assert main(["simulate", "--config", str(cfg), "--workload", str(workload),
                 "--out", str(tmp_path / "m")]) == EXIT_INPUT
    assert "--config" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["simulate", "--workload", "x"]) == EXIT_USAGE
    assert main(["sweep", "--workload", "x", "--out", "y", "--sharing-pct", "100"]) == EXIT_USAGE
