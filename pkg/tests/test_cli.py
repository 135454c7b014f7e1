import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

import primeflow.pipeline
from primeflow.cli import EXIT_CONSERVATION, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from primeflow.metrics import ConservationResult, Oracle, RunReport
from primeflow.trace import read_csv_trace

DATA = Path(__file__).parent / "data"
SMALL = ["--flows", "3000", "--packets", "20000", "--no-timestamp"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_tiny_fixture(capsys):
    code, out, _ = run(capsys, "simulate", "--trace", str(DATA / "tiny10.csv"), "--memory-bytes", "213")
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["n"] == 10 and rep["k0"] == 6 and rep["d"] == 3
    assert rep["ts"]


def test_simulate_byte_identical_without_timestamp(capsys, tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        path = tmp_path / name
        assert main(["simulate", *SMALL, "--memory-bytes", "30000", "--output", str(path)]) == EXIT_OK
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["ts"] is None


def test_simulate_csv_format(capsys):
    code, out, _ = run(capsys, "simulate", *SMALL, "--format", "csv", "--policy", "turboflow")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == EXIT_OK and len(rows) == 1
    assert rows[0]["policy"] == "turboflow" and rows[0]["d"] == "1"


def test_sweep_cardinality_and_order(capsys):
    code, out, _ = run(capsys, "sweep", *SMALL, "--start", "20000", "--stop", "40000", "--step", "20000")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == EXIT_OK
    assert [(r["memory_bytes"], r["policy"]) for r in rows] == [
        ("20000", "prime"), ("20000", "turboflow"), ("40000", "prime"), ("40000", "turboflow"),
    ]
    assert list(rows[0]) == RunReport.field_names()


def test_degenerate_sweep_equals_simulate(capsys):
    _, sweep_out, _ = run(capsys, "sweep", *SMALL, "--start", "50000", "--stop", "50000", "--step", "1",
                          "--policies", "prime")
    _, sim_out, _ = run(capsys, "simulate", *SMALL, "--memory-bytes", "50000", "--format", "csv")
    assert sweep_out == sim_out


def test_sweep_parallel_matches_serial(capsys):
    args = ["sweep", *SMALL, "--start", "20000", "--stop", "60000", "--step", "20000"]
    _, serial, _ = run(capsys, *args)
    _, parallel, _ = run(capsys, *args, "--jobs", "2")
    assert serial == parallel


def test_compare_json(capsys):
    code, out, _ = run(capsys, "compare", *SMALL, "--memory-bytes", "20000")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["prime"]["policy"] == "prime" and doc["turboflow"]["policy"] == "turboflow"
    base, ours = doc["turboflow"]["eviction_rate"], doc["prime"]["eviction_rate"]
    assert doc["delta"]["eviction_reduction"] == pytest.approx((base - ours) / base)


def test_gen_small(capsys, tmp_path):
    path = tmp_path / "g.csv"
    code, out, _ = run(capsys, "gen", "--flows", "1", "--packets", "3", str(path))
    assert code == EXIT_OK
    assert len(path.read_text().splitlines()) == 4
    assert "distinct_flows=1" in out
    first = path.read_bytes()
    run(capsys, "gen", "--flows", "1", "--packets", "3", str(path))
    assert path.read_bytes() == first


@pytest.mark.slow
def test_gen_1m_reingest_distinct_flows(capsys, tmp_path):
    path = tmp_path / "big.csv"
    code, out, _ = run(capsys, "gen", "--single-target", "0.5", str(path))
    assert code == EXIT_OK
    reported = dict(part.split("=") for part in out.split())
    oracle = Oracle.from_trace(read_csv_trace(path))
    assert oracle.total_packets == int(reported["packets"]) == 1_000_000
    assert oracle.distinct_flows == int(reported["distinct_flows"])


def test_config_file_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[primeflow]\nmemory-bytes = 7100\nd = 2\nflows = 3000\npackets = 20000\n")
    _, out, _ = run(capsys, "simulate", "--config", str(cfg), "--no-timestamp")
    rep = json.loads(out)
    assert rep["memory_bytes"] == 7100 and rep["d"] == 2 and rep["n"] == 20000
    _, out, _ = run(capsys, "simulate", "--config", str(cfg), "--d", "4", "--no-timestamp")
    assert json.loads(out)["d"] == 4


def test_bad_config_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[primeflow]\nbogus = 1\n")
    code, _, err = run(capsys, "simulate", "--config", str(cfg))
    assert code == EXIT_USAGE and "bogus" in err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--memory-bytes", "lots"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == EXIT_USAGE
    code, _, _ = run(capsys, "simulate", *SMALL, "--memory-bytes", "100")
    assert code == EXIT_USAGE


def test_io_errors(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--trace", str(tmp_path / "missing.csv"))
    assert code == EXIT_IO
    bad = tmp_path / "bad.csv"
    bad.write_text("ts_us,src_ip,dst_ip,src_port,dst_port,proto\n1,1.1.1.1,2.2.2.2,70000,1,6\n")
    code, _, err = run(capsys, "simulate", "--trace", str(bad))
    assert code == EXIT_IO and "line 2" in err


def test_conservation_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(primeflow.pipeline, "verify_conservation", lambda recs, oracle: ConservationResult(False))
    code, _, _ = run(capsys, "simulate", *SMALL)
    assert code == EXIT_CONSERVATION
    code, out, _ = run(capsys, "sweep", *SMALL, "--start", "20000", "--stop", "40000", "--step", "20000")
    assert code == EXIT_CONSERVATION
    assert len(out.splitlines()) == 2  # header plus the failing point, then abort


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "primeflow", "simulate", "--trace", str(DATA / "tiny10.csv"), "--no-timestamp"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 10
