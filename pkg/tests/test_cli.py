import io
import subprocess
import sys

import pytest
import yaml

from helpers import line_doc, shipped, shipped_doc
from ipcsim import shipped_scenarios
from ipcsim.cli import build_parser, main, run_command
from ipcsim.report import COLUMNS, read_metrics


def _run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_command(build_parser().parse_args(["run", *map(str, argv)]), out, err)
    return code, out.getvalue(), err.getvalue()


def _write(tmp_path, doc, name="s.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(doc, sort_keys=False))
    return p


def test_clean_run_exits_zero(tmp_path):
    code, out, err = _run(shipped("line_ping"), "--strict")
    assert code == 0 and err == ""
    assert "ping samples=10 lost=0" in out and "leak check=ok" in out


def test_validate_only(tmp_path):
    trace = tmp_path / "t.log"
    code, out, _ = _run(shipped("border_router"), "--validate-only", "--trace", trace)
    assert code == 0 and "ok (4 nodes, 3 links, 6 DIFs)" in out
    assert not trace.exists()


def test_invalid_scenario_exits_one(tmp_path):
    doc = shipped_doc("line_ping")
    doc["nodes"][1]["kind"] = "border-router"
    code, out, err = _run(_write(tmp_path, doc))
    assert code == 1 and out == ""
    assert "nodes[1].ipcps" in err and "three or more" in err


def test_missing_file_exits_one(tmp_path):
    code, _, err = _run(tmp_path / "absent.yaml")
    assert code == 1 and "error" in err


def test_breach_under_strict_exits_two(tmp_path):
    # stopping mid-exchange leaves the flow up, which the leak check reports
    path = shipped("line_ping")
    assert _run(path, "--until", "0.1")[0] == 0
    code, out, _ = _run(path, "--until", "0.1", "--strict")
    assert code == 2 and "leak check=FAILED" in out


def test_flow_error_under_strict_exits_two(tmp_path):
    doc = line_doc(count=2, reliable=True)
    doc["links"][1]["ber"] = 1.0
    code, out, _ = _run(_write(tmp_path, doc), "--strict")
    assert code == 2 and "flow_errors=0" not in out


@pytest.mark.parametrize("name", [p.stem for p in shipped_scenarios()])
def test_trace_is_byte_identical_across_runs(tmp_path, name):
    a, b = tmp_path / "a.log", tmp_path / "b.log"
    _run(shipped(name), "--trace", a)
    _run(shipped(name), "--trace", b)
    assert a.read_bytes() == b.read_bytes() and a.stat().st_size > 0


def test_seed_changes_lossy_trace(tmp_path):
    a, b = tmp_path / "a.log", tmp_path / "b.log"
    _run(shipped("line_lossy"), "--trace", a, "--seed", 1, "--until", "0.5")
    _run(shipped("line_lossy"), "--trace", b, "--seed", 2, "--until", "0.5")
    assert a.read_bytes() != b.read_bytes()


def test_metrics_has_one_row_per_ping(tmp_path):
    m = tmp_path / "m.csv"
    code, _, _ = _run(shipped("line_ping"), "--metrics", m)
    assert code == 0
    assert m.read_text().splitlines()[0] == ",".join(COLUMNS)
    rows = read_metrics(m)
    assert [int(r["seq"]) for r in rows] == list(range(1, 11))
    assert all(r["lost"] == "0" and int(r["rtt_ns"]) == 2 * int(r["one_way_ns"]) for r in rows)


def test_until_shortens_the_run(tmp_path):
    m = tmp_path / "m.csv"
    _, out, _ = _run(shipped("line_ping"), "--until", "0.1", "--metrics", m)
    assert "end_ns=100000000" in out
    assert 0 < len(read_metrics(m)) < 10


def test_plot_is_written(tmp_path):
    png = tmp_path / "lat.png"
    code, _, _ = _run(shipped("line_lossy"), "--plot", png)
    assert code == 0
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_log_level_choices():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "x.yaml", "--log-level", "loud"])


def test_main_and_console_entry(tmp_path):
    assert main(["run", str(shipped("deny")), "--validate-only"]) == 0
    proc = subprocess.run([sys.executable, "-m", "ipcsim.cli", "run", str(shipped("line_ping"))],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "counters reconcile=yes" in proc.stdout
