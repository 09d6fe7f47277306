import csv
import io
import json
import os
import subprocess
import sys

import pytest

from slicereg.cli import emit_sector_scan, main, sector_grid
from slicereg.fixtures import named_operator


def write_job(tmp_path, data, name="job.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_spectrum_ij_swap_csv(tmp_path):
    assert main(["spectrum", "-A", "ij_swap", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "spectrum.csv").read_text())))
    pairs = sorted((round(float(r["r"]), 12), round(float(r["s"]), 12)) for r in rows)
    h = round(2 ** -0.5, 12)
    assert pairs == [(-h, h), (h, h)]
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pass"] and "wall_time" not in report["records"][0]


def test_ij_swap_task(tmp_path):
    job = write_job(tmp_path, {"tasks": ["ij_swap"]})
    assert main(["run", str(job), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "ij_swap_spectrum.csv").exists()


def test_input_errors_exit_one(tmp_path, capsys):
    assert main(["run", str(write_job(tmp_path, {"tasks": []}))]) == 1
    assert main(["run", str(write_job(tmp_path, {"tasks": ["nonsense"]}))]) == 1
    assert main(["run", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 1
    assert main(["spectrum", "-A", "no_such_operator"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--bogus"])
    assert exc.value.code == 1


def test_failed_check_exits_two(tmp_path):
    # vertex to the left of the spectrum: the sector probe must fail
    code = main(["probe", "-A", "negative_identity", "--omega", "-2.0", "--out", str(tmp_path)])
    assert code == 2
    report = json.loads((tmp_path / "report.json").read_text())
    assert not report["pass"]


def test_law_and_laplace_subcommands(tmp_path):
    assert main(["law", "-A", "sectorial_h3", "--p", "[0.3, 0.2]", "--q", "[0.4, -0.1]",
                 "--axis", "[0, 1, 0, 0]", "--out", str(tmp_path / "law")]) == 0
    assert main(["laplace", "-A", "sectorial_h3", "--q", "[2.0, 0.5]", "--axis", "[0, 0, 1, 0]",
                 "--k", "1", "2", "--out", str(tmp_path / "lap")]) == 0


def test_flags_after_subcommand(tmp_path, capsys):
    assert main(["spectrum", "-A", "negative_identity", "--seed", "3", "--tol", "1e-9"]) == 0
    out = capsys.readouterr().out
    assert '"seed": 3' in out and "# spectrum.csv" in out


def test_scan_ordering_and_singular_flag():
    a = named_operator("negative_identity")
    grid = [complex(-1.0, 0.0), complex(0.5, 0.2), complex(-0.5, 0.1), complex(0.5, -0.1)]
    rows = list(csv.DictReader(io.StringIO(emit_sector_scan(a, 0.0, grid))))
    keys = [(float(r["re_q"]), float(r["s"])) for r in rows]
    assert keys == sorted(keys)
    status = {(float(r["re_q"]), float(r["s"])): r["status"] for r in rows}
    assert status[(-1.0, 0.0)] == "singular"
    assert status[(0.5, 0.2)] == "ok"
    assert len(sector_grid(0.0, 1.0, [1.0, 2.0], 3)) == 6


def test_byte_reproducible_across_threads(tmp_path):
    job = write_job(tmp_path, {"tasks": ["spectrum", "law", "scan", "laplace"], "operator": "sectorial_h3",
                               "params": {"p": [0.3, 0.2], "q": [0.9, 0.1], "axis": [0, 1, 0, 0], "k": [1]}})
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / f"out{threads}"
        env = {**os.environ, "SLICEREG_THREADS": threads}
        proc = subprocess.run([sys.executable, "-m", "slicereg", "run", str(job), "--out", str(out)],
                              env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1]
    assert not any(name.startswith(".") or name.endswith(".tmp") for name in outputs[0])
