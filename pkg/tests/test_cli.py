"""Command-line behavior: subcommands, exit codes, reproducible files."""
import subprocess
import sys

import pytest

from sumchase.cli import main
from conftest import (ALT_HARMONIC_ENTRY, RAD_PAIR_ENTRIES, write_family_file)

TRIPLE_ENTRIES = RAD_PAIR_ENTRIES + [
    {"kind": "composite",
     "combo": [{"coefficient": -1.0, "ref": 0},
               {"coefficient": -1.0, "ref": 1}],
     "perturbation": {"kind": "abs_power", "exponent": 2.0}}]


@pytest.fixture()
def vectors_file(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("# three planar vectors with zero total\n"
                    "0.6 0.0\n"
                    "-0.3, 0.4\n"
                    "-0.3 -0.4\n")
    return str(path)


def test_confine_writes_the_ordering_csv(vectors_file, tmp_path, capsys):
    out = tmp_path / "order.csv"
    assert main(["confine", vectors_file, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "step,input_position,prefix_norm"
    assert len(lines) == 4
    for line in lines[1:]:
        step, pos, norm = line.split(",")
        assert step.isdigit() and pos.isdigit()
        float(norm)  # plain repr floats, no wrapper text
    assert "max_prefix_norm=" in capsys.readouterr().err


def test_confine_anchored_variant(vectors_file, tmp_path, capsys):
    out = tmp_path / "order.csv"
    code = main(["confine", vectors_file, "--anchor", "0.0,0.0",
                 "--rho", "1.0", "--out", str(out)])
    assert code == 0
    assert out.exists()


def test_confine_rejects_unreadable_input(tmp_path, capsys):
    missing = str(tmp_path / "nope.txt")
    assert main(["confine", missing]) == 2
    assert "error:" in capsys.readouterr().err


def test_confine_rejects_garbage_rows(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0 2.0\npotato\n")
    assert main(["confine", str(bad)]) == 2
    assert "numeric" in capsys.readouterr().err


def test_rearrange_single_target_with_trace(tmp_path, capsys):
    spec = write_family_file(tmp_path / "alt.json", [[ALT_HARMONIC_ENTRY]])
    trace = tmp_path / "trace.csv"
    code = main(["rearrange", "--spec", spec, "--targets", "0.25",
                 "--eps", "1e-3", "--trace", str(trace)])
    assert code == 0
    assert "deviation=" in capsys.readouterr().out
    assert trace.read_text().startswith("step,index,term_0,sum_0")


def test_rearrange_multi_target_pair(tmp_path, capsys):
    spec = write_family_file(tmp_path / "pair.json", [RAD_PAIR_ENTRIES])
    code = main(["rearrange", "--spec", spec, "--targets", "0.2,-0.3",
                 "--eps", "0.01", "--seed", "4"])
    assert code == 0
    assert "length=" in capsys.readouterr().out


def test_rearrange_refuses_absolutely_convergent_specs(tmp_path, capsys):
    spec = write_family_file(tmp_path / "abs.json",
                             [[{"kind": "abs_power", "exponent": 2.0}]])
    code = main(["rearrange", "--spec", spec, "--targets", "0.5",
                 "--eps", "0.01"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_rearrange_budget_exhaustion_exits_three(tmp_path, capsys):
    spec = write_family_file(tmp_path / "alt.json", [[ALT_HARMONIC_ENTRY]])
    code = main(["rearrange", "--spec", spec, "--targets", "3.5",
                 "--eps", "1e-6", "--budget", "40"])
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_rearrange_same_seed_reproduces_trace_bytes(tmp_path):
    spec = write_family_file(tmp_path / "pair.json", [RAD_PAIR_ENTRIES])
    traces = []
    for name in ("one.csv", "two.csv"):
        path = tmp_path / name
        code = main(["rearrange", "--spec", spec, "--targets", "0.15,0.1",
                     "--eps", "0.005", "--seed", "21",
                     "--trace", str(path)])
        assert code == 0
        traces.append(path.read_bytes())
    assert traces[0] == traces[1]


def test_extend_run_then_verify_roundtrip(tmp_path, capsys):
    spec = write_family_file(tmp_path / "pair.json", [RAD_PAIR_ENTRIES])
    cert = tmp_path / "chain.cert"
    code = main(["extend-run", "--spec", spec, "--targets", "0.1,-0.2",
                 "--rounds", "1", "--seed", "3", "--budget", "1000000",
                 "--cert", str(cert)])
    assert code == 0
    assert "rounds=1" in capsys.readouterr().out

    assert main(["verify", "--cert", str(cert), "--spec", spec]) == 0
    assert "certificate ok" in capsys.readouterr().out

    lines = cert.read_text().splitlines(keepends=True)
    doctored = [line.replace("f=", "f=0,0,", 1)
                if line.startswith("condition 1:") else line
                for line in lines]
    cert.write_text("".join(doctored))
    assert main(["verify", "--cert", str(cert), "--spec", spec]) == 1
    assert "FAILED" in capsys.readouterr().out


def test_analyze_reports_structure(tmp_path, capsys):
    spec = write_family_file(tmp_path / "triple.json", [TRIPLE_ENTRIES])
    out = tmp_path / "report.txt"
    code = main(["analyze", "--spec", spec, "--truncation", "4096",
                 "--precision", "1e-6", "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert "series: 3" in text
    assert "kernel dimension: 1" in text
    assert "independent set: 0,1" in text
    assert "dependent 2:" in text


def test_schedule_env_overrides_the_constants(vectors_file, tmp_path, capsys,
                                              monkeypatch):
    monkeypatch.setenv("RL_CONSTANT_SCHEDULE", "9.0,9.0")
    assert main(["confine", vectors_file, "--out",
                 str(tmp_path / "o.csv")]) == 0
    assert "bound=9.0" in capsys.readouterr().err


def test_invalid_schedule_env_is_an_input_error(vectors_file, capsys,
                                                monkeypatch):
    monkeypatch.setenv("RL_CONSTANT_SCHEDULE", "fast,loose")
    assert main(["confine", vectors_file]) == 2
    assert "RL_CONSTANT_SCHEDULE" in capsys.readouterr().err


def test_module_entry_point_runs_as_a_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sumchase.cli", "confine",
         str(tmp_path / "missing.txt")],
        capture_output=True, text=True)
    assert proc.returncode == 2
    assert "error:" in proc.stderr
