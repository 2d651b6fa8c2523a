import subprocess
import sys
from pathlib import Path

import pytest

from abcde_lab.cli import ENV_LIMITS, RunConfig, UsageError, main

MODELS = Path(__file__).resolve().parent.parent / "models"
YLOOP = str(MODELS / "yloop.abc")
BREAKFAST = str(MODELS / "breakfast.abc")
BROADCAST = str(MODELS / "broadcast.abc")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_epbisim_yloop_is_inequivalent(capsys):
    code, out, _ = run(capsys, "epbisim", YLOOP, "L", "Yl | x.0")
    assert code == 1
    assert out.startswith("verdict: inequivalent")
    assert "prune L || Yl | x.0" in out


def test_epbisim_equivalent_with_witness(capsys):
    code, out, _ = run(capsys, "epbisim", YLOOP, "Yl | x.0", "x.0 | Yl", "--witness")
    assert code == 0
    assert "verdict: equivalent" in out and "witness " in out


def test_bisim_yloop_is_equivalent(capsys):
    code, out, _ = run(capsys, "bisim", YLOOP, "L", "Yl | x.0")
    assert code == 0 and "equivalent" in out


def test_just_breakfast(capsys):
    code, out, _ = run(capsys, "just", BREAKFAST, "A", "--cycle", "jam")
    assert code == 0 and out.strip() == "verdict: just"


def test_just_yloop_structured(capsys):
    code, out, _ = run(capsys, "just", YLOOP, "Yl | x.0", "--cycle", "y", "--format", "structured")
    assert code == 1
    assert out.splitlines()[0] == 'verdict label=x position=0 transition="Yl | <x->0>" value=unjust'


def test_just_blocking(capsys):
    code, _, _ = run(capsys, "just", YLOOP, "Yl | x.0", "--cycle", "y", "--blocking", "x")
    assert code == 0


def test_just_bad_step_is_usage_error(capsys):
    code, _, err = run(capsys, "just", YLOOP, "Yl | x.0", "--cycle", "x")
    assert code == 64 and "does not return" in err
    code, _, err = run(capsys, "just", YLOOP, "Yl | x.0", "--cycle", "z")
    assert code == 64 and "not enabled" in err


def test_check_reports_guardedness(capsys, tmp_path):
    code, out, _ = run(capsys, "check", YLOOP)
    assert code == 0 and "guarded: true" in out
    bad = tmp_path / "bad.abc"
    bad.write_text("handshake a; A := A + a.0;")
    code, out, _ = run(capsys, "check", str(bad))
    assert code == 1 and "unguarded" in out


def test_parse_error_exit(capsys, tmp_path):
    bad = tmp_path / "bad.abc"
    bad.write_text("P := q.0;")
    code, _, err = run(capsys, "check", str(bad))
    assert code == 65 and "unknown identifier" in err


def test_unguarded_term_is_rejected(capsys, tmp_path):
    bad = tmp_path / "bad.abc"
    bad.write_text("handshake a; A := A + a.0;")
    code, _, _ = run(capsys, "en", str(bad), "A")
    assert code == 65


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 64
    with pytest.raises(SystemExit) as info:
        main(["lts", YLOOP])
    assert info.value.code == 64
    code, _, _ = run(capsys, "check", "/nonexistent/file.abc")
    assert code == 64


def test_resource_exit(capsys, tmp_path):
    grow = tmp_path / "grow.abc"
    grow.write_text("handshake a; C := a.(C | C);")
    code, _, err = run(capsys, "lts", str(grow), "C", "--limit", "20")
    assert code == 2 and "state limit" in err


def test_lts_dumps(capsys):
    code, out, _ = run(capsys, "lts", YLOOP, "Yl | x.0")
    assert code == 0 and "states 2" in out and "successor-triples" in out
    code, out, _ = run(capsys, "lts", YLOOP, "Yl | x.0", "--dot")
    assert out.startswith("digraph ltss {")


def test_en_succ_conc(capsys):
    code, out, _ = run(capsys, "en", BROADCAST, "P")
    assert code == 0 and len(out.splitlines()) == 5
    code, out, _ = run(capsys, "succ", YLOOP, "Yl | x.0", "--format", "structured")
    assert 'succ t="Yl | <x->0>" u="Yl:<y->Yl> | x.0" v="Yl | <x->0>"' in out
    code, out, _ = run(capsys, "conc", YLOOP, "L", "--format", "structured")
    assert code == 0 and out.count("value=false") == 4 and "value=true" not in out
    code, out, _ = run(capsys, "conc", YLOOP, "L")
    assert out.splitlines()[2] == "    t0  t1"


def test_oracle_file_and_corpus(capsys):
    code, out, _ = run(capsys, "oracle", BROADCAST)
    assert code == 0 and out.count("PASS") == 3
    code, out, _ = run(capsys, "oracle", "--corpus", "5", "--seed", "7")
    assert code == 0
    with pytest.raises(SystemExit):
        main(["oracle", "--corpus", "0"])


def test_deterministic_output(capsys):
    first = run(capsys, "oracle", "--corpus", "4", "--seed", "3")
    second = run(capsys, "oracle", "--corpus", "4", "--seed", "3")
    assert first == second


def test_env_limits(capsys, monkeypatch):
    monkeypatch.setenv(ENV_LIMITS, "state_limit=1")
    code, _, _ = run(capsys, "lts", YLOOP, "Yl | x.0")
    assert code == 2
    monkeypatch.setenv(ENV_LIMITS, "bogus=3")
    code, _, err = run(capsys, "lts", YLOOP, "Yl | x.0")
    assert code == 64 and ENV_LIMITS in err


def test_run_config_validation():
    assert RunConfig().state_limit == 10_000
    with pytest.raises(UsageError):
        RunConfig(state_limit=0)
    assert RunConfig.from_env("max_relations_per_pair=5") == {"max_relations_per_pair": 5}


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "abcde_lab.cli", "bisim", YLOOP, "L", "Yl | x.0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "equivalent" in proc.stdout
