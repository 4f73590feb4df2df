import json
import subprocess
import sys

import pytest

from steerex import assets
from steerex.cli import EXIT_GENERATION, EXIT_GRAMMAR, EXIT_MISMATCH, EXIT_OK, main
from steerex.record import load_record, strip_timing


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def table(tmp_path, capsys):
    path = tmp_path / "table.json"
    assert run(capsys, "make-table", "--vocab", "builtin:mixed500", "--seed", "1",
               "--scale", "5", "--eos-bias", "9", "--out", str(path))[0] == EXIT_OK
    return path


def generate(capsys, tmp_path, name, *extra, pattern="builtin:email"):
    out = tmp_path / name
    code, stdout, err = run(capsys, "generate", "--pattern", pattern, "--vocab", "builtin:mixed500",
                            "--out", str(out), *extra)
    return code, out, stdout, err


def test_compile_abac(capsys):
    code, out, _ = run(capsys, "compile", "--regex", "ab|ac", "--json")
    stats = json.loads(out)
    assert code == EXIT_OK
    assert stats["states"] == 4 and stats["dead"] == 1
    assert stats["symbol_transitions"]["live_to_live"] == 3


def test_compile_builtin_text_and_export(capsys, tmp_path):
    path = tmp_path / "dfa.json"
    code, out, _ = run(capsys, "compile", "--pattern", "builtin:bomb", "--export", str(path))
    assert code == EXIT_OK
    assert out.startswith("states            6 (5 live, 1 dead)")
    assert json.loads(path.read_text())["states"] == 6


def test_compile_pattern_file(capsys, tmp_path):
    path = tmp_path / "p.regex"
    path.write_text("ab|ac\n")
    code, out, _ = run(capsys, "compile", "--pattern", str(path), "--json")
    assert json.loads(out)["states"] == 4


@pytest.mark.parametrize("pattern, needle", [("(", "unterminated"), ("a(?=b)", "lookahead")])
def test_compile_errors_exit_2_with_caret(capsys, pattern, needle):
    code, _, err = run(capsys, "compile", "--regex", pattern)
    assert code == EXIT_GRAMMAR
    assert needle in err
    assert "^" in err.splitlines()[-1]


def test_missing_pattern_and_files(capsys, tmp_path):
    assert run(capsys, "compile")[0] == EXIT_MISMATCH
    assert run(capsys, "compile", "--pattern", str(tmp_path / "nope"))[0] == EXIT_MISMATCH


def test_generate_and_evaluate(capsys, tmp_path, table):
    code, out, stdout, _ = generate(capsys, tmp_path, "r.jsonl", "--n", "40", "--source", f"table:{table}")
    assert code == EXIT_OK
    assert stdout.startswith("samples 40")
    rec = load_record(out)
    assert len(rec.samples) == 40
    assert rec.config["pattern_hash"] and rec.config["vocab_hash"]
    code, report, _ = run(capsys, "evaluate", str(out), "--pattern", "builtin:email")
    assert code == EXIT_OK
    doc = json.loads(report)
    assert 0 < doc["state_cov"] <= 1 and doc["valid_fraction"] > 0
    code, csv_text, _ = run(capsys, "evaluate", str(out), "--pattern", "builtin:email", "--csv")
    assert csv_text.splitlines()[0].startswith("label,state_cov")


def test_evaluate_pattern_mismatch(capsys, tmp_path):
    _, out, _, _ = generate(capsys, tmp_path, "r.jsonl", "--n", "5")
    code, _, err = run(capsys, "evaluate", str(out), "--pattern", "builtin:bomb")
    assert code == EXIT_MISMATCH
    assert "different pattern" in err


def test_evaluate_empty_record(capsys, tmp_path):
    _, out, _, _ = generate(capsys, tmp_path, "r.jsonl", "--n", "3")
    header = out.read_text().splitlines()[0]
    out.write_text(header + "\n")
    code, report, err = run(capsys, "evaluate", str(out), "--pattern", "builtin:email")
    assert code == EXIT_OK
    assert json.loads(report)["state_cov"] == 0.0
    assert "no samples" in err


def test_generate_n1_is_deterministic(capsys, tmp_path):
    a = generate(capsys, tmp_path, "a.jsonl", "--n", "1", "--seed", "7")[1]
    b = generate(capsys, tmp_path, "b.jsonl", "--n", "1", "--seed", "7")[1]
    assert [strip_timing(x) for x in a.read_text().splitlines()] == [strip_timing(x) for x in b.read_text().splitlines()]


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 4, "mode": "baseline", "max-tokens": 9, "seed": 2}))
    _, out, _, _ = generate(capsys, tmp_path, "r.jsonl", "--config", str(cfg), "--seed", "5")
    rec = load_record(out)
    assert len(rec.samples) == 4
    assert rec.config["mode"] == "baseline" and rec.config["max_tokens"] == 9
    assert rec.config["seed"] == 5
    cfg.write_text(json.dumps({"bogus": 1}))
    assert generate(capsys, tmp_path, "x.jsonl", "--config", str(cfg))[0] == EXIT_MISMATCH


def test_ablation_flags_reach_the_record(capsys, tmp_path):
    _, out, _, _ = generate(capsys, tmp_path, "r.jsonl", "--n", "2", "--no-penalty", "--no-range")
    cfg = load_record(out).config
    assert cfg["use_reward"] is True and cfg["use_penalty"] is False and cfg["use_range"] is False


def test_generate_source_problems(capsys, tmp_path):
    small = tmp_path / "small.json"
    run(capsys, "make-table", "--vocab", "builtin:char40", "--out", str(small))
    assert generate(capsys, tmp_path, "r.jsonl", "--n", "2", "--source", f"table:{small}")[0] == EXIT_MISMATCH
    assert generate(capsys, tmp_path, "r.jsonl", "--n", "2", "--source", "nonsense")[0] == EXIT_MISMATCH
    code, _, _, err = generate(capsys, tmp_path, "r.jsonl", "--n", "2", "--source", "remote:http://127.0.0.1:9",
                               "--timeout", "0.2", "--retries", "0")
    assert code == EXIT_GENERATION
    assert "startup" in err


def test_generate_bad_grammar(capsys, tmp_path):
    code, _, _, _ = generate(capsys, tmp_path, "r.jsonl", pattern=str(tmp_path / "missing"))
    assert code == EXIT_MISMATCH
    out = tmp_path / "r.jsonl"
    code, _, err = run(capsys, "generate", "--regex", "a{2,1}", "--vocab", "builtin:char40", "--out", str(out))
    assert code == EXIT_GRAMMAR


def test_export_counter(capsys, tmp_path):
    counter = tmp_path / "c.json"
    _, out, _, _ = generate(capsys, tmp_path, "r.jsonl", "--n", "20", "--export-counter", str(counter))
    doc = json.loads(counter.read_text())
    valid = sum(s.valid for s in load_record(out).samples)
    total = sum(c for _, _, c in doc["pairs"])
    assert valid == 0 or total > 0


JSON_LIKE = '\\{"[a-z]+": ?([0-9]+|"[a-z]*"|true|false)\\}'


def test_compare(capsys, tmp_path, table):
    # a small object grammar; the bundled one is out of reach for a random table
    pattern = tmp_path / "obj.regex"
    pattern.write_text(JSON_LIKE)
    src = f"table:{table}"
    a = generate(capsys, tmp_path, "base.jsonl", "--n", "300", "--mode", "baseline", "--source", src,
                 "--max-tokens", "40", pattern=str(pattern))[1]
    b = generate(capsys, tmp_path, "div.jsonl", "--n", "300", "--mode", "diverse", "--source", src,
                 "--max-tokens", "40", pattern=str(pattern))[1]
    code, out, _ = run(capsys, "compare", str(a), str(b), "--pattern", str(pattern), "--csv")
    assert code == EXIT_OK
    rows = [line.split(",") for line in out.splitlines()]
    base, div = rows[1], rows[2]
    for col in (1, 2, 3):  # state, trans, path coverage
        assert float(div[col]) > float(base[col])
    code, out, _ = run(capsys, "compare", str(a), str(a), "--pattern", str(pattern))
    assert "100.00%" in out.splitlines()[-1]


def test_compare_different_grammars(capsys, tmp_path):
    a = generate(capsys, tmp_path, "a.jsonl", "--n", "3")[1]
    b = generate(capsys, tmp_path, "b.jsonl", "--n", "3", pattern="builtin:bomb")[1]
    assert run(capsys, "compare", str(a), str(b), "--pattern", "builtin:email")[0] == EXIT_MISMATCH


def test_assets(capsys):
    code, out, _ = run(capsys, "assets")
    assert code == EXIT_OK
    assert "builtin:email" in out and "builtin:mixed500" in out
    assert run(capsys, "assets", "bomb")[1].strip() == assets.grammar("bomb")
    assert run(capsys, "assets", "nope")[0] == EXIT_MISMATCH


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "steerex", "compile", "--regex", "ab|ac", "--json"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["states"] == 4
