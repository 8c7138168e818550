"""The command line front door, driven through main() with temp files.

Oracles here are the library runners the commands wrap; most tests
check the contract instead: exit codes, record shape, determinism of
the emitted bytes, and that corruption surfaces as a witnessed
mismatch rather than a crash.
"""

import json

import pytest

from exactrnn.augmented import ann_from_tma, enn_from_tma
from exactrnn.cli import main
from exactrnn.machines import tm_run
from exactrnn.words import words_of_length
from exactrnn.zoo import (advice_eater_tma, dyck_oracle, dyck_sm,
                          eater_stream, majority3_snn, parity_tm,
                          two_thirds_stream)


# ---------------------------------------------------------------- helpers

def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def write_corpus(path, words):
    lines = [(w if w else "-") for w in words]
    path.write_text("".join(line + "\n" for line in lines))
    return str(path)


def records_of(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def run_to_records(tmp_path, argv, name="records.jsonl"):
    out = tmp_path / name
    rc = main(argv + ["--out", str(out)])
    return rc, records_of(out)


@pytest.fixture
def parity_files(tmp_path):
    mp = write_json(tmp_path / "parity.tm", parity_tm().to_json())
    np = tmp_path / "parity.rnn"
    assert main(["compile", mp, "--out", str(np)]) == 0
    return mp, str(np)


# ---------------------------------------------------------------- compile

def test_compile_writes_network_and_is_idempotent(tmp_path, capsys):
    mp = write_json(tmp_path / "dyck.sm", dyck_sm().to_json())
    out = tmp_path / "dyck.rnn"
    assert main(["compile", mp, "--out", str(out)]) == 0
    first = out.read_bytes()
    lines = [json.loads(s) for s in capsys.readouterr().out.splitlines()]
    assert lines[0]["command"] == "compile"
    assert lines[1]["cells"] == json.loads(first)["cfg"]["k"]

    assert main(["compile", mp, "--out", str(out)]) == 0
    assert out.read_bytes() == first

    d = json.loads(first)
    assert set(d) == {"cfg", "layout", "constants", "machine"}


def test_compile_rejects_bad_input(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    out = str(tmp_path / "x.rnn")
    assert main(["compile", str(broken), "--out", out]) == 2

    ptm = write_json(tmp_path / "coin.json", {"type": "coin-match"})
    assert main(["compile", ptm, "--out", out]) == 2

    missing = str(tmp_path / "nowhere.json")
    assert main(["compile", missing, "--out", out]) == 2


# ---------------------------------------------------------------- verify

def test_verify_parity_exhaustive(tmp_path, parity_files):
    mp, np = parity_files
    words = [w for n in range(6) for w in words_of_length(n)]
    cp = write_corpus(tmp_path / "corpus.txt", words)
    rc, recs = run_to_records(tmp_path, ["verify", mp, np, "--corpus", cp])
    assert rc == 0
    word_lines = [r for r in recs if r["record"] == "word"]
    assert len(word_lines) == len(words)
    assert all(r["agree"] for r in word_lines)
    m = parity_tm()
    for r in word_lines:
        assert r["machine"] == tm_run(m, r["word"], 10 ** 4).kind
    # canonical ordering: by length, then lexicographic
    keys = [(len(r["word"]), r["word"]) for r in word_lines]
    assert keys == sorted(keys)
    assert recs[-1]["verdict"] == "pass"


def test_verify_corrupted_weight_names_witness(tmp_path, parity_files):
    mp, np = parity_files
    d = json.loads(open(np).read())
    # scaling a weight up is absorbed by saturation; pushing a binary
    # signal into the open interval is not
    i, j, _w = d["cfg"]["w_res"][7]
    d["cfg"]["w_res"][7] = [i, j, "1/3"]
    bad = write_json(tmp_path / "bad.rnn", d)
    cp = write_corpus(tmp_path / "corpus.txt", ["", "0", "1", "01", "11"])
    rc, recs = run_to_records(tmp_path, ["verify", mp, bad, "--corpus", cp])
    assert rc == 1
    agg = recs[-1]
    assert agg["verdict"] == "fail" and agg["mismatches"] >= 1
    assert any(r["record"] == "word" and r["word"] == agg["witness"]
               and not r["agree"] for r in recs)


def test_verify_empty_corpus_warns_and_passes(tmp_path, parity_files, capsys):
    mp, np = parity_files
    cp = tmp_path / "empty.txt"
    cp.write_text("# nothing here\n\n")
    rc, recs = run_to_records(tmp_path, ["verify", mp, np,
                                         "--corpus", str(cp)])
    assert rc == 0
    assert recs[-1] == {"record": "aggregate", "command": "verify",
                        "words": 0, "mismatches": 0, "witness": None,
                        "verdict": "pass"}
    assert "empty corpus" in capsys.readouterr().err


def test_verify_rejects_bad_flags_and_corpora(tmp_path, parity_files):
    mp, np = parity_files
    cp = write_corpus(tmp_path / "c.txt", ["0110"])
    assert main(["verify", mp, np, "--corpus", cp, "--max-steps", "2"]) == 2

    bad = tmp_path / "bad.txt"
    bad.write_text("01a\n")
    assert main(["verify", mp, np, "--corpus", str(bad)]) == 2

    sp = write_json(tmp_path / "snn.json",
                    majority3_snn(two_thirds_stream()).to_json())
    assert main(["verify", mp, sp, "--corpus", cp]) == 2


def test_verify_records_rerun_byte_identical(tmp_path, parity_files):
    mp, np = parity_files
    cp = write_corpus(tmp_path / "c.txt", ["", "1", "10", "0110"])
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["verify", mp, np, "--corpus", cp, "--out", str(a)]) == 0
    assert main(["verify", mp, np, "--corpus", cp, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes()  # not vacuous


def test_verify_analog_pair_and_precision_budget(tmp_path):
    m = advice_eater_tma()
    r = eater_stream(8)
    mp = write_json(tmp_path / "eater.tma", m.to_json())
    ap = write_json(tmp_path / "eater.ann", ann_from_tma(m, r).to_json())
    cp = write_corpus(tmp_path / "c.txt", ["", "0", "1", "01", "110"])
    base = ["verify", mp, ap, "--corpus", cp, "--max-steps", "500"]
    rc, recs = run_to_records(tmp_path, base)
    assert rc == 0 and recs[-1]["verdict"] == "pass"

    rc, recs = run_to_records(tmp_path, base + ["--precision-bits", "2"])
    assert rc == 1
    assert any(r.get("network") == "error:PrecisionExhausted" for r in recs)


def test_verify_evolving_pair(tmp_path):
    m = advice_eater_tma()
    ep = write_json(tmp_path / "eater.enn",
                    enn_from_tma(m, eater_stream(8)).to_json())
    mp = write_json(tmp_path / "eater.tma", m.to_json())
    cp = write_corpus(tmp_path / "c.txt", ["", "1", "01"])
    rc, recs = run_to_records(
        tmp_path, ["verify", mp, ep, "--corpus", cp, "--max-steps", "5000"])
    assert rc == 0 and recs[-1]["mismatches"] == 0


# ------------------------------------------------------- stochastic suite

@pytest.fixture
def suite_files(tmp_path):
    sp = write_json(tmp_path / "maj3.snn",
                    majority3_snn(two_thirds_stream()).to_json())
    pp = write_json(tmp_path / "coin.json", {"type": "coin-match"})
    return sp, pp


def test_stochastic_suite_budgets_and_determinism(tmp_path, suite_files):
    sp, pp = suite_files
    argv = ["stochastic-suite", sp, pp, "--trials", "120", "--seed", "11"]
    rc, recs = run_to_records(tmp_path, argv, "a.jsonl")
    assert rc == 0
    ms = {r["check"]: r for r in recs if r["record"] == "measurement"}
    assert set(ms) == {"coin-divergence", "advice-estimate-failure",
                       "fair-bit-exhaustion"}
    assert [ms[k]["budget"] for k in ("coin-divergence",
                                      "advice-estimate-failure",
                                      "fair-bit-exhaustion")] \
        == [0.2, 0.1, 0.0625]
    for r in ms.values():
        assert r["within"] and 0 <= r["rate"] <= r["tolerance"]
        assert r["trials"] == 120

    rc2, _ = run_to_records(tmp_path, argv, "b.jsonl")
    assert rc2 == 0
    assert (tmp_path / "a.jsonl").read_bytes() \
        == (tmp_path / "b.jsonl").read_bytes()

    rc3, recs3 = run_to_records(tmp_path,
                                argv[:-1] + ["12"], "c.jsonl")
    assert rc3 == 0
    assert recs3 != recs  # the seed actually reaches the sampling


def test_stochastic_suite_usage_errors(tmp_path, suite_files):
    sp, pp = suite_files
    assert main(["stochastic-suite", sp, pp, "--trials", "0"]) == 2
    assert main(["stochastic-suite", pp, pp, "--trials", "5"]) == 2
    bad = write_json(tmp_path / "bad.json", {"type": "tm"})
    assert main(["stochastic-suite", sp, bad, "--trials", "5"]) == 2


def test_stochastic_suite_accepts_fixed_ptm(tmp_path, suite_files):
    sp, _ = suite_files
    fixed = {"type": "ptm", "initial": "go",
             "trans0": [["go", "_", "_", "S", "accept"]],
             "trans1": [["go", "_", "_", "S", "reject"]]}
    pp = write_json(tmp_path / "fixed.ptm", fixed)
    rc, recs = run_to_records(
        tmp_path, ["stochastic-suite", sp, pp, "--trials", "40"])
    assert rc == 0 and recs[-1]["verdict"] == "pass"


# ------------------------------------------------------------ diagonalize

def test_diagonalize_singleton_empty_family(tmp_path, capsys):
    fp = tmp_path / "family.txt"
    fp.write_text("-\n")
    out = tmp_path / "slice.txt"
    assert main(["diagonalize", str(fp), "2", "1", "--out", str(out)]) == 0
    assert out.read_text() == "00\n"
    recs = [json.loads(s) for s in capsys.readouterr().out.splitlines()]
    assert recs[-1]["escapes"] is True


def test_diagonalize_precondition_exit(tmp_path, capsys):
    fp = tmp_path / "family.txt"
    fp.write_text("-\n")
    out = tmp_path / "slice.txt"
    # budget too deep for the length: f_n + 1 halvings need 2^n words
    assert main(["diagonalize", str(fp), "1", "2", "--out", str(out)]) == 2
    assert not out.exists()
    assert "error:" in capsys.readouterr().err

    fp.write_text("000\n")  # member length disagrees with n
    assert main(["diagonalize", str(fp), "2", "1", "--out", str(out)]) == 2


def test_diagonalize_escapes_a_real_family(tmp_path):
    fp = tmp_path / "family.txt"
    fp.write_text("000,001\n010\n-\n011,100,101\n")
    out = tmp_path / "slice.txt"
    assert main(["diagonalize", str(fp), "3", "2", "--out", str(out)]) == 0
    line = out.read_text().strip()
    produced = frozenset() if line == "-" else frozenset(line.split(","))
    family = [frozenset(), {"000", "001"}, {"010"}, {"011", "100", "101"}]
    assert all(produced != frozenset(m) for m in family)


# ------------------------------------------------------------- kolmogorov

def test_kolmogorov_roundtrip_modes(tmp_path):
    for g in ("log2", "sqrt"):
        rc, recs = run_to_records(
            tmp_path,
            ["kolmogorov", "--mode", "roundtrip", "--g", g,
             "--n-max", "40", "--trials", "25", "--seed", "5"],
            f"rt-{g}.jsonl")
        assert rc == 0
        agg = recs[-1]
        assert agg["failures"] == 0 and agg["checked"] == 25 * 41

    assert main(["kolmogorov", "--trials", "0"]) == 2


def test_kolmogorov_kfg_mode(tmp_path):
    rc, recs = run_to_records(
        tmp_path,
        ["kolmogorov", "--mode", "kfg", "--g", "log2", "--n-max", "48",
         "--seed", "9"])
    assert rc == 0
    assert recs[-1]["ok"] is True and recs[-1]["checks"] > 0
    assert any(r["record"] == "kfg" and "clean-from" in r["line"]
               for r in recs)


def test_kolmogorov_rerun_byte_identical(tmp_path):
    argv = ["kolmogorov", "--mode", "roundtrip", "--n-max", "24",
            "--trials", "10", "--seed", "21"]
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


# ------------------------------------------------------------------ shell

def test_bad_invocations_exit_2(capsys):
    assert main([]) == 2
    assert main(["no-such-command"]) == 2
    capsys.readouterr()


def test_records_are_line_json_with_sorted_keys(tmp_path, parity_files):
    mp, np = parity_files
    cp = write_corpus(tmp_path / "c.txt", ["", "0", "11"])
    out = tmp_path / "r.jsonl"
    assert main(["verify", mp, np, "--corpus", cp, "--out", str(out)]) == 0
    for line in out.read_text().splitlines():
        obj = json.loads(line)
        assert list(obj) == sorted(obj)
        assert json.dumps(obj, sort_keys=True,
                          separators=(",", ":")) == line
