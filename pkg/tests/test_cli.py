import csv
import io
import json
import subprocess
import sys

import pytest

from chatweave.cli import main
from chatweave.synthbench import GenSpec, oracle_match, write_corpus


@pytest.fixture
def corpus(tmp_path):
    specs = [GenSpec(seed=21, channel_id="alpha", streamer_id="s1", fragment_dist=(1, 1, 1, 1), noise_fraction=0.2),
             GenSpec(seed=22, channel_id="beta", streamer_id="s2", p_repeat=0.7, p_summarize=0.2)]
    streams = write_corpus(tmp_path / "in", specs)
    return tmp_path, streams


def _read(path):
    return path.read_bytes()


def test_extract_two_channels(corpus, capsys):
    root, streams = corpus
    assert main(["extract", "--input", str(root / "in"), "--out", str(root / "out")]) == 0
    summary = json.loads(capsys.readouterr().out)
    expected = sum(len(oracle_match(s)) for s, _ in streams)
    assert summary["channels"] == 2 and summary["pairs"] == expected
    assert "duration" in summary
    merged = (root / "out" / "pairs.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(merged) == expected
    per_channel = [(root / "out" / "pairs" / f"{c}.jsonl").read_text(encoding="utf-8") for c in ("alpha", "beta")]
    assert "".join(per_channel).splitlines() == merged
    on_disk = json.loads((root / "out" / "summary.json").read_text())
    assert on_disk == {k: summary[k] for k in ("channels", "pairs", "dropped")}


def test_rerun_and_worker_count_are_byte_identical(corpus):
    root, _ = corpus
    assert main(["extract", "--input", str(root / "in"), "--out", str(root / "a")]) == 0
    assert main(["extract", "--input", str(root / "in"), "--out", str(root / "b")]) == 0
    assert main(["extract", "--input", str(root / "in"), "--out", str(root / "c"), "--workers", "2"]) == 0
    for name in ("pairs.jsonl", "summary.json", "pairs/alpha.jsonl", "pairs/beta.jsonl"):
        assert _read(root / "a" / name) == _read(root / "b" / name) == _read(root / "c" / name)


def test_missing_input_exits_1_without_outputs(tmp_path, capsys):
    assert main(["extract", "--input", str(tmp_path / "nope"), "--out", str(tmp_path / "out")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "FatalError"
    assert not (tmp_path / "out").exists()
    assert list(tmp_path.iterdir()) == []


def test_bad_record_reports_location_and_leaves_nothing(corpus, capsys):
    root, _ = corpus
    with open(root / "in" / "beta.comments.jsonl", "a", encoding="utf-8") as f:
        f.write('{"channel":"beta","t":5,"text":"no user"}\n')
    assert main(["extract", "--input", str(root / "in"), "--out", str(root / "out"), "--workers", "2"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "MalformedRecordError" and err["line"] > 0
    assert err["source"].endswith("beta.comments.jsonl")
    assert not (root / "out").exists()
    assert sorted(p.name for p in root.iterdir()) == ["in"]


def test_unpaired_channel_file_is_fatal(corpus):
    root, _ = corpus
    (root / "in" / "gamma.transcript.jsonl").write_text("")
    assert main(["extract", "--input", str(root / "in"), "--out", str(root / "out")]) == 1


def test_bad_config_is_fatal(corpus, capsys):
    root, _ = corpus
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"extraction": {"tau": -1}}))
    assert main(["extract", "--input", str(root / "in"), "--out", str(root / "out"), "--config", str(cfg)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_env_override_changes_extraction(corpus, monkeypatch, capsys):
    root, _ = corpus
    main(["extract", "--input", str(root / "in"), "--out", str(root / "a")])
    base = json.loads(capsys.readouterr().out)["pairs"]
    monkeypatch.setenv("CHATWEAVE_EXTRACTION_MAX_MERGE", "1")
    main(["extract", "--input", str(root / "in"), "--out", str(root / "b")])
    assert json.loads(capsys.readouterr().out)["pairs"] < base


def test_ingest_check(corpus, capsys):
    root, streams = corpus
    assert main(["ingest-check", "--input", str(root / "in")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ok"]
    assert report["channels"]["alpha"]["comments"] == len(streams[0][0].comments)
    assert report["channels"]["beta"]["streamer"] == "s2"


def test_full_pipeline(corpus, capsys):
    root, _ = corpus
    inp, out = str(root / "in"), root / "out"
    assert main(["extract", "--input", inp, "--out", str(out)]) == 0
    n_pairs = json.loads(capsys.readouterr().out)["pairs"]

    codebook = root / "codebook.json"
    codebook.write_text(json.dumps({"gender": {"女": 1, "男": 2}}, ensure_ascii=False), encoding="utf-8")
    basic = root / "basic.jsonl"
    basic.write_text('{"streamer":"s1","attributes":{"gender":"女"}}\n', encoding="utf-8")
    assert main(["persona", "--input", inp, "--out", str(out), "--basic", str(basic), "--codebook", str(codebook)]) == 0
    profiles = [json.loads(l) for l in (out / "profiles.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [p["streamer"] for p in profiles] == ["s1", "s2"]
    assert profiles[0]["attributes"] == {"gender": 1}
    assert all(sum(map(len, p["sentences"])) <= 512 for p in profiles)
    assert json.loads(capsys.readouterr().out) == {"streamers": 2}

    assert main(["taskgen", "--input", inp, "--pairs", str(out / "pairs.jsonl"), "--profiles",
                 str(out / "profiles.jsonl"), "--out", str(out), "--shuffle", "--seed", "4"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["responses"] == n_pairs and result["train"] + result["test"] == n_pairs
    sessions = [json.loads(l) for l in (out / "addressee_task.jsonl").read_text(encoding="utf-8").splitlines()]
    assert len(sessions) == result["sessions"] > 0
    assert all(len(s["candidates"]) == 10 and s["shuffled"] for s in sessions)
    assert json.loads((out / "taskgen.json").read_text())["shuffled"] is True
    train = {json.loads(l)["streamer"] for l in (out / "response_train.jsonl").read_text(encoding="utf-8").splitlines()}
    test = {json.loads(l)["streamer"] for l in (out / "response_test.jsonl").read_text(encoding="utf-8").splitlines()}
    assert test <= train

    assert main(["stats", "--pairs", str(out / "pairs.jsonl"), "--input", inp, "--out", str(out)]) == 0
    stats = json.loads((out / "stats.json").read_text())
    assert stats["dialogues"] == n_pairs and stats["streamer_count"] == 2


def test_taskgen_rejects_unknown_channel(corpus, tmp_path):
    root, _ = corpus
    pairs = root / "pairs.jsonl"
    pairs.write_text('{"channel":"zzz","streamer":"s","comment":{"user":"u","t":0,"text":"x"},"comment_index":0,'
                     '"response":"y。","response_t":5,"merged_seqs":[0],"raw_response":"xy。"}\n', encoding="utf-8")
    assert main(["taskgen", "--input", str(root / "in"), "--pairs", str(pairs), "--out", str(root / "t")]) == 1


def _spec(path, rows):
    path.write_text(json.dumps({"rows": rows}))
    return str(path)


def test_bench_pass_and_threshold_failure(tmp_path, capsys):
    ok = _spec(tmp_path / "ok.json", [{"name": "clean", "n_streams": 3, "gen": {"seed": 1},
                                       "min_precision": 1.0, "min_recall": 1.0}])
    assert main(["bench", "--spec", ok, "--out", str(tmp_path / "b1")]) == 0
    table = capsys.readouterr().out
    assert (tmp_path / "b1" / "sweep.csv").read_text() == table
    assert list(csv.DictReader(io.StringIO(table)))[0]["passed"] == "1"

    bad = _spec(tmp_path / "bad.json", [{"name": "clean", "n_streams": 3, "gen": {"seed": 1}, "min_precision": 1.01}])
    assert main(["bench", "--spec", bad]) == 2


def test_bench_is_reproducible(tmp_path, capsys):
    spec = _spec(tmp_path / "s.json", [{"name": "f", "n_streams": 4, "gen": {"seed": 7, "fragment_dist": [1, 1, 1, 1]}}])
    main(["bench", "--spec", spec])
    first = capsys.readouterr().out
    main(["bench", "--spec", spec])
    assert capsys.readouterr().out == first


@pytest.mark.parametrize("doc", ['{"rows": []}', '{"rows": [{"name": "x", "gen": {"sed": 1}}]}', "nope"])
def test_bench_spec_errors(tmp_path, doc):
    path = tmp_path / "spec.json"
    path.write_text(doc)
    assert main(["bench", "--spec", str(path)]) == 1


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "chatweave.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("ingest-check", "extract", "persona", "taskgen", "stats", "bench"):
        assert cmd in out.stdout
