"""Command-line entry point: ingest-check, extract, persona, taskgen, stats, bench.

Input directories hold one pair of files per channel,
``<channel>.transcript.jsonl`` and ``<channel>.comments.jsonl``, and
optionally ``streamers.json`` mapping channel ids to streamer ids (a channel
missing from it is its own streamer). Exit codes: 0 success, 1 fatal error,
2 benchmark threshold failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
import time
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from ._http import TransportError
from .config import PipelineConfig, load_config
from .ingest import IngestError, load_channel_stream
from .matcher import extract_with_counts
from .model import ConfigError, MatchedPair, validate_stream
from .persona import (BasicProfile, anonymize_basic_profile, build_text_profile, load_codebook,
                      sentences_from_segments)
from .similarity import EmbeddingClient, EmbeddingScorer
from .synthbench import BenchRow, run_row, sweep_table
from .taskgen import build_addressee_sessions, build_response_task, dataset_stats, split_by_persona

logger = logging.getLogger("chatweave")

EXIT_OK, EXIT_FATAL, EXIT_THRESHOLD = 0, 1, 2
TRANSCRIPT_SUFFIX = ".transcript.jsonl"
COMMENTS_SUFFIX = ".comments.jsonl"


class FatalError(Exception):
    """Anything that should end the run with exit code 1."""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


# --- input discovery -----------------------------------------------------------

def discover_channels(input_dir: str | os.PathLike) -> list[tuple[str, Path, Path]]:
    root = Path(input_dir)
    if not root.is_dir():
        raise FatalError(f"input directory {root} does not exist")
    transcripts = {p.name[:-len(TRANSCRIPT_SUFFIX)] for p in root.glob("*" + TRANSCRIPT_SUFFIX)}
    comments = {p.name[:-len(COMMENTS_SUFFIX)] for p in root.glob("*" + COMMENTS_SUFFIX)}
    lonely = transcripts ^ comments
    if lonely:
        raise FatalError(f"channels without both a transcript and a comment file: {sorted(lonely)}")
    if not transcripts:
        raise FatalError(f"no channel files in {root}")
    return [(cid, root / (cid + TRANSCRIPT_SUFFIX), root / (cid + COMMENTS_SUFFIX))
            for cid in sorted(transcripts)]


def load_streamer_map(input_dir) -> dict[str, str]:
    path = Path(input_dir) / "streamers.json"
    if not path.exists():
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            return {str(k): str(v) for k, v in json.load(f).items()}
    except (OSError, ValueError, AttributeError) as exc:
        raise FatalError(f"bad streamer map {path}: {exc}") from exc


def _load(job, config: PipelineConfig):
    cid, tpath, cpath, sid = job
    return load_channel_stream(tpath, cpath, config.extraction, streamer_id=sid, channel_id=cid)


def _jobs(config: PipelineConfig):
    smap = load_streamer_map(config.input_dir)
    return [(cid, t, c, smap.get(cid)) for cid, t, c in discover_channels(config.input_dir)]


def _dump(record) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n"


def _run_pool(fn, jobs, config: PipelineConfig):
    """Apply ``fn(job, config)`` to every job, results in job order."""
    if config.workers == 1 or len(jobs) < 2:
        return [fn(j, config) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(config.workers, len(jobs))) as ex:
        return list(ex.map(fn, jobs, [config] * len(jobs)))


class _Staging:
    """Write outputs into a scratch directory next to ``out`` and move them into
    place only on success, so a failed run leaves no partial files."""

    def __init__(self, out: str | os.PathLike):
        self.out = Path(out)
        self.out.parent.mkdir(parents=True, exist_ok=True)

    def __enter__(self) -> Path:
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.out.name}.", dir=self.out.parent))
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.out.mkdir(parents=True, exist_ok=True)
            for src in sorted(self.tmp.rglob("*")):
                dest = self.out / src.relative_to(self.tmp)
                if src.is_dir():
                    dest.mkdir(exist_ok=True)
                else:
                    os.replace(src, dest)
        shutil.rmtree(self.tmp, ignore_errors=True)
        return False


def _require_out(config: PipelineConfig) -> str:
    if not config.out_dir:
        raise FatalError("--out is required")
    return config.out_dir


# --- subcommands -----------------------------------------------------------------

def run_ingest_check(config: PipelineConfig) -> dict:
    report = {}
    for job in _jobs(config):
        stream = _load(job, config)
        report[job[0]] = {
            "streamer": stream.streamer_id,
            "utterances": len(stream.utterances),
            "comments": len(stream.comments),
            "violations": [str(v) for v in validate_stream(stream)],
        }
    return {"channels": report, "ok": not any(r["violations"] for r in report.values())}


def _extract_channel(job, config: PipelineConfig):
    stream = _load(job, config)
    semantic = None
    if config.embedding_endpoint:
        semantic = EmbeddingScorer(EmbeddingClient(config.embedding_endpoint))
    pairs, dropped = extract_with_counts(stream, config.extraction, semantic)
    return job[0], "".join(_dump(p.to_dict()) for p in pairs), len(pairs), dropped


def run_extract(config: PipelineConfig) -> dict:
    """Extract pairs for every channel; returns the summary plus wall time in seconds."""
    t0 = time.perf_counter()
    out = _require_out(config)
    jobs = _jobs(config)
    results = _run_pool(_extract_channel, jobs, config)
    summary = {
        "channels": len(results),
        "pairs": sum(r[2] for r in results),
        "dropped": sum(r[3] for r in results),
    }
    with _Staging(out) as tmp:
        (tmp / "pairs").mkdir()
        with open(tmp / "pairs.jsonl", "w", encoding="utf-8") as merged:
            for cid, text, _, _ in results:
                (tmp / "pairs" / f"{cid}.jsonl").write_text(text, encoding="utf-8")
                merged.write(text)
        # wall time stays out of the file so reruns are byte-identical
        (tmp / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return {**summary, "duration": round(time.perf_counter() - t0, 3)}


def _profile_channel(job, config: PipelineConfig):
    stream = _load(job, config)
    history = sentences_from_segments((u.text for u in stream.utterances), config.extraction.ending_punct)
    return stream.streamer_id, history


def run_persona(config: PipelineConfig, basic_path=None, codebook_path=None) -> dict:
    out = _require_out(config)
    histories: dict[str, list[str]] = defaultdict(list)
    # channels are processed in id order, so a streamer's history stays in channel order
    for sid, history in _run_pool(_profile_channel, _jobs(config), config):
        histories[sid].extend(history)

    basic: dict[str, BasicProfile] = {}
    if basic_path is not None:
        if codebook_path is None:
            raise FatalError("--basic needs --codebook")
        codebook = load_codebook(codebook_path)
        for rec in _read_jsonl(basic_path):
            sid = str(rec["streamer"])
            basic[sid] = anonymize_basic_profile(rec.get("attributes", {}), codebook, sid)

    lines = []
    for sid in sorted(set(histories) | set(basic)):
        text = build_text_profile(histories.get(sid, []), config.persona, streamer_id=sid)
        attrs = basic[sid].attributes if sid in basic else {}
        lines.append(_dump({"streamer": sid, "sentences": list(text.sentences),
                            "attributes": dict(sorted(attrs.items()))}))
    with _Staging(out) as tmp:
        (tmp / "profiles.jsonl").write_text("".join(lines), encoding="utf-8")
    return {"streamers": len(lines)}


def _read_jsonl(path) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
    except OSError as exc:
        raise FatalError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FatalError(f"{path} is not line-delimited JSON: {exc}") from exc


def _read_pairs(path) -> list[MatchedPair]:
    try:
        return [MatchedPair.from_dict(d) for d in _read_jsonl(path)]
    except (KeyError, TypeError, ValueError) as exc:
        raise FatalError(f"{path} does not hold extracted pairs: {exc}") from exc


def _sessions_channel(job, config: PipelineConfig):
    job, pairs = job
    stream = _load(job, config)
    sessions = build_addressee_sessions(stream, pairs, config.k, config.shuffle_candidates,
                                        seed=config.seed)
    return [s.to_dict() for s in sessions]


def run_taskgen(config: PipelineConfig, pairs_path, profiles_path=None) -> dict:
    out = _require_out(config)
    pairs = _read_pairs(pairs_path)
    profiles = {}
    if profiles_path is not None:
        profiles = {str(d["streamer"]): d for d in _read_jsonl(profiles_path)}

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        responses = build_response_task(pairs, profiles)
    for w in caught:
        logger.warning("%s", w.message)

    by_channel: dict[str, list[MatchedPair]] = defaultdict(list)
    for p in pairs:
        by_channel[p.channel_id].append(p)
    jobs = [j for j in _jobs(config) if j[0] in by_channel]
    missing = set(by_channel) - {j[0] for j in jobs}
    if missing:
        raise FatalError(f"pairs refer to channels missing from the input: {sorted(missing)}")
    work = [(j, sorted(by_channel[j[0]], key=lambda p: p.response_t)) for j in jobs]
    sessions = [s for chunk in _run_pool(_sessions_channel, work, config) for s in chunk]

    train, test = split_by_persona(responses, config.test_fraction, seed=config.seed)
    with _Staging(out) as tmp:
        for name, rows in (("response_task.jsonl", responses), ("response_train.jsonl", train),
                           ("response_test.jsonl", test)):
            (tmp / name).write_text("".join(_dump(r.to_dict()) for r in rows), encoding="utf-8")
        (tmp / "addressee_task.jsonl").write_text("".join(_dump(s) for s in sessions), encoding="utf-8")
        manifest = {"k": config.k, "shuffled": config.shuffle_candidates, "seed": config.seed,
                    "test_fraction": config.test_fraction}
        (tmp / "taskgen.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return {"responses": len(responses), "sessions": len(sessions), "train": len(train), "test": len(test)}


def run_stats(config: PipelineConfig, pairs_path) -> dict:
    out = _require_out(config)
    pairs = _read_pairs(pairs_path)
    streams = [_load(j, config) for j in _jobs(config)] if config.input_dir else []
    report = dataset_stats(pairs, streams).to_dict()
    with _Staging(out) as tmp:
        (tmp / "stats.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return report


def load_bench_spec(path=None) -> list[BenchRow]:
    try:
        if path is None:
            text = resources.files("chatweave").joinpath("data/bench_acceptance.json").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        doc = json.loads(text)
        rows = [BenchRow.from_dict(r) for r in doc["rows"]]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FatalError(f"cannot parse bench spec {path or 'bench_acceptance.json'}: {exc}") from exc
    if not rows:
        raise FatalError("bench spec has no rows")
    return rows


def run_bench(config: PipelineConfig, spec_path=None) -> tuple[str, bool]:
    rows = load_bench_spec(spec_path)
    results = [run_row(r) for r in rows]
    table = sweep_table(results)
    if config.out_dir:
        with _Staging(config.out_dir) as tmp:
            (tmp / "sweep.csv").write_text(table, encoding="utf-8")
    return table, all(r.passed for r in results)


# --- argument parsing ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--workers", type=int, help="worker processes (channel-level)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="chatweave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", parents=[common], help="parse and validate channel files")
    p.add_argument("--input", required=True)

    p = sub.add_parser("extract", parents=[common], help="extract comment/response pairs")
    p.add_argument("--input", required=True)

    p = sub.add_parser("persona", parents=[common], help="build streamer persona profiles")
    p.add_argument("--input", required=True)
    p.add_argument("--basic", help="JSONL of raw basic profiles {streamer, attributes}")
    p.add_argument("--codebook", help="JSON codebook for basic profile attributes")

    p = sub.add_parser("taskgen", parents=[common], help="write response and addressee task files")
    p.add_argument("--input", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--profiles")
    p.add_argument("--k", type=int)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--shuffle", action="store_true", default=None)

    p = sub.add_parser("stats", parents=[common], help="dataset statistics")
    p.add_argument("--pairs", required=True)
    p.add_argument("--input")

    p = sub.add_parser("bench", parents=[common], help="synthetic benchmark with thresholds")
    p.add_argument("--spec", help="bench spec JSON (default: bundled acceptance spec)")
    return parser


def _error_report(exc: BaseException) -> str:
    report = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, IngestError):
        report.update(source=exc.source, line=exc.line_no)
    elif isinstance(exc, FatalError):
        report.update(exc.details)
    return json.dumps(report, ensure_ascii=False)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(
            args.config, workers=args.workers, seed=args.seed, out_dir=args.out,
            input_dir=getattr(args, "input", None), k=getattr(args, "k", None),
            test_fraction=getattr(args, "test_fraction", None),
            shuffle_candidates=getattr(args, "shuffle", None),
        )
        cmd = args.command
        if cmd == "ingest-check":
            report = run_ingest_check(config)
            print(json.dumps(report, ensure_ascii=False, indent=2))
            return EXIT_OK if report["ok"] else EXIT_FATAL
        if cmd == "extract":
            result = run_extract(config)
        elif cmd == "persona":
            result = run_persona(config, args.basic, args.codebook)
        elif cmd == "taskgen":
            result = run_taskgen(config, args.pairs, args.profiles)
        elif cmd == "stats":
            result = run_stats(config, args.pairs)
        else:
            table, ok = run_bench(config, args.spec)
            sys.stdout.write(table)
            return EXIT_OK if ok else EXIT_THRESHOLD
        print(json.dumps(result, ensure_ascii=False))
        return EXIT_OK
    except (FatalError, ConfigError, IngestError, TransportError, OSError, ValueError) as exc:
        print(_error_report(exc), file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
