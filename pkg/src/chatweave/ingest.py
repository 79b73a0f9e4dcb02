"""Reading transcript/comment files into ``ChannelStream`` values.

Both inputs are line-delimited JSON, one channel per file:

    transcript: {"channel": str, "seq": int, "t_start": int, "t_end": int, "text": str}
    comments:   {"channel": str, "user": str, "t": int, "text": str}

Unknown keys are ignored.
"""

from __future__ import annotations

import json
import logging
import os
import unicodedata
from pathlib import Path
from typing import IO, Iterable, Iterator

from .model import ChannelStream, Comment, ExtractionConfig, UtteranceSegment

logger = logging.getLogger(__name__)

TRANSCRIPT_KEYS = ("channel", "seq", "t_start", "t_end", "text")
COMMENT_KEYS = ("channel", "user", "t", "text")


class IngestError(ValueError):
    def __init__(self, message: str, source: str | None = None, line_no: int | None = None):
        self.source = source
        self.line_no = line_no
        where = ""
        if source is not None or line_no is not None:
            where = f"{source or '<input>'}:{line_no if line_no is not None else '?'}: "
        super().__init__(where + message)


class MalformedRecordError(IngestError):
    def __init__(self, message: str, key: str | None = None, source=None, line_no=None):
        self.key = key
        super().__init__(message, source, line_no)


class EmptyTextError(IngestError):
    pass


class MixedChannelError(IngestError):
    pass


# full-width forms U+FF01..U+FF5E map to ASCII by a fixed offset; punctuation stays
_WIDTH_TABLE = {
    code: code - 0xFEE0
    for code in range(0xFF01, 0xFF5F)
    if not unicodedata.category(chr(code)).startswith("P")
}
# control characters that str.split() would not already treat as whitespace
_CONTROL_TABLE = dict.fromkeys(
    code for code in range(0xA0) if unicodedata.category(chr(code)) == "Cc" and not chr(code).isspace()
)
_TABLE = {**_WIDTH_TABLE, **_CONTROL_TABLE}


def normalize_text(text: str) -> str:
    """Trim, collapse whitespace, fold full-width letters/digits/symbols, drop controls.

    Full-width punctuation (！？，。 and friends) is left as is. An empty result
    means the record carries no text.
    """
    return " ".join(text.translate(_TABLE).split())


def _load_record(line: str, source, line_no) -> dict:
    def no_dupes(pairs):
        obj = {}
        for k, v in pairs:
            if k in obj:
                raise MalformedRecordError(f"duplicate key {k!r}", k, source, line_no)
            obj[k] = v
        return obj

    try:
        record = json.loads(line, object_pairs_hook=no_dupes)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(f"invalid JSON: {exc.msg}", None, source, line_no) from None
    if not isinstance(record, dict):
        raise MalformedRecordError("record is not an object", None, source, line_no)
    return record


def _text_field(record: dict, source, line_no) -> str:
    if "text" not in record:
        raise MalformedRecordError("missing key 'text'", "text", source, line_no)
    if not isinstance(record["text"], str):
        raise MalformedRecordError("'text' must be a string", "text", source, line_no)
    text = normalize_text(record["text"])
    if not text:
        raise EmptyTextError("text is empty after normalization", source, line_no)
    return text


def _require(record: dict, keys, source, line_no) -> None:
    for key in keys:
        if key not in record:
            raise MalformedRecordError(f"missing key {key!r}", key, source, line_no)


def _int_field(record, key, source, line_no) -> int:
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedRecordError(f"{key!r} must be an integer", key, source, line_no)
    return value


def _id_field(record, key, source, line_no) -> str:
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise MalformedRecordError(f"{key!r} must be a string", key, source, line_no)
    value = str(value)
    if not value.strip():
        raise MalformedRecordError(f"empty identifier {key!r}", key, source, line_no)
    return value


def parse_transcript_line(line: str, source: str | None = None, line_no: int | None = None) -> UtteranceSegment:
    record = _load_record(line, source, line_no)
    text = _text_field(record, source, line_no)
    _require(record, TRANSCRIPT_KEYS, source, line_no)
    t_start = _int_field(record, "t_start", source, line_no)
    t_end = _int_field(record, "t_end", source, line_no)
    if t_end < t_start:
        raise MalformedRecordError("t_end < t_start", "t_end", source, line_no)
    return UtteranceSegment(
        channel_id=_id_field(record, "channel", source, line_no),
        seq=_int_field(record, "seq", source, line_no),
        t_start=t_start,
        t_end=t_end,
        text=text,
    )


def parse_comment_line(line: str, source: str | None = None, line_no: int | None = None) -> Comment:
    record = _load_record(line, source, line_no)
    text = _text_field(record, source, line_no)
    _require(record, COMMENT_KEYS, source, line_no)
    return Comment(
        channel_id=_id_field(record, "channel", source, line_no),
        user_id=_id_field(record, "user", source, line_no),
        t=_int_field(record, "t", source, line_no),
        text=text,
    )


def _iter_lines(source) -> Iterator[tuple[str, int, str]]:
    """Yield (source name, 1-based line number, line) for a path or an iterable of lines."""
    if isinstance(source, (str, os.PathLike)):
        name = str(source)
        with open(source, encoding="utf-8") as f:
            for i, line in enumerate(f, 1):
                if line.strip():
                    yield name, i, line
    else:
        name = getattr(source, "name", "<lines>")
        for i, line in enumerate(source, 1):
            if line.strip():
                yield name, i, line


def _parse_all(source, parse) -> list:
    items = []
    for name, i, line in _iter_lines(source):
        try:
            items.append(parse(line, name, i))
        except EmptyTextError:
            logger.debug("dropping empty record at %s:%d", name, i)
    return items


def dedup_comments(comments: Iterable[Comment], window: int) -> list[Comment]:
    """Collapse repeats of the same (user, text) within ``window`` ms onto the earliest.

    Input must be time-sorted. A repeat is measured against the last kept copy,
    so a long spam run keeps one copy per window.
    """
    last_kept: dict[tuple[str, str], int] = {}
    out = []
    for c in comments:
        key = (c.user_id, c.text)
        t0 = last_kept.get(key)
        if t0 is not None and c.t - t0 <= window:
            continue
        last_kept[key] = c.t
        out.append(c)
    return out


def build_stream(
    utterances: Iterable[UtteranceSegment],
    comments: Iterable[Comment],
    config: ExtractionConfig | None = None,
    channel_id: str | None = None,
    streamer_id: str | None = None,
) -> ChannelStream:
    """Sort, deduplicate and wrap already-parsed records."""
    config = config or ExtractionConfig()
    utterances = list(utterances)
    comments = list(comments)
    channels = {u.channel_id for u in utterances} | {c.channel_id for c in comments}
    if channel_id is not None:
        channels.add(channel_id)
    if len(channels) > 1:
        raise MixedChannelError(f"records from several channels: {sorted(channels)}")
    if not channels:
        raise IngestError("no records and no channel id given")
    (cid,) = channels
    sid = streamer_id if streamer_id is not None else cid

    # sorted() is stable, so equal timestamps keep input order
    utterances.sort(key=lambda u: u.t_start)
    comments.sort(key=lambda c: c.t)
    own = [c for c in comments if c.user_id == sid]
    if own:
        logger.info("channel %s: dropping %d comments posted by the streamer", cid, len(own))
        comments = [c for c in comments if c.user_id != sid]
    comments = dedup_comments(comments, config.dedup_window)
    return ChannelStream(cid, sid, tuple(utterances), tuple(comments))


def load_channel_stream(
    transcript_source,
    comment_source,
    config: ExtractionConfig | None = None,
    streamer_id: str | None = None,
    channel_id: str | None = None,
) -> ChannelStream:
    """Parse one channel's transcript and comment sources into a stream.

    Sources are paths or iterables of lines. Records whose text normalizes to
    nothing are dropped; any other bad record raises with its location.
    """
    utterances = _parse_all(transcript_source, parse_transcript_line)
    comments = _parse_all(comment_source, parse_comment_line)
    return build_stream(utterances, comments, config, channel_id=channel_id, streamer_id=streamer_id)


def transcript_record(u: UtteranceSegment) -> dict:
    return {"channel": u.channel_id, "seq": u.seq, "t_start": u.t_start, "t_end": u.t_end, "text": u.text}


def comment_record(c: Comment) -> dict:
    return {"channel": c.channel_id, "user": c.user_id, "t": c.t, "text": c.text}


def _dump_line(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n"


def write_stream(stream: ChannelStream, transcript: IO[str] | str | Path, comments: IO[str] | str | Path) -> None:
    """Write a stream back out in the two line formats read by ``load_channel_stream``."""
    for dest, rows, to_record in (
        (transcript, stream.utterances, transcript_record),
        (comments, stream.comments, comment_record),
    ):
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", encoding="utf-8") as f:
                f.writelines(_dump_line(to_record(r)) for r in rows)
        else:
            dest.writelines(_dump_line(to_record(r)) for r in rows)
