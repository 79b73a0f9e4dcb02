"""Persona profiles: rule-selected first-person sentences and anonymized attributes."""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Protocol, Sequence

from ._http import TransportError, post_json

logger = logging.getLogger(__name__)

VERB, NOUN, ADJ, OTHER = "VERB", "NOUN", "ADJ", "OTHER"


@dataclass(frozen=True)
class PersonaConfig:
    min_words: int = 4
    max_words: int = 20
    first_person_tokens: frozenset[str] = frozenset({"我"})
    max_profile_length: int = 512
    classifier_threshold: float = 0.5
    classifier_endpoint: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "first_person_tokens", frozenset(self.first_person_tokens))
        if self.min_words > self.max_words:
            raise ValueError("min_words must not exceed max_words")
        if self.max_profile_length <= 0:
            raise ValueError("max_profile_length must be positive")
        if not 0.0 <= self.classifier_threshold <= 1.0:
            raise ValueError("classifier_threshold must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "min_words": self.min_words,
            "max_words": self.max_words,
            "first_person_tokens": sorted(self.first_person_tokens),
            "max_profile_length": self.max_profile_length,
            "classifier_threshold": self.classifier_threshold,
            "classifier_endpoint": self.classifier_endpoint,
        }


@dataclass(frozen=True)
class TextProfile:
    streamer_id: str
    sentences: tuple[str, ...] = ()

    @property
    def total_length(self) -> int:
        return sum(len(s) for s in self.sentences)

    def to_dict(self) -> dict:
        return {"streamer": self.streamer_id, "sentences": list(self.sentences)}


@dataclass(frozen=True)
class BasicProfile:
    streamer_id: str
    attributes: Mapping[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"streamer": self.streamer_id, "attributes": dict(sorted(self.attributes.items()))}

    @classmethod
    def from_dict(cls, d: dict) -> "BasicProfile":
        return cls(str(d["streamer"]), {k: int(v) for k, v in d["attributes"].items()})


# --- tagging -----------------------------------------------------------------

class Tagger(Protocol):
    def tag(self, sentence: str) -> list[tuple[str, str]]: ...


_LATIN = re.compile(r"[A-Za-z0-9]+")


class LexiconTagger:
    """Greedy longest-match tagger over verb/noun/adjective word lists.

    Characters not covered by any list become single-character OTHER tokens;
    runs of ASCII letters/digits form one OTHER token. Whitespace is skipped.
    A word listed under several categories takes the first of verb, noun,
    adjective, function word.
    """

    def __init__(self, lexicon: Mapping[str, str]):
        self.lexicon = dict(lexicon)
        self.max_len = max((len(w) for w in self.lexicon), default=1)

    @classmethod
    def from_files(cls, verbs: Iterable[str], nouns: Iterable[str], adjectives: Iterable[str],
                   function_words: Iterable[str] = ()) -> "LexiconTagger":
        lex: dict[str, str] = {}
        for words, tag in ((verbs, VERB), (nouns, NOUN), (adjectives, ADJ), (function_words, OTHER)):
            for w in words:
                lex.setdefault(w, tag)
        return cls(lex)

    def tag(self, sentence: str) -> list[tuple[str, str]]:
        out = []
        i, n = 0, len(sentence)
        while i < n:
            ch = sentence[i]
            if ch.isspace():
                i += 1
                continue
            m = _LATIN.match(sentence, i)
            if m:
                out.append((m.group(), OTHER))
                i = m.end()
                continue
            for L in range(min(self.max_len, n - i), 0, -1):
                tag = self.lexicon.get(sentence[i:i + L])
                if tag is not None:
                    out.append((sentence[i:i + L], tag))
                    i += L
                    break
            else:
                out.append((ch, OTHER))
                i += 1
        return out


def _read_words(name: str) -> list[str]:
    text = resources.files("chatweave").joinpath("data/lexicon/" + name).read_text(encoding="utf-8")
    words = []
    for line in text.splitlines():
        if not line.startswith("#"):
            words.extend(line.split())
    return words


@lru_cache(maxsize=1)
def default_tagger() -> LexiconTagger:
    return LexiconTagger.from_files(
        _read_words("verbs.txt"), _read_words("nouns.txt"),
        _read_words("adjectives.txt"), _read_words("function.txt"),
    )


def pos_tags(sentence: str, tagger: Tagger | None = None) -> list[tuple[str, str]]:
    if not sentence:
        raise ValueError("cannot tag an empty sentence")
    return (tagger or default_tagger()).tag(sentence)


def _is_punct(token: str) -> bool:
    return all(unicodedata.category(ch)[0] in "PS" for ch in token)


def rule_checks(sentence: str, config: PersonaConfig | None = None,
                tagger: Tagger | None = None) -> dict[str, bool]:
    """Evaluate the four sentence rules separately (word count, first person, verb, noun/adj)."""
    config = config or PersonaConfig()
    tokens = [t for t in pos_tags(sentence, tagger) if not _is_punct(t[0])]
    tags = {tag for _, tag in tokens}
    return {
        "length": config.min_words <= len(tokens) <= config.max_words,
        "first_person": any(tok in config.first_person_tokens for tok, _ in tokens),
        "verb": VERB in tags,
        "noun_or_adj": NOUN in tags or ADJ in tags,
    }


def rule_filter(sentence: str, config: PersonaConfig | None = None, tagger: Tagger | None = None) -> bool:
    if not sentence:
        return False
    return all(rule_checks(sentence, config, tagger).values())


# --- classifier ----------------------------------------------------------------

class ClassifierClient:
    """Client for ``POST /classify`` -> ``{"scores": [...]}`` (order preserving)."""

    def __init__(self, endpoint: str, *, attempts: int = 3, backoff: float = 0.2,
                 timeout: float = 10.0, sleep=None):
        self.url = endpoint.rstrip("/") + "/classify"
        self._kw = {"attempts": attempts, "backoff": backoff, "timeout": timeout}
        if sleep is not None:
            self._kw["sleep"] = sleep

    def scores(self, texts: Sequence[str]) -> list[float]:
        if not texts:
            return []
        body = post_json(self.url, {"texts": list(texts)}, **self._kw)
        scores = body.get("scores") if isinstance(body, dict) else None
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise TransportError(f"malformed response from {self.url}")
        return [float(s) for s in scores]


class AcceptAllClassifier:
    """Offline stand-in for the classifier service: every sentence scores 1.0."""

    def scores(self, texts: Sequence[str]) -> list[float]:
        return [1.0] * len(texts)


def classifier_score(sentence: str, client) -> float:
    return client.scores([sentence])[0]


def sentences_from_segments(texts: Iterable[str], ending_punct: str = "。？！．!?.") -> list[str]:
    """Join consecutive ASR segments into sentences at ending punctuation.

    A trailing piece without ending punctuation is kept as its own sentence.
    """
    out = []
    buf = ""
    for t in texts:
        buf += t
        if buf and buf[-1] in ending_punct:
            out.append(buf)
            buf = ""
    if buf:
        out.append(buf)
    return out


def build_text_profile(history: Sequence[str], config: PersonaConfig | None = None,
                       classifier=None, streamer_id: str = "",
                       tagger: Tagger | None = None) -> TextProfile:
    """Select persona sentences from a streamer's chronological history.

    Sentences must pass the rules (and the classifier when one is configured).
    Exact duplicates keep their latest occurrence. Selection runs newest first
    and stops at the first sentence that would push the total past
    ``max_profile_length``; the result is in chronological order.
    """
    config = config or PersonaConfig()
    if classifier is None and config.classifier_endpoint:
        classifier = ClassifierClient(config.classifier_endpoint)

    kept = [s for s in history if s and rule_filter(s, config, tagger)]
    if classifier is not None and kept:
        scores = classifier.scores(kept)
        kept = [s for s, p in zip(kept, scores) if p >= config.classifier_threshold]

    chosen: list[str] = []
    seen: set[str] = set()
    total = 0
    for s in reversed(kept):
        if s in seen:
            continue
        if total + len(s) > config.max_profile_length:
            break
        seen.add(s)
        chosen.append(s)
        total += len(s)
    chosen.reverse()
    return TextProfile(streamer_id, tuple(chosen))


# --- basic profile anonymization -------------------------------------------------

_RANGE = re.compile(r"^\s*(-?\d+(?:\.\d+)?)\s*[-–~]\s*(-?\d+(?:\.\d+)?)\s*$")


def validate_codebook(codebook: Mapping[str, Mapping[str, int]]) -> None:
    for attr, table in codebook.items():
        for raw, idx in table.items():
            if isinstance(idx, bool) or not isinstance(idx, int) or idx < 1:
                raise ValueError(f"codebook {attr}[{raw!r}] must be an integer >= 1 (0 is reserved)")


def load_codebook(path) -> dict[str, dict[str, int]]:
    with open(path, encoding="utf-8") as f:
        codebook = json.load(f)
    validate_codebook(codebook)
    return codebook


def _lookup(value, table: Mapping[str, int]) -> int:
    key = str(value).strip()
    if key in table:
        return table[key]
    try:
        x = float(key)
    except ValueError:
        return 0
    for band, idx in table.items():
        m = _RANGE.match(band)
        if m and float(m.group(1)) <= x <= float(m.group(2)):
            return idx
    return 0


def anonymize_basic_profile(raw: Mapping[str, object], codebook: Mapping[str, Mapping[str, int]],
                            streamer_id: str = "") -> BasicProfile:
    """Replace every raw attribute value by its codebook index; unknown values get 0.

    Numeric values (e.g. an age) fall into a band when the codebook keys are
    ranges such as ``"18-24"``.
    """
    attrs = {name: _lookup(value, codebook.get(name, {})) for name, value in raw.items()}
    return BasicProfile(streamer_id, attrs)


class IdAnonymizer:
    """Assigns consecutive numeric ids in first-seen order."""

    def __init__(self, start: int = 1):
        self._ids: dict[str, str] = {}
        self._next = start

    def __call__(self, raw_id: str) -> str:
        if raw_id not in self._ids:
            self._ids[raw_id] = str(self._next)
            self._next += 1
        return self._ids[raw_id]
