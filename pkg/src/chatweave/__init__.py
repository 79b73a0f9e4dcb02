"""Reply-to dialogue extraction from live-stream transcripts and comment streams."""

from .model import (
    ChannelStream,
    Comment,
    ConfigError,
    ExtractionConfig,
    MatchedPair,
    UtteranceSegment,
    validate_stream,
)
from .ingest import load_channel_stream, normalize_text
from .matcher import extract_dialogues
from .similarity import lexical_containment, match_fn

__version__ = "0.1.0"
