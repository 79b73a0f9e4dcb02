"""Pipeline configuration: one JSON document plus ``CHATWEAVE_*`` overrides.

Keys mirror the dataclass fields. Nested sections use a second prefix, so
``extraction.delta_t`` is overridden by ``CHATWEAVE_EXTRACTION_DELTA_T`` and
``workers`` by ``CHATWEAVE_WORKERS``. Override values are parsed as JSON when
possible (numbers, booleans, lists) and taken as plain strings otherwise.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from typing import Mapping

from .model import ConfigError, ExtractionConfig
from .persona import PersonaConfig

ENV_PREFIX = "CHATWEAVE_"


@dataclass(frozen=True)
class PipelineConfig:
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    persona: PersonaConfig = field(default_factory=PersonaConfig)
    input_dir: str | None = None
    out_dir: str | None = None
    workers: int = 1
    shuffle_candidates: bool = False
    seed: int = 0
    k: int = 10
    test_fraction: float = 0.1
    embedding_endpoint: str | None = None

    def __post_init__(self):
        if isinstance(self.workers, bool) or not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"workers must be an integer >= 1, got {self.workers!r}")
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if not 0 < self.test_fraction < 0.5:
            raise ConfigError(f"test_fraction must lie in (0, 0.5), got {self.test_fraction}")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["extraction"] = self.extraction.to_dict()
        d["persona"] = self.persona.to_dict()
        return d


_SECTIONS = {"extraction": ExtractionConfig, "persona": PersonaConfig}


def _field_names(cls) -> set[str]:
    return {f.name for f in fields(cls) if not f.name.startswith("_")}


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _env_overrides(env: Mapping[str, str]) -> dict:
    out: dict = {}
    top = _field_names(PipelineConfig) - set(_SECTIONS)
    for key, raw in env.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        for section, cls in _SECTIONS.items():
            if name.startswith(section + "_") and name[len(section) + 1:] in _field_names(cls):
                out.setdefault(section, {})[name[len(section) + 1:]] = _parse_env_value(raw)
                break
        else:
            if name not in top:
                raise ConfigError(f"unknown configuration variable {key}")
            out[name] = _parse_env_value(raw)
    return out


def _merge(base: dict, extra: dict) -> dict:
    merged = dict(base)
    for k, v in extra.items():
        if k in _SECTIONS and isinstance(v, dict):
            merged[k] = {**merged.get(k, {}), **v}
        else:
            merged[k] = v
    return merged


def config_from_dict(d: Mapping) -> PipelineConfig:
    known = _field_names(PipelineConfig)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    kw = dict(d)
    for section, cls in _SECTIONS.items():
        sub = kw.pop(section, None) or {}
        if not isinstance(sub, dict):
            raise ConfigError(f"{section} must be an object")
        bad = set(sub) - _field_names(cls)
        if bad:
            raise ConfigError(f"unknown {section} keys: {sorted(bad)}")
        try:
            kw[section] = cls(**sub)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}: {exc}") from exc
    return PipelineConfig(**kw)


def load_config(path: str | os.PathLike | None = None, env: Mapping[str, str] | None = None,
                **overrides) -> PipelineConfig:
    """Defaults, then the config file, then environment, then explicit overrides.

    Overrides whose value is None are ignored (unset command-line flags).
    """
    d: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                d = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
    d = _merge(d, _env_overrides(os.environ if env is None else env))
    d = _merge(d, {k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(d)


def with_overrides(config: PipelineConfig, **kw) -> PipelineConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
