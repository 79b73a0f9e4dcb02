import json

import pytest

from chatweave.config import PipelineConfig, config_from_dict, load_config
from chatweave.model import ConfigError


def test_defaults():
    cfg = load_config(env={})
    assert cfg == PipelineConfig()
    assert cfg.extraction.delta_t == 60_000 and cfg.persona.max_profile_length == 512


def test_file_env_and_flags_layer(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"workers": 2, "seed": 5, "extraction": {"tau": 1.5, "max_merge": 3},
                                "persona": {"first_person_tokens": ["我", "我们"]}}))
    env = {"CHATWEAVE_EXTRACTION_TAU": "2.0", "CHATWEAVE_SEED": "9", "CHATWEAVE_EXTRACTION_NOISE_PATTERNS": '["哈哈"]',
           "HOME": "/x"}
    cfg = load_config(path, env=env, workers=4, seed=None)
    assert cfg.workers == 4
    assert cfg.seed == 9
    assert cfg.extraction.tau == 2.0 and cfg.extraction.max_merge == 3
    assert cfg.extraction.noise_patterns == ("哈哈",)
    assert cfg.persona.first_person_tokens == frozenset({"我", "我们"})


def test_string_env_values():
    cfg = load_config(env={"CHATWEAVE_EMBEDDING_ENDPOINT": "http://localhost:9000"})
    assert cfg.embedding_endpoint == "http://localhost:9000"


@pytest.mark.parametrize("d", [
    {"workers": 0}, {"workers": True}, {"nope": 1}, {"extraction": {"delta_t": -1}},
    {"extraction": {"bogus": 1}}, {"persona": {"min_words": 30}}, {"k": 1}, {"test_fraction": 0.7},
    {"extraction": 5},
])
def test_invalid_configs(d):
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_unknown_env_variable_rejected():
    with pytest.raises(ConfigError):
        load_config(env={"CHATWEAVE_WROKERS": "2"})


def test_bad_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json", env={})
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(bad, env={})
    bad.write_text("[1]")
    with pytest.raises(ConfigError):
        load_config(bad, env={})


def test_to_dict_round_trip():
    cfg = load_config(env={}, workers=3, seed=1)
    assert config_from_dict(cfg.to_dict()) == cfg
