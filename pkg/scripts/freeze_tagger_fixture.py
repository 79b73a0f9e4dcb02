"""Tag tests/fixtures/tagger_sentences.txt with jieba and freeze verb presence.

jieba is only needed to regenerate the fixture:

    pip install jieba
    python scripts/freeze_tagger_fixture.py
"""
import json
from pathlib import Path

import jieba
import jieba.posseg as pseg

jieba.setLogLevel(60)
root = Path(__file__).resolve().parents[1] / "tests" / "fixtures"
sentences = (root / "tagger_sentences.txt").read_text(encoding="utf-8").split()

with open(root / "tagger_reference.jsonl", "w", encoding="utf-8") as out:
    for s in sentences:
        tags = [(w.word, w.flag) for w in pseg.cut(s)]
        has_verb = any(flag.startswith("v") for _, flag in tags)
        out.write(json.dumps({"text": s, "has_verb": has_verb, "tags": tags}, ensure_ascii=False) + "\n")
print(f"froze {len(sentences)} sentences")
