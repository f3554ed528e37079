"""Dataset files: JSONL with one story-plus-questions object per line."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .errors import StoryFormatError
from .question import ToMQuestion, parse_question
from .story import Story, parse_story, serialize_story

log = logging.getLogger(__name__)

DatasetItem = tuple[Story, list[ToMQuestion]]


def load_dataset(path: str | Path) -> list[DatasetItem]:
    items: list[DatasetItem] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StoryFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        story = parse_story(doc)
        questions = []
        for q in doc.get("questions", ()):
            parsed = parse_question(q["text"], story, gold=q.get("gold"))
            if "order" in q and q["order"] != parsed.order:
                log.warning(
                    "%s:%d: declared order %s disagrees with parsed order %s for %r",
                    path, lineno, q["order"], parsed.order, q["text"],
                )
            questions.append(parsed)
        items.append((story, questions))
    return items


def dump_dataset(items: list[DatasetItem], path: str | Path) -> None:
    lines = []
    for story, questions in items:
        doc = serialize_story(story)
        doc["questions"] = [
            {"text": q.raw, "order": q.order, **({"gold": q.gold} if q.gold is not None else {})}
            for q in questions
        ]
        lines.append(json.dumps(doc))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
