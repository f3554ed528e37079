"""Story data model: events, serialized formats, and character identification.

Two source formats are supported. The JSON document format is

    {"kind": "event"|"dialogue", "characters": [str]?, "metadata": {..}?,
     "events": [{"text": str, "speaker": str?}, ...]}

and the plain-text format is one event per line, where a leading ``Name: ``
prefix marks a dialogue utterance. Event indices are 1-based and contiguous.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import StoryFormatError, ValidationError

EVENT_KIND = "event"
DIALOGUE_KIND = "dialogue"

# Verbs whose grammatical subject is treated as a character by the fallback
# identification heuristic. Callers may pass their own list.
AGENTIVE_VERBS = (
    "entered",
    "exited",
    "moved",
    "said",
    "likes",
    "hates",
    "made",
    "stayed",
    "joined",
    "left",
)

# "Ava entered ...", "Ava, Ben and Cleo entered ..." (with or without the
# Oxford comma before "and").
_NAME = r"[A-Z][a-z]+"
_NAME_LIST = rf"{_NAME}(?:\s*,\s*{_NAME})*(?:,? and {_NAME})?"
_SUBJECT_RE = re.compile(rf"^({_NAME_LIST})\s+([a-z]+)")
_SPEAKER_RE = re.compile(r"^([A-Z][A-Za-z .'-]{0,40}?):\s+(\S.*)$")


@dataclass(frozen=True)
class Event:
    """One narrative event or utterance, 1-indexed within its story."""

    index: int
    text: str
    speaker: str | None = None


@dataclass(frozen=True)
class Story:
    """An ordered event sequence with the characters it involves."""

    events: tuple[Event, ...]
    characters: tuple[str, ...]
    kind: str = EVENT_KIND
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.events:
            raise ValidationError("a story must contain at least one event")
        for pos, event in enumerate(self.events, start=1):
            if event.index != pos:
                raise ValidationError(
                    f"event indices must be contiguous from 1; saw {event.index} at position {pos}"
                )
            if not event.text.strip():
                raise ValidationError(f"event {pos} has empty text")
        folded = [name.casefold() for name in self.characters]
        if len(set(folded)) != len(folded):
            raise ValidationError("duplicate character names (case-insensitive)")
        for event in self.events:
            if event.speaker is not None and event.speaker.casefold() not in folded:
                raise ValidationError(
                    f"speaker {event.speaker!r} of event {event.index} is not a story character"
                )

    def event(self, index: int) -> Event:
        return self.events[index - 1]

    def has_character(self, name: str) -> bool:
        return name.casefold() in {c.casefold() for c in self.characters}

    def canonical_character(self, name: str) -> str:
        """Return the stored casing for a character name."""
        for c in self.characters:
            if c.casefold() == name.casefold():
                return c
        raise ValidationError(f"unknown character {name!r}")

    def key(self) -> str:
        """Stable identity over kind and event content, for caching."""
        import hashlib

        payload = self.kind + "\n" + "\n".join(f"{e.speaker or ''}\t{e.text}" for e in self.events)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def split_name_list(subject: str) -> list[str]:
    """Break ``"Ava, Ben and Cleo"`` into names; Oxford commas welcome."""
    return [n for n in re.split(r"\s*,\s*(?:and\s+)?|\s+and\s+", subject) if n]


def leading_subjects(text: str, verbs=AGENTIVE_VERBS) -> list[str]:
    """Names at the start of an event whose verb marks them as agents."""
    m = _SUBJECT_RE.match(text.strip())
    if not m:
        return []
    if m.group(2) not in verbs:
        return []
    return split_name_list(m.group(1))


def guess_characters(events, kind: str = EVENT_KIND, verbs=AGENTIVE_VERBS) -> tuple[str, ...]:
    """Character names in first-appearance order, without a declaration.

    Event stories use the agentive-subject heuristic; dialogue stories take
    the union of speaker fields plus agentive subjects of narration lines
    (join/leave announcements).
    """
    found: list[str] = []
    seen: set[str] = set()

    def add(name: str):
        if name.casefold() not in seen:
            seen.add(name.casefold())
            found.append(name)

    for event in events:
        if kind == DIALOGUE_KIND and event.speaker:
            add(event.speaker)
        if kind == EVENT_KIND or event.speaker is None:
            for name in leading_subjects(event.text, verbs):
                add(name)
    return tuple(found)


def identify_characters(story: Story) -> tuple[str, ...]:
    """Characters of a story: the declared list when present, else heuristic.

    Deterministic and order-stable: declared order, or first appearance.
    """
    if story.characters:
        return story.characters
    found = guess_characters(story.events, story.kind)
    if not found:
        raise ValidationError("no character could be identified in the story")
    return found


def _events_from_lines(lines: list[str]) -> tuple[list[Event], str]:
    events: list[Event] = []
    kind = EVENT_KIND
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        speaker = None
        m = _SPEAKER_RE.match(text)
        if m:
            speaker, text = m.group(1), m.group(2)
            kind = DIALOGUE_KIND
        events.append(Event(index=len(events) + 1, text=text, speaker=speaker))
    return events, kind


def _events_from_json(raw_events, source: str) -> list[Event]:
    events: list[Event] = []
    for pos, item in enumerate(raw_events, start=1):
        if not isinstance(item, dict) or "text" not in item:
            raise StoryFormatError(f"{source}: event {pos} must be an object with a 'text' field")
        text = str(item["text"]).strip()
        if not text:
            raise StoryFormatError(f"{source}: event {pos} has empty text")
        speaker = item.get("speaker")
        events.append(Event(index=pos, text=text, speaker=speaker))
    return events


def parse_story(raw: str | dict) -> Story:
    """Parse a story document (JSON object/string or plain text).

    Characters come from the document's declaration when present, otherwise
    from :func:`guess_characters`. Raises :class:`StoryFormatError` for
    malformed documents and :class:`ValidationError` for empty event lists.
    """
    declared = None
    metadata: dict = {}
    if isinstance(raw, dict) or (isinstance(raw, str) and raw.lstrip().startswith("{")):
        doc = raw
        if isinstance(doc, str):
            try:
                doc = json.loads(doc)
            except json.JSONDecodeError as exc:
                raise StoryFormatError(f"invalid story JSON: {exc}") from exc
        if "events" not in doc:
            raise StoryFormatError("story document: missing 'events' field")
        kind = doc.get("kind", EVENT_KIND)
        if kind not in (EVENT_KIND, DIALOGUE_KIND):
            raise StoryFormatError(f"story document: unknown kind {kind!r}")
        events = _events_from_json(doc["events"], "story document")
        if doc.get("characters") is not None:
            declared = [str(c) for c in doc["characters"]]
        metadata = dict(doc.get("metadata", {}))
    else:
        events, kind = _events_from_lines(raw.splitlines())

    if not events:
        raise ValidationError("story has no events")

    if declared is not None:
        characters = tuple(declared)
    else:
        characters = guess_characters(events, kind)
        # Speakers are characters by construction; make the invariant hold
        # even when an utterance's speaker never takes an agentive verb.
        folded = {c.casefold() for c in characters}
        extra = [e.speaker for e in events if e.speaker and e.speaker.casefold() not in folded]
        for name in extra:
            if name.casefold() not in folded:
                characters = characters + (name,)
                folded.add(name.casefold())
    if not characters:
        raise ValidationError("no character could be identified in the story")
    return Story(events=tuple(events), characters=characters, kind=kind, metadata=metadata)


def serialize_story(story: Story) -> dict:
    """Story as its JSON document form; round-trips through parse_story."""
    doc = {
        "kind": story.kind,
        "characters": list(story.characters),
        "events": [
            {"text": e.text} if e.speaker is None else {"text": e.text, "speaker": e.speaker}
            for e in story.events
        ],
    }
    if story.metadata:
        doc["metadata"] = dict(story.metadata)
    return doc
