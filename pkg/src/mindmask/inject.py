"""Knowledge injection: append entity-state bullets to their source events.

Characters' location records never appear as bullets; the masking stage
consumes those instead. Everything else the backend emitted is kept, cascade
records included.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError
from .nkb import LOCATION, EntityStateRecord
from .story import Story


@dataclass(frozen=True)
class AugmentedEvent:
    index: int
    base_text: str
    injected: tuple[str, ...]

    def render(self, numbered: bool = False) -> str:
        head = f"{self.index}: {self.base_text}" if numbered else self.base_text
        if not self.injected:
            return head
        return head + "\n" + "\n".join(f"- {line}" for line in self.injected)


def inject(story: Story, records: list[EntityStateRecord]) -> list[AugmentedEvent]:
    """One augmented event per story event, in order, bullets attached.

    Bullets are the rendered records of the event, sorted by (entity,
    attribute) for determinism, minus character-location records.
    """
    person = {c.casefold() for c in story.characters}
    per_event: dict[int, list[EntityStateRecord]] = {}
    for r in records:
        if not 1 <= r.event_index <= len(story.events):
            raise ValidationError(f"record references unknown event index {r.event_index}")
        if r.attribute == LOCATION and r.entity.casefold() in person:
            continue
        per_event.setdefault(r.event_index, []).append(r)

    augmented = []
    for event in story.events:
        bullets = sorted(
            per_event.get(event.index, ()),
            key=lambda r: (r.entity.casefold(), r.attribute.casefold()),
        )
        augmented.append(
            AugmentedEvent(
                index=event.index,
                base_text=event.text,
                injected=tuple(r.render() for r in bullets),
            )
        )
    return augmented


def render_augmented(events: list[AugmentedEvent], numbered: bool = True) -> str:
    return "\n".join(e.render(numbered=numbered) for e in events)
