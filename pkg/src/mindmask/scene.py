"""Spatial scene graphs and the iterative masking operator.

A scene graph assigns every event of a story to the room where it happens,
or to the null node (``None``) when the room is unknown. The omniscient
graph resolves rooms from entity-state records; a character-centric graph
keeps only the events whose room the character shared at the time. Masking
one graph by another nulls every event the second graph cannot see, so
folding a belief chain's graphs over the omniscient graph leaves exactly
the events the whole chain observed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .nkb import LOCATION, EntityStateRecord, LocationAnchor, canonicalize_location
from .story import DIALOGUE_KIND, Story, leading_subjects
from .textnorm import normalize_place

# The distinguished null location: unknown or unobserved.
NULL = None


@dataclass(frozen=True)
class SceneGraph:
    """Total assignment of 1-based event indices to rooms (or the null node)."""

    assignment: tuple[str | None, ...]
    location_set: frozenset[str]

    def __post_init__(self):
        for room in self.assignment:
            if room is not None and room not in self.location_set:
                raise ValidationError(f"assignment uses {room!r}, not in the location set")

    def __len__(self) -> int:
        return len(self.assignment)

    def room(self, index: int) -> str | None:
        return self.assignment[index - 1]

    def surviving(self) -> tuple[int, ...]:
        return tuple(i for i, room in enumerate(self.assignment, start=1) if room is not None)

    def to_json(self) -> dict:
        return {"assignment": {str(i): room for i, room in enumerate(self.assignment, start=1)}}


@dataclass(frozen=True)
class MaskedView:
    """Events that survived masking, with the chain that produced the mask."""

    surviving: tuple[int, ...]
    chain: tuple[str, ...]
    texts: tuple[str, ...] = ()

    def __post_init__(self):
        if list(self.surviving) != sorted(set(self.surviving)):
            raise ValidationError("surviving indices must be strictly increasing")


class _LocationReplay:
    """Per-event resolved character locations, derived from records."""

    def __init__(self, story: Story, records: list[EntityStateRecord], anchors: list[LocationAnchor]):
        person = {c.casefold() for c in story.characters}
        by_event: dict[int, list[EntityStateRecord]] = {}
        for r in records:
            if not 1 <= r.event_index <= len(story.events):
                raise ValidationError(f"record references unknown event index {r.event_index}")
            by_event.setdefault(r.event_index, []).append(r)

        current: dict[str, str | None] = {c: None for c in person}
        self.after: list[dict[str, str | None]] = [dict(current)]
        for index in range(1, len(story.events) + 1):
            for r in by_event.get(index, ()):
                if r.attribute == LOCATION and r.entity.casefold() in person:
                    anchor = canonicalize_location(r.state, anchors)
                    current[r.entity.casefold()] = anchor.name if anchor else None
            self.after.append(dict(current))
        self.by_event = by_event
        self.person = person

    def location(self, name: str, index: int) -> str | None:
        """Location after the records of event `index` applied (index 0 = start)."""
        return self.after[index][name.casefold()]


def _container_rooms(
    story: Story,
    replay: _LocationReplay,
    anchors: list[LocationAnchor],
) -> dict[str, str]:
    """Room of each container, resolved story-wide.

    Two sources: a container's own location record whose state names a room,
    and moves (when a character in a room moves something into a container,
    the container is in that room).
    """
    rooms: dict[str, str] = {}
    for index in range(1, len(story.events) + 1):
        event = story.event(index)
        actor_room = None
        actors = [n for n in leading_subjects(event.text) if n.casefold() in replay.person]
        if actors:
            actor_room = replay.location(actors[0], index)
        for r in replay.by_event.get(index, ()):
            if r.attribute != LOCATION or r.entity.casefold() in replay.person:
                continue
            anchor = canonicalize_location(r.state, anchors)
            if anchor is not None:
                rooms[normalize_place(r.entity)] = anchor.name
            else:
                place = normalize_place(r.state)
                if place and actor_room is not None:
                    rooms[place] = actor_room
    return rooms


def build_omniscient_graph(
    story: Story, records: list[EntityStateRecord], anchors: list[LocationAnchor]
) -> SceneGraph:
    """Assign each event the room where it occurs, from an all-seeing view.

    Events with an acting character take the actor's resolved room (an exit
    keeps the room being exited). Object declarations take the room holding
    the container, resolved after the whole story is read, falling back to
    the previous event's room. Unresolvable events get the null node.
    """
    if not anchors:
        raise ValidationError("cannot build a scene graph without location anchors")
    replay = _LocationReplay(story, records, anchors)
    container_rooms = _container_rooms(story, replay, anchors)

    assignment: list[str | None] = []
    previous: str | None = None
    for index in range(1, len(story.events) + 1):
        event = story.event(index)
        room: str | None = None

        person_records = [
            r
            for r in replay.by_event.get(index, ())
            if r.attribute == LOCATION and r.entity.casefold() in replay.person
        ]
        actors = [n for n in leading_subjects(event.text) if n.casefold() in replay.person]
        if story.kind == DIALOGUE_KIND and event.speaker is not None:
            actors = [event.speaker] + actors

        if person_records:
            arrived = next(
                (a for r in person_records if (a := canonicalize_location(r.state, anchors))), None
            )
            if arrived is not None:
                room = arrived.name
            else:
                # All movement records negate: an exit. The room being exited
                # is where the mover stood before this event.
                room = replay.location(person_records[0].entity, index - 1)
        elif actors:
            room = replay.location(actors[0], index)
        else:
            object_records = [
                r
                for r in replay.by_event.get(index, ())
                if r.attribute == LOCATION and r.entity.casefold() not in replay.person
            ]
            if object_records:
                state = object_records[0].state
                anchor = canonicalize_location(state, anchors)
                if anchor is not None:
                    room = anchor.name
                else:
                    room = container_rooms.get(normalize_place(state), previous)

        assignment.append(room)
        if room is not None:
            previous = room
    return SceneGraph(
        assignment=tuple(assignment), location_set=frozenset(a.name for a in anchors)
    )


def build_character_graph(
    story: Story,
    records: list[EntityStateRecord],
    anchors: list[LocationAnchor],
    character: str,
    omniscient: SceneGraph,
) -> SceneGraph:
    """The omniscient graph restricted to events the character witnessed.

    A character witnesses an event when the event's room matches the place
    the character was in immediately before or after the event's records
    apply; the "after" side makes arrivals self-observed, the "before" side
    makes departures self-observed.
    """
    if not story.has_character(character):
        raise ValidationError(f"{character!r} is not a character of the story")
    if len(omniscient) != len(story.events):
        raise ValidationError("omniscient graph does not cover the story")
    replay = _LocationReplay(story, records, anchors)
    assignment: list[str | None] = []
    for index in range(1, len(story.events) + 1):
        room = omniscient.room(index)
        if room is not None and room in (
            replay.location(character, index),
            replay.location(character, index - 1),
        ):
            assignment.append(room)
        else:
            assignment.append(NULL)
    return SceneGraph(assignment=tuple(assignment), location_set=omniscient.location_set)


def mask(g: SceneGraph, gc: SceneGraph) -> SceneGraph:
    """Null every event of `g` that is null in `gc`; the masking operator."""
    if len(g) != len(gc):
        raise ValidationError(f"cannot mask graphs of different sizes ({len(g)} vs {len(gc)})")
    assignment = tuple(
        room if room is not None and other is not None else NULL
        for room, other in zip(g.assignment, gc.assignment)
    )
    return SceneGraph(assignment=assignment, location_set=g.location_set)


def mask_chain(g: SceneGraph, chain: list[SceneGraph]) -> SceneGraph:
    """Left fold of :func:`mask` over the chain; the empty chain is identity."""
    masked = g
    for gc in chain:
        masked = mask(masked, gc)
    return masked


def retrieve_events(
    masked: SceneGraph, augmented_texts: list[str], chain: tuple[str, ...] = ()
) -> MaskedView:
    """Surviving event indices with their (augmented) texts, in story order."""
    if len(augmented_texts) != len(masked):
        raise ValidationError("augmented texts are not aligned with the graph")
    surviving = masked.surviving()
    return MaskedView(
        surviving=surviving,
        chain=chain,
        texts=tuple(augmented_texts[i - 1] for i in surviving),
    )


@dataclass(frozen=True)
class GraphBuildCounts:
    """How many graphs each strategy builds for m characters up to order k."""

    scene_graphs: int  # one omniscient graph plus one per character
    chain_graphs: int  # one belief graph per ordered character chain


def graph_build_counts(m: int, k: int) -> GraphBuildCounts:
    """Worst-case graph counts: m + 1 for the masking pipeline versus
    sum over i of m!/(m-i)! when every ordered chain needs its own graph."""
    if m < 1:
        raise ValidationError("need at least one character")
    if k < 0 or k > m:
        raise ValidationError(f"ToM order {k} must lie in 0..{m} (chains cannot repeat)")
    chain_graphs = sum(math.perm(m, i) for i in range(1, k + 1))
    return GraphBuildCounts(scene_graphs=m + 1, chain_graphs=chain_graphs)
