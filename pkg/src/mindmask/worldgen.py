"""Synthetic false-belief stories and a brute-force nested-belief oracle.

The generator emits room episodes: a group of characters enters, an object is
declared inside a container, characters move it / idle / gossip and exit one
by one, and everyone regroups in the waiting room. The last actor of every
episode always moves the object, so every earlier exiter leaves holding a
false belief.

The oracle replays the raw event text (never the pipeline's state records)
and answers nested-belief questions by updating a belief store at every chain
prefix whose characters all witnessed the event. It is the ground truth the
masking pipeline is measured against.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Sequence

from .errors import ValidationError
from .question import BeliefChain, ToMQuestion, parse_question, render_question
from .story import Event, Story, split_name_list
from .textnorm import normalize_place

REGROUP_ROOM = "waiting room"

_NAMES = (
    "William", "Lily", "Aiden", "Emma", "Isla", "Benjamin", "Abigail", "Emily",
    "Oliver", "Mia", "Jack", "Sophia", "Noah", "Ava", "Lucas", "Chloe",
)
_ROOMS = (
    "porch", "basement", "front yard", "kitchen", "garden", "attic",
    "lounge", "hall", "patio", "cellar", "workshop", "bedroom",
)
_COLORS = ("green", "blue", "red", "yellow", "purple", "white")
_CONTAINER_KINDS = (
    "bathtub", "pantry", "bucket", "suitcase", "bottle", "crate",
    "box", "basket", "cupboard", "drawer", "envelope", "chest",
)
_OBJECTS = (
    "melon", "watermelon", "beans", "apple", "banana", "toy",
    "ball", "book", "hat", "sock", "coin", "scarf",
)
_DECOYS = ("coat", "plant", "painting", "rug")

_PERSON = r"[A-Z][a-z]+"
_PERSON_LIST = rf"{_PERSON}(?:\s*,\s*{_PERSON})*(?:,? and {_PERSON})?"
_PLACE = r"[\w' -]+"
_ENTER = re.compile(rf"^({_PERSON_LIST}) entered the ({_PLACE})\.$")
_EXIT = re.compile(rf"^({_PERSON}) exited the ({_PLACE})\.$")
_MOVE = re.compile(rf"^({_PERSON}) moved the ({_PLACE}?) to the ({_PLACE})\.$")
_DECLARE = re.compile(rf"^The ({_PLACE}?) is in the ({_PLACE})\.$")
_STAY = re.compile(rf"^({_PERSON}) made no movements and stayed in the ({_PLACE}) for")
_DISTRACT = re.compile(rf"^({_PERSON}) (?:likes|hates) the ({_PLACE})\.$")


@dataclass(frozen=True)
class GrammarConfig:
    """Knobs of the story grammar. max_order cannot exceed num_characters
    because belief chains never repeat a character."""

    num_characters: int = 3
    num_rooms: int = 1
    num_objects: int = 1
    num_containers_per_room: int = 3
    moves_per_room: int = 2
    max_order: int = 2
    seed: int = 0
    allow_reentry: bool = False
    distractor_rate: float = 0.2

    def validate(self) -> None:
        if not 2 <= self.num_characters <= 5:
            raise ValidationError("num_characters must be between 2 and 5")
        if self.num_rooms < 1 or self.num_objects < 1:
            raise ValidationError("need at least one room and one object")
        if self.num_containers_per_room < 2:
            raise ValidationError("need at least two containers per room (something to move to)")
        if self.moves_per_room < 1:
            raise ValidationError("need at least one move per room")
        if not 1 <= self.max_order <= 4:
            raise ValidationError("max_order must be between 1 and 4")
        if self.max_order > self.num_characters:
            raise ValidationError("max_order cannot exceed num_characters")
        if not 0.0 <= self.distractor_rate <= 1.0:
            raise ValidationError("distractor_rate must lie in [0, 1]")


def _name_list(names: Sequence[str]) -> str:
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


def generate_story(config: GrammarConfig) -> tuple[Story, list[ToMQuestion]]:
    """A deterministic story plus one gold-answered question per order."""
    config.validate()
    rng = random.Random(config.seed)

    characters = rng.sample(_NAMES, config.num_characters)
    rooms = rng.sample(_ROOMS, config.num_rooms)
    pool = [f"{color} {kind}" for color in _COLORS for kind in _CONTAINER_KINDS]
    all_containers = rng.sample(pool, config.num_rooms * config.num_containers_per_room)
    objects = rng.sample(_OBJECTS, config.num_objects)

    lines: list[str] = []
    objects_used: list[str] = []
    for ri, room in enumerate(rooms):
        obj = objects[ri % config.num_objects]
        if obj not in objects_used:
            objects_used.append(obj)
        containers = all_containers[
            ri * config.num_containers_per_room : (ri + 1) * config.num_containers_per_room
        ]
        participants = rng.sample(characters, rng.randint(2, len(characters)))

        if rng.random() < 0.5:
            lines.append(f"{_name_list(participants)} entered the {room}.")
        else:
            for name in rng.sample(participants, len(participants)):
                lines.append(f"{name} entered the {room}.")

        first_container = rng.choice(containers)
        lines.append(f"The {obj} is in the {first_container}.")
        if rng.random() < 0.35:
            lines.append(f"The {first_container} is in the {room}.")

        lines.extend(
            _episode_actions(rng, config, room, obj, containers, first_container, participants)
        )
        lines.append(f"{_name_list(participants)} entered the {REGROUP_ROOM}.")

    story = Story(
        events=tuple(Event(index=i, text=text) for i, text in enumerate(lines, start=1)),
        characters=tuple(characters),
        kind="event",
        metadata={"seed": config.seed, "generator": _config_metadata(config)},
    )

    questions: list[ToMQuestion] = []
    for order in range(0, config.max_order + 1):
        obj = rng.choice(objects_used)
        chain = tuple(rng.sample(characters, order))
        gold = simulate_beliefs(story, chain, obj)
        questions.append(parse_question(render_question(chain, obj), story, gold=gold))
    return story, questions


def _episode_actions(rng, config, room, obj, containers, first_container, participants):
    lines: list[str] = []
    exit_line_of: dict[str, int] = {}
    order = rng.sample(participants, len(participants))
    moves_left = config.moves_per_room - 1  # one move is reserved for the last actor
    current = first_container
    for pos, name in enumerate(order):
        if rng.random() < config.distractor_rate:
            thing = rng.choice(list(containers) + list(_DECOYS))
            lines.append(f"{name} {rng.choice(('likes', 'hates'))} the {thing}.")
        last = pos == len(order) - 1
        if last or (moves_left > 0 and rng.random() < 0.6):
            destination = rng.choice([c for c in containers if c != current])
            lines.append(f"{name} moved the {obj} to the {destination}.")
            current = destination
            if not last:
                moves_left -= 1
        else:
            lines.append(f"{name} made no movements and stayed in the {room} for 1 minute.")
        lines.append(f"{name} exited the {room}.")
        exit_line_of[name] = len(lines) - 1

    if config.allow_reentry and len(order) >= 2 and rng.random() < 0.6:
        returner = rng.choice(order[:-1])
        slot = rng.randint(exit_line_of[returner] + 1, len(lines))
        lines.insert(slot, f"{returner} entered the {room}.")
    return lines


def _config_metadata(config: GrammarConfig) -> dict:
    return {
        "num_characters": config.num_characters,
        "num_rooms": config.num_rooms,
        "num_objects": config.num_objects,
        "num_containers_per_room": config.num_containers_per_room,
        "moves_per_room": config.moves_per_room,
        "max_order": config.max_order,
        "allow_reentry": config.allow_reentry,
        "distractor_rate": config.distractor_rate,
    }


# ---------------------------------------------------------------------------
# Oracle: replay the raw text, never the pipeline's records.


class _Trace:
    """Rooms, per-character whereabouts, and object effects per event."""

    def __init__(self, story: Story):
        self.story = story
        self.characters = {c.casefold() for c in story.characters}

        self.rooms: set[str] = set()
        for event in story.events:
            for pattern in (_ENTER, _EXIT):
                m = pattern.match(event.text)
                if m:
                    self.rooms.add(normalize_place(m.group(2)))

        n = len(story.events)
        self.pre: list[dict[str, str | None]] = [dict()] * (n + 1)
        self.post: list[dict[str, str | None]] = [dict()] * (n + 1)
        self.room_of: list[str | None] = [None] * (n + 1)
        self.effects: list[tuple[str, str] | None] = [None] * (n + 1)

        current = {c: None for c in self.characters}
        container_room: dict[str, str] = {}
        parent: dict[str, str] = {}

        # First pass: whereabouts, containment edges, container rooms.
        moves: list[tuple[int, str, str]] = []
        for event in story.events:
            i = event.index
            self.pre[i] = dict(current)
            m = _ENTER.match(event.text)
            if m:
                room = normalize_place(m.group(2))
                for name in split_name_list(m.group(1)):
                    if name.casefold() in self.characters:
                        current[name.casefold()] = room
            m = _EXIT.match(event.text)
            if m and m.group(1).casefold() in self.characters:
                current[m.group(1).casefold()] = None
            m = _MOVE.match(event.text)
            if m:
                obj, dest = m.group(2), m.group(3)
                self.effects[i] = (obj.casefold(), dest)
                parent[obj.casefold()] = normalize_place(dest)
                moves.append((i, m.group(1).casefold(), normalize_place(dest)))
            m = _DECLARE.match(event.text)
            if m:
                obj, container = m.group(1), m.group(2)
                self.effects[i] = (obj.casefold(), container)
                parent[obj.casefold()] = normalize_place(container)
            self.post[i] = dict(current)

        for i, mover, destination in moves:
            room = self.post[i].get(mover)
            if room is not None:
                container_room[destination] = room
        for child, holder in parent.items():
            if holder in self.rooms:
                container_room[child] = holder

        # Second pass: the room where each event takes place.
        previous: str | None = None
        for event in story.events:
            i = event.index
            room: str | None = None
            m = _ENTER.match(event.text)
            if m:
                room = normalize_place(m.group(2))
            elif (m := _EXIT.match(event.text)) is not None:
                room = self.pre[i].get(m.group(1).casefold())
            elif (m := _MOVE.match(event.text)) is not None:
                room = self.post[i].get(m.group(1).casefold())
            elif (m := _STAY.match(event.text)) is not None:
                room = self.post[i].get(m.group(1).casefold())
            elif (m := _DISTRACT.match(event.text)) is not None:
                room = self.post[i].get(m.group(1).casefold())
            elif (m := _DECLARE.match(event.text)) is not None:
                holder = normalize_place(m.group(2))
                if holder in self.rooms:
                    room = holder
                else:
                    room = container_room.get(holder, previous)
            self.room_of[i] = room
            if room is not None:
                previous = room

    def observes(self, name: str, index: int) -> bool:
        room = self.room_of[index]
        if room is None:
            return False
        key = name.casefold()
        return room in (self.pre[index].get(key), self.post[index].get(key))


def observed_set(story: Story, character: str) -> set[int]:
    """Indices of events the character could witness: events in its room,
    arrivals and departures included on both sides of the door."""
    if not story.has_character(character):
        raise ValidationError(f"{character!r} is not a character of the story")
    trace = _Trace(story)
    return {i for i in range(1, len(story.events) + 1) if trace.observes(character, i)}


def _chain_names(chain) -> tuple[str, ...]:
    if chain is None:
        return ()
    if isinstance(chain, BeliefChain):
        return chain.characters
    return tuple(chain)


def _checked_trace(story: Story, names: tuple[str, ...]) -> _Trace:
    trace = _Trace(story)
    for name in names:
        if name.casefold() not in trace.characters:
            raise ValidationError(f"{name!r} is not a character of the story")
    return trace


def _fold_beliefs(trace: _Trace, names: tuple[str, ...]) -> list[dict[str, str]]:
    beliefs: list[dict[str, str]] = [dict() for _ in range(len(names) + 1)]
    for i in range(1, len(trace.story.events) + 1):
        effect = trace.effects[i]
        if effect is None:
            continue
        obj, container = effect
        for j in range(len(names) + 1):
            if all(trace.observes(names[jj], i) for jj in range(j)):
                beliefs[j][obj] = container
            else:
                break
    return beliefs


def belief_store(story: Story, chain) -> list[dict[str, str]]:
    """Believed containment maps per chain prefix; index j holds the beliefs
    attributed to the prefix of length j (j=0 is the true world).

    An event updates prefix j exactly when all of its j characters witnessed
    the event, so the update sets shrink as the prefix grows.
    """
    names = _chain_names(chain)
    return _fold_beliefs(_checked_trace(story, names), names)


def simulate_beliefs(story: Story, chain, entity: str) -> str:
    """Gold answer: where the belief chain thinks the entity is after the
    last event, falling back to its first declared container when the chain
    never witnessed an update."""
    names = _chain_names(chain)
    key = entity.casefold()
    trace = _checked_trace(story, names)
    first = next(
        (trace.effects[i][1] for i in range(1, len(story.events) + 1)
         if trace.effects[i] is not None and trace.effects[i][0] == key),
        None,
    )
    if first is None:
        raise ValidationError(f"{entity!r} is never placed anywhere in the story")
    beliefs = _fold_beliefs(trace, names)
    return beliefs[len(names)].get(key, first)
