"""Remote chat-model backends: HTTP client, prompt filling, record cache.

The wire format is the ubiquitous JSON chat-completion shape: POST
``{base_url}/chat/completions`` with a model name, a single user message, and
temperature 0 for reproducibility. The bearer token is read from an
environment variable. A custom ``transport`` callable can stand in for the
network (tests use this; so can offline replay).
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import BackendError, ExtractionError, ProtocolError
from .nkb import BackendInfo, EntityAttribute
from .story import Story

log = logging.getLogger(__name__)

API_KEY_ENV = "MINDMASK_API_KEY"

_RECORD_LINE = re.compile(
    r"^\s*-?\s*\[?\s*(?:event\s*)?(\d+)\s*\]?\s*:\s*(.+?)\s+of\s+(.+?)\s+becomes\s+(.+?)\s*\.?\s*$",
    re.IGNORECASE,
)
_BULLET_LINE = re.compile(r"^\s*-\s*(.+?)\s*$")
_ENTITIES_BLOCK = re.compile(r"<entities>(.*?)</entities>", re.IGNORECASE | re.DOTALL)


def load_prompt(name: str) -> str:
    return resources.files("mindmask").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")


def fill_prompt(template: str, slots: dict[str, str]) -> str:
    out = template
    for key, value in slots.items():
        out = out.replace("{{" + key + "}}", value)
    return out


def indexed_narrative(story: Story) -> str:
    lines = []
    for e in story.events:
        prefix = f"{e.speaker}: " if e.speaker else ""
        lines.append(f"{e.index}: {prefix}{e.text}")
    return "\n".join(lines)


def _default_transport(url: str, headers: dict, payload: dict, timeout: float) -> dict:
    request = urllib.request.Request(
        url, data=json.dumps(payload).encode("utf-8"), headers=headers, method="POST"
    )
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        body = exc.read().decode("utf-8", "replace")
        raise BackendError(f"chat endpoint returned HTTP {exc.code}", raw_response=body) from exc
    except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
        raise BackendError(f"chat endpoint unreachable: {exc}") from exc


@dataclass
class ChatClient:
    """Minimal chat-completion client (greedy decoding, temperature 0)."""

    base_url: str
    model: str
    api_key_env: str = API_KEY_ENV
    temperature: float = 0.0
    timeout: float = 120.0
    transport: object = None

    def complete(self, prompt: str) -> str:
        url = self.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        transport = self.transport or _default_transport
        data = transport(url, headers, payload, self.timeout)
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(
                "malformed chat response", raw_response=json.dumps(data)[:2000]
            ) from exc


def _targets_key(targets: list[EntityAttribute]) -> str:
    rendered = "\n".join(sorted(t.render().casefold() for t in targets))
    return hashlib.sha256(rendered.encode("utf-8")).hexdigest()[:16]


class RecordCache:
    """JSONL record lists keyed by (story, targets, backend name)."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, story: Story, targets, backend_name: str) -> Path:
        safe = re.sub(r"[^\w.-]", "_", backend_name)
        return self.directory / f"{story.key()}-{_targets_key(targets)}-{safe}.jsonl"

    def load(self, story, targets, backend_name) -> list[dict] | None:
        path = self._path(story, targets, backend_name)
        if not path.exists():
            return None
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]

    def store(self, story, targets, backend_name, rows: list[dict]) -> None:
        path = self._path(story, targets, backend_name)
        path.write_text("".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8")


class RemoteBackend:
    """State backend that queries a chat model with the shipped prompts.

    State generation is one prompt per (story, targets) pair; the response
    lists records for every event index at once, so the per-event protocol is
    served from the parsed buckets. Responses are cached when a cache is
    configured, keyed by story, targets, and backend name.
    """

    def __init__(self, client: ChatClient, cache: RecordCache | None = None):
        self.client = client
        self.cache = cache
        self.info = BackendInfo(name=f"remote:{client.model}", deterministic=False)
        self.skipped_lines = 0
        self._buckets: dict[tuple[str, str], dict[int, list]] = {}

    # -- StateBackend protocol ------------------------------------------------

    def key_entities(self, story, questions):
        prompt = fill_prompt(
            load_prompt("key_entities"),
            {
                "indexed narrative": indexed_narrative(story),
                "question list": "\n".join(f"- {q.raw}" for q in questions),
            },
        )
        response = self.client.complete(prompt)
        block = _ENTITIES_BLOCK.search(response)
        body = block.group(1) if block else response
        pairs = []
        for line in body.splitlines():
            m = _BULLET_LINE.match(line)
            if not m or " of " not in m.group(1):
                continue
            attribute, entity = m.group(1).split(" of ", 1)
            pairs.append(EntityAttribute(entity=entity.strip(), attribute=attribute.strip()))
        if not pairs:
            raise ExtractionError(f"no entity pairs in backend response: {response[:500]!r}")
        return pairs

    def location_names(self, story):
        prompt = fill_prompt(
            load_prompt("extract_locations"),
            {"indexed narrative": indexed_narrative(story)},
        )
        response = self.client.complete(prompt)
        names = [m.group(1) for m in map(_BULLET_LINE.match, response.splitlines()) if m]
        if not names:
            raise ExtractionError(f"no rooms in backend response: {response[:500]!r}")
        return names

    def event_states(self, story, index, targets):
        buckets = self._records(story, targets)
        return buckets.get(index, [])

    # -- internals -------------------------------------------------------------

    def _records(self, story, targets) -> dict[int, list]:
        key = (story.key(), _targets_key(targets))
        if key in self._buckets:
            return self._buckets[key]

        rows = self.cache.load(story, targets, self.info.name) if self.cache else None
        if rows is None:
            prompt = fill_prompt(
                load_prompt("generate_states"),
                {
                    "indexed narrative": indexed_narrative(story),
                    "eoi list": "\n".join(f"- {t.render()}" for t in targets),
                },
            )
            response = self.client.complete(prompt)
            rows = self._parse_records(response, len(story.events))
            if self.cache:
                self.cache.store(story, targets, self.info.name, rows)

        buckets: dict[int, list] = {}
        for row in rows:
            index = int(row["event_index"])
            if not 1 <= index <= len(story.events):
                raise ProtocolError(f"backend asserted a state for unknown event {index}")
            buckets.setdefault(index, []).append((row["entity"], row["attribute"], row["state"]))
        self._buckets[key] = buckets
        return buckets

    def _parse_records(self, response: str, num_events: int) -> list[dict]:
        rows = []
        for line in response.splitlines():
            if not line.strip():
                continue
            m = _RECORD_LINE.match(line)
            if m:
                rows.append(
                    {
                        "event_index": int(m.group(1)),
                        "attribute": m.group(2).strip(),
                        "entity": m.group(3).strip(),
                        "state": m.group(4).strip(),
                    }
                )
            elif line.lstrip().startswith("-"):
                self.skipped_lines += 1
                log.warning("skipping unparseable record line: %r", line.strip())
        return rows


class RemoteAnswerer:
    """Final QA step against a chat model; answers come back in answer tags."""

    def __init__(self, client: ChatClient):
        self.client = client
        self.name = f"remote:{client.model}"

    def answer(self, view, question, space) -> str:
        candidates = ""
        if space:
            candidates = "Choose one of: " + ", ".join(space) + ".\n"
        prompt = fill_prompt(
            load_prompt("answer_question"),
            {
                "events": "\n".join(view.texts),
                "question": question.raw,
                "candidates": candidates,
            },
        )
        return self.client.complete(prompt)


def transform_question(text: str, story: Story, client: ChatClient):
    """Rewrite an unsupported question with the model, then rule-parse it."""
    from .question import parse_question

    prompt = fill_prompt(load_prompt("reduce_question"), {"question": text.strip()})
    response = _first_line(client.complete(prompt))
    return parse_question(response, story)


def _first_line(text: str) -> str:
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    return text.strip()
