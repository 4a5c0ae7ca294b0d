"""Event/argument schema and the natural-language assets used to build queries."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

PLACEHOLDERS = ("[EVENT]", "[ARGUMENT]", "[TRIGGER]", "[MASK]")


class OntologyError(ValueError):
    """Raised when an ontology file is malformed or violates a schema invariant."""


class UnknownEventError(KeyError):
    pass


@dataclass(frozen=True)
class ArgumentRole:
    role: str
    guide_question: str | None = None


@dataclass(frozen=True)
class EventType:
    name: str
    description: tuple[str, ...] = ()
    argument_roles: tuple[ArgumentRole, ...] = ()

    @property
    def role_names(self) -> list[str]:
        return [r.role for r in self.argument_roles]

    def role(self, name: str) -> ArgumentRole:
        for r in self.argument_roles:
            if r.role == name:
                return r
        raise KeyError(f"event {self.name!r} has no role {name!r}")


@dataclass(frozen=True)
class Ontology:
    events: tuple[EventType, ...]
    version: str = "1"
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        _validate(self)
        object.__setattr__(self, "_index", {e.name: e for e in self.events})

    def __len__(self) -> int:
        return len(self.events)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @property
    def event_names(self) -> list[str]:
        return [e.name for e in self.events]

    def event(self, name: str) -> EventType:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownEventError(f"unknown event type {name!r}") from None

    def index_of(self, name: str) -> int:
        return self.event_names.index(self.event(name).name)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "events": [
                {
                    "name": e.name,
                    "description": list(e.description),
                    "arguments": [
                        {"role": r.role, "guide_question": r.guide_question}
                        for r in e.argument_roles
                    ],
                }
                for e in self.events
            ],
        }

    def content_hash(self) -> str:
        """sha256 over the canonical JSON form; recorded in reports."""
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def _validate(onto: Ontology) -> None:
    if len(onto.events) < 1:
        raise OntologyError("ontology must declare at least one event type")
    seen = set()
    for ev in onto.events:
        if not isinstance(ev.name, str) or not ev.name.strip():
            raise OntologyError("event name must be a non-empty string")
        if ev.name != ev.name.strip():
            raise OntologyError(f"event name {ev.name!r} has surrounding whitespace")
        if ev.name in seen:
            raise OntologyError(f"duplicate event name {ev.name!r}")
        seen.add(ev.name)
        for sent in ev.description:
            if not isinstance(sent, str) or "\n" in sent or "\r" in sent:
                raise OntologyError(f"description of {ev.name!r} must be single-line strings")
        roles = set()
        for r in ev.argument_roles:
            if not isinstance(r.role, str) or not r.role.strip() or r.role != r.role.strip():
                raise OntologyError(f"bad role label {r.role!r} under {ev.name!r}")
            if r.role in roles:
                raise OntologyError(f"duplicate role {r.role!r} under {ev.name!r}")
            roles.add(r.role)
            q = r.guide_question
            if q is not None:
                if not isinstance(q, str) or not q.strip().endswith("?"):
                    raise OntologyError(f"guide question for {ev.name}/{r.role} must end with '?'")
                if any(p in q for p in PLACEHOLDERS):
                    raise OntologyError(f"guide question for {ev.name}/{r.role} contains a placeholder")


def ontology_from_dict(data: dict) -> Ontology:
    if not isinstance(data, dict) or not isinstance(data.get("events"), list):
        raise OntologyError("ontology JSON must be an object with an 'events' list")
    events = []
    for raw in data["events"]:
        try:
            args = tuple(
                ArgumentRole(a["role"], a.get("guide_question")) for a in raw.get("arguments", [])
            )
            events.append(EventType(raw["name"], tuple(raw.get("description", [])), args))
        except (KeyError, TypeError, AttributeError) as exc:
            raise OntologyError(f"malformed event entry {raw!r}: {exc}") from None
    return Ontology(tuple(events), str(data.get("version", "1")))


def load_ontology(path) -> Ontology:
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("﻿"):
        raise OntologyError("ontology file must not start with a BOM")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OntologyError(f"cannot parse {path}: {exc}") from exc
    return ontology_from_dict(data)


def save_ontology(onto: Ontology, path) -> None:
    Path(path).write_text(
        json.dumps(onto.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def roles_for(onto: Ontology, event: str) -> list[ArgumentRole]:
    return list(onto.event(event).argument_roles)


def builtin_ontology_path() -> Path:
    """Path of the 6-event ontology bundled for the synthetic corpus."""
    return Path(__file__).parent / "data" / "synthetic_ontology.json"
