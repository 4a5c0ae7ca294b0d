"""Compile ontology entries into entailment statements, questions and masked probes."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .corpus import SentenceRecord
from .ontology import EventType, Ontology

MASK = "[MASK]"

STATEMENT = "Hence, an event about {event} happened."
ARG_TEMPLATE_Q = "Who or what participated as role {role} in the event {event}?"
ARG_TRIG_Q = "What is the {role} in {trigger}?"
ARG_TRIG_PLUS_Q = "What is the {role} in event {event} triggered by '{trigger}'?"
TRIGGER_Q = "What is the trigger for {event}?"
POLAR_Q = "Did any event about {event} happen?"


class QueryError(ValueError):
    pass


class QueryKind(str, enum.Enum):
    TE_STATEMENT = "TE_STATEMENT"
    ARG_TEMPLATE = "ARG_TEMPLATE"
    ARG_GUIDE = "ARG_GUIDE"
    ARG_TRIG = "ARG_TRIG"
    ARG_TRIG_PLUS = "ARG_TRIG_PLUS"
    EVENT_TRIGGER_QA = "EVENT_TRIGGER_QA"
    PQ_EVENT = "PQ_EVENT"
    MTP_TE = "MTP_TE"
    MTP_QA = "MTP_QA"

    @property
    def is_argument(self) -> bool:
        return self.name.startswith("ARG_")

    @property
    def is_masked(self) -> bool:
        return self.name.startswith("MTP_")

    @property
    def needs_trigger(self) -> bool:
        return self in (QueryKind.ARG_TRIG, QueryKind.ARG_TRIG_PLUS)


ARG_KINDS = tuple(k for k in QueryKind if k.is_argument)
EVENT_KINDS = (QueryKind.TE_STATEMENT, QueryKind.PQ_EVENT, QueryKind.EVENT_TRIGGER_QA)


@dataclass(frozen=True)
class QueryInstance:
    sentence_id: str
    query_text: str
    kind: QueryKind
    event: str
    role: str | None = None
    mask_slot: tuple[int, int] | None = None

    def __post_init__(self):
        if (self.role is not None) != self.kind.is_argument:
            raise QueryError(f"role must be set exactly for argument kinds ({self.kind.name})")
        if (self.mask_slot is not None) != self.kind.is_masked:
            raise QueryError(f"mask_slot must be set exactly for MTP kinds ({self.kind.name})")

    def to_dict(self) -> dict:
        start, end = self.mask_slot if self.mask_slot else (None, None)
        return {
            "sentence_id": self.sentence_id,
            "kind": self.kind.value,
            "event": self.event,
            "role": self.role,
            "query_text": self.query_text,
            "mask_start": start,
            "mask_end": end,
        }


def _name(event) -> str:
    name = event.name if isinstance(event, EventType) else event
    if not name or not name.strip():
        raise QueryError("event name must be non-empty")
    return name


def make_event_statement(event: EventType, max_desc_sentences: int = 0) -> str:
    if max_desc_sentences < 0:
        raise QueryError("max_desc_sentences must be >= 0")
    text = STATEMENT.format(event=_name(event))
    desc = event.description[:max_desc_sentences] if isinstance(event, EventType) else ()
    if desc:
        text += " " + " ".join(desc)
    return text


def make_arg_question(event: EventType, role: str, kind: QueryKind, trigger: str | None = None) -> str:
    name = _name(event)
    kind = QueryKind(kind)
    if not kind.is_argument:
        raise QueryError(f"{kind.name} is not an argument query kind")
    if kind.needs_trigger and not trigger:
        raise QueryError(f"{kind.name} needs a trigger")
    if kind is QueryKind.ARG_TEMPLATE:
        return ARG_TEMPLATE_Q.format(role=role, event=name)
    if kind is QueryKind.ARG_GUIDE:
        q = event.role(role).guide_question if isinstance(event, EventType) else None
        if not q:
            raise QueryError(f"no guide question for {name}/{role}")
        return q
    if kind is QueryKind.ARG_TRIG:
        return ARG_TRIG_Q.format(role=role, trigger=trigger)
    return ARG_TRIG_PLUS_Q.format(role=role, event=name, trigger=trigger)


def make_event_trigger_question(event) -> str:
    return TRIGGER_Q.format(event=_name(event))


def make_polar_question(event) -> str:
    return POLAR_Q.format(event=_name(event))


def make_masked_query(kind: QueryKind, sentence_id: str = "", event: str = "") -> QueryInstance:
    """Masked probe; `event` is only carried along for bookkeeping."""
    kind = QueryKind(kind)
    if kind is QueryKind.MTP_TE:
        text = STATEMENT.format(event=MASK)
    elif kind is QueryKind.MTP_QA:
        text = POLAR_Q.format(event=MASK)
    else:
        raise QueryError(f"{kind.name} is not a masked kind")
    start = text.index(MASK)
    return QueryInstance(sentence_id, text, kind, event, mask_slot=(start, start + len(MASK)))


def expand_queries(record: SentenceRecord, ontology: Ontology, kinds, max_desc_sentences: int = 0,
                   events=None) -> list[QueryInstance]:
    """All queries for one sentence.

    Event-level kinds yield one query per ontology event. Argument kinds yield one
    query per (event mention, role); `events` overrides the gold mentions with
    predicted event labels (trigger-based kinds are skipped for those, having no trigger).
    """
    kinds = [QueryKind(k) for k in kinds]
    out = []
    for kind in kinds:
        if kind.is_argument:
            continue
        for ev in ontology.events:
            if kind is QueryKind.TE_STATEMENT:
                text = make_event_statement(ev, max_desc_sentences)
            elif kind is QueryKind.PQ_EVENT:
                text = make_polar_question(ev)
            elif kind is QueryKind.EVENT_TRIGGER_QA:
                text = make_event_trigger_question(ev)
            else:
                out.append(make_masked_query(kind, record.id, ev.name))
                continue
            out.append(QueryInstance(record.id, text, kind, ev.name))
    arg_kinds = [k for k in kinds if k.is_argument]
    if arg_kinds:
        if events is None:
            targets = [(m.type, m.trigger.text if m.trigger else None) for m in record.events]
        else:
            targets = [(e, None) for e in events]
        order = {name: i for i, name in enumerate(ontology.event_names)}
        targets = sorted(targets, key=lambda t: order[t[0]])
        for kind in arg_kinds:
            for etype, trigger in targets:
                if kind.needs_trigger and trigger is None:
                    continue
                ev = ontology.event(etype)
                for role in ev.role_names:
                    text = make_arg_question(ev, role, kind, trigger)
                    out.append(QueryInstance(record.id, text, kind, etype, role))
    return out
