"""Sentence records, JSONL I/O, split statistics and a templated synthetic corpus."""
from __future__ import annotations

import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .ontology import Ontology

SPLITS = ("train", "dev", "test")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    text: str

    def check(self, sentence: str) -> None:
        if not (0 <= self.start < self.end <= len(sentence)):
            raise CorpusError(
                f"offset out of range: [{self.start},{self.end}) in sentence of length {len(sentence)}"
            )
        if sentence[self.start:self.end] != self.text:
            raise CorpusError(
                f"text mismatch: span says {self.text!r}, sentence slice is "
                f"{sentence[self.start:self.end]!r}"
            )

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "text": self.text}


@dataclass(frozen=True)
class EventMention:
    type: str
    trigger: Span | None = None
    arguments: tuple[tuple[str, Span], ...] = ()

    def spans_for(self, role: str) -> list[Span]:
        return [s for r, s in self.arguments if r == role]


@dataclass(frozen=True)
class SentenceRecord:
    id: str
    text: str
    events: tuple[EventMention, ...] = ()
    split: str = "train"

    @property
    def event_types(self) -> set[str]:
        return {m.type for m in self.events}

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "split": self.split,
            "events": [
                {
                    "type": m.type,
                    "trigger": m.trigger.to_dict() if m.trigger else None,
                    "arguments": [{"role": r, **s.to_dict()} for r, s in m.arguments],
                }
                for m in self.events
            ],
        }


@dataclass(frozen=True)
class SplitCounts:
    sentences: int = 0
    events: int = 0
    arguments: int = 0

    def __add__(self, other: "SplitCounts") -> "SplitCounts":
        return SplitCounts(
            self.sentences + other.sentences,
            self.events + other.events,
            self.arguments + other.arguments,
        )


@dataclass(frozen=True)
class CorpusStats:
    total: SplitCounts
    by_split: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total": vars(self.total),
            "by_split": {k: vars(v) for k, v in sorted(self.by_split.items())},
        }


def label_vector(record: SentenceRecord, ontology: Ontology) -> list[int]:
    """Binary event-presence vector of length m (OR over mentions)."""
    present = record.event_types
    return [int(name in present) for name in ontology.event_names]


def record_from_dict(raw: dict, ontology: Ontology | None = None) -> SentenceRecord:
    try:
        text = raw["text"]
        split = raw.get("split", "train")
        if split not in SPLITS:
            raise CorpusError(f"record {raw.get('id')!r}: bad split {split!r}")
        mentions = []
        for ev in raw.get("events", []):
            etype = ev["type"]
            if ontology is not None and etype not in ontology:
                raise CorpusError(f"record {raw['id']!r}: unknown event label {etype!r}")
            trig = ev.get("trigger")
            trigger = Span(trig["start"], trig["end"], trig["text"]) if trig else None
            if trigger:
                trigger.check(text)
            args = []
            for a in ev.get("arguments", []):
                if ontology is not None and a["role"] not in ontology.event(etype).role_names:
                    raise CorpusError(
                        f"record {raw['id']!r}: unknown role {a['role']!r} for {etype!r}"
                    )
                span = Span(a["start"], a["end"], a["text"])
                span.check(text)
                args.append((a["role"], span))
            mentions.append(EventMention(etype, trigger, tuple(args)))
        return SentenceRecord(str(raw["id"]), text, tuple(mentions), split)
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"malformed record {raw!r}: {exc}") from None


def load_corpus(path, ontology: Ontology | None = None) -> list[SentenceRecord]:
    records = []
    ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            try:
                rec = record_from_dict(raw, ontology)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from None
            if rec.id in ids:
                raise CorpusError(f"{path}:{lineno}: duplicate id {rec.id!r}")
            ids.add(rec.id)
            records.append(rec)
    return records


def dumps_records(records) -> str:
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in records)


def save_corpus(records, path) -> None:
    Path(path).write_text(dumps_records(records), encoding="utf-8")


def compute_stats(records) -> CorpusStats:
    by_split = {}
    for r in records:
        c = SplitCounts(1, len(r.events), sum(len(m.arguments) for m in r.events))
        by_split[r.split] = by_split.get(r.split, SplitCounts()) + c
    total = SplitCounts()
    for c in by_split.values():
        total = total + c
    return CorpusStats(total, by_split)


def by_split(records, split: str) -> list[SentenceRecord]:
    return [r for r in records if r.split == split]


# --- synthetic corpus -------------------------------------------------------

# Mixture of sentences carrying 0, 1 and 2 events.
MIXTURE = {0: 0.30, 1: 0.60, 2: 0.10}
SPLIT_WEIGHTS = (4, 1, 1)

_PEOPLE = [
    "John Smith", "Maria Lopez", "Ahmed Khan", "Li Wei", "Anna Berg", "David Cohen",
    "Sara Ito", "Omar Haddad", "Elena Rossi", "Peter Novak", "Grace Kim", "Lucas Moreau",
]
_ORGS = [
    "the rebels", "the army", "Acme Corp", "the United Bank", "Globex", "the city council",
    "the Red Cross", "Initech", "the ministry", "Northwind",
]
_PLACES = [
    "Paris", "Baghdad", "Tokyo", "Nairobi", "Lima", "Oslo", "Cairo", "Denver",
    "the Persian Gulf region", "Kabul", "Madrid", "Seoul",
]
_DAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]
_MONEY = ["$5 million", "$200", "10,000 euros", "$3 billion", "$75,000", "2 million dollars"]
_ARTIFACTS = [
    "the troops", "the weapons", "the cargo", "medical supplies", "the refugees",
    "the equipment", "food aid",
]
_OFFICIANTS = ["a priest", "the mayor", "a judge", "a rabbi"]
_TARGETS = ["the embassy", "a convoy", "the village", "a police station"]

_FILLERS = {
    "Person": _PEOPLE,
    "Place": _PLACES,
    "Time": _DAYS,
    "Officiant": _OFFICIANTS,
    "Attacker": _ORGS + _PEOPLE[:4],
    "Target": _TARGETS + _PEOPLE[4:8],
    "Artifact": _ARTIFACTS,
    "Destination": _PLACES,
    "Origin": _PLACES,
    "Entity": _ORGS,
    "Giver": _PEOPLE[:6] + _ORGS[:4],
    "Recipient": _PEOPLE[6:] + _ORGS[4:],
    "Money": _MONEY,
}

# {Role} marks an annotated argument slot, <word> marks the trigger.
_TEMPLATES = {
    "Marry": [
        "{Person} will <marry> in {Place} on {Time}, and {Officiant} will lead the ceremony.",
        "{Person} <wed> in {Place} on {Time}.",
        "On {Time}, {Officiant} helped {Person} <marry> in {Place}.",
        "{Person} <wed> in {Place}.",
    ],
    "Attack": [
        "{Attacker} launched an <attack> on {Target} in {Place}.",
        "{Attacker} <bombed> {Target} near {Place}.",
        "{Target} came under <attack> by {Attacker} outside {Place}.",
        "{Attacker} <bombed> {Target}.",
    ],
    "Transport": [
        "{Artifact} were <moved> from {Origin} to {Destination}.",
        "Officials arranged the <transport> of {Artifact} to {Destination}.",
        "The <transport> of {Artifact} from {Origin} to {Destination} ended.",
        "Crews <moved> {Artifact} to {Destination} from {Origin}.",
    ],
    "Be-Born": [
        "{Person} was <born> in {Place}.",
        "{Person}, <born> in {Place}, grew up poor.",
        "Records show {Person} was <born> at a hospital in {Place}.",
    ],
    "Start-Position": [
        "{Entity} <hired> {Person}.",
        "{Person} will <start> a new position at {Entity}.",
        "{Person} took up the <position> of director at {Entity}.",
    ],
    "Transfer-Money": [
        "{Giver} made a <transfer> of {Money} to {Recipient}.",
        "{Recipient} was <lent> {Money} by {Giver}.",
        "{Giver} <lent> {Recipient} {Money}.",
    ],
}

_NEUTRAL = [
    "{P} spoke to reporters in {G} on {D}.",
    "{O} released a statement about the weather.",
    "The meeting in {G} ended without agreement.",
    "{P} visited a museum in {G}.",
    "Prices in {G} stayed flat on {D}, {O} said.",
    "{P} criticized {O} for the delays.",
]

_DISTRACTORS = [
    ", {P} said.",
    ", {P} said on {D}.",
    ", officials in {G} reported on {D}.",
    ", according to {O}.",
]

_SLOT = re.compile(r"\{(\w+)\}|<([^>]+)>")


def _generic_templates(event) -> list[str]:
    roles = event.role_names
    word = event.name.lower()
    slots = " ".join(f"with {{{r}}}" for r in roles[1:])
    head = f"{{{roles[0]}}}" if roles else "Someone"
    tail = f" {slots}" if slots else ""
    return [f"{head} took part in the <{word}>{tail}."]


def _generic_fillers(role: str) -> list[str]:
    return _FILLERS.get(role) or [f"the {role.lower()} {c}" for c in ("Alpha", "Beta", "Gamma", "Delta")]


def _templates_for(event) -> list[str]:
    bank = _TEMPLATES.get(event.name)
    if bank:
        roles = set(event.role_names)
        usable = [t for t in bank if {m.group(1) for m in _SLOT.finditer(t) if m.group(1)} <= roles]
        if usable:
            return usable
    return _generic_templates(event)


def _render(template: str, fill, offset: int, capitalize: bool = False):
    """Render a template, returning text, trigger span and argument spans.

    ``capitalize`` upper-cases a filler that opens the sentence.
    """
    out = []
    pos = offset
    trigger = None
    args = []
    last = 0
    for m in _SLOT.finditer(template):
        lit = template[last:m.start()]
        out.append(lit)
        pos += len(lit)
        if m.group(1):
            value = fill(m.group(1))
            if capitalize and pos == 0:
                value = value[:1].upper() + value[1:]
            args.append((m.group(1), Span(pos, pos + len(value), value)))
        else:
            value = m.group(2)
            trigger = Span(pos, pos + len(value), value)
        out.append(value)
        pos += len(value)
        last = m.end()
    out.append(template[last:])
    return "".join(out), trigger, args


@dataclass
class SyntheticCorpus:
    records: list
    tally: Counter


def _neutral_fill(rng):
    picks = {"P": _PEOPLE, "G": _PLACES, "D": _DAYS, "O": _ORGS}
    return lambda slot: rng.choice(picks[slot])


def _plain(template: str, rng) -> str:
    fill = _neutral_fill(rng)
    text = _SLOT.sub(lambda m: fill(m.group(1)), template)
    return text[:1].upper() + text[1:] if template[0] == "{" else text


def _split_sizes(n: int) -> list[int]:
    total = sum(SPLIT_WEIGHTS)
    train = round(n * SPLIT_WEIGHTS[0] / total)
    dev = round(n * SPLIT_WEIGHTS[1] / total)
    return [train, dev, n - train - dev]


def synthesize(ontology: Ontology, n: int, seed: int, distractor_rate: float = 0.4) -> SyntheticCorpus:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not any(e.argument_roles for e in ontology.events):
        raise ValueError("synthetic generation needs at least one event with a role")
    rng = random.Random(seed)
    events = list(ontology.events)
    sizes = _split_sizes(n)
    split_of = [s for s, k in zip(SPLITS, sizes) for _ in range(k)]
    tally = Counter()
    records = []
    counts, weights = zip(*sorted(MIXTURE.items()))
    for i in range(n):
        k = rng.choices(counts, weights)[0]
        k = min(k, len(events))
        chosen = rng.sample(events, k)
        text = ""
        mentions = []
        if k == 0:
            text = _plain(rng.choice(_NEUTRAL), rng)
        for j, ev in enumerate(chosen):
            if j:
                text = text[:-1] + ", and later "
            template = rng.choice(_templates_for(ev))
            if j and template[0] != "{":
                template = template[0].lower() + template[1:]
            pools = {r: _generic_fillers(r) for r in ev.role_names}
            clause, trigger, args = _render(template, lambda r: rng.choice(pools[r]), len(text), capitalize=not j)
            text += clause
            mentions.append(EventMention(ev.name, trigger, tuple(args)))
            tally[ev.name] += 1
            tally["arguments"] += len(args)
        if k and rng.random() < distractor_rate:
            text = text[:-1] + _plain(rng.choice(_DISTRACTORS), rng)
        tally[f"k={k}"] += 1
        tally["events"] += k
        records.append(SentenceRecord(f"syn{seed}-{i:06d}", text, tuple(mentions), split_of[i]))
    tally["sentences"] = n
    return SyntheticCorpus(records, tally)


def generate_synthetic(ontology: Ontology, n: int, seed: int) -> list[SentenceRecord]:
    return synthesize(ontology, n, seed).records
