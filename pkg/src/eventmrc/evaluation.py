"""Micro precision/recall/F1 for events and arguments, and the JSON report."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict

REPORT_SCHEMA = "eex-report/1"


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class MetricTriple:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "MetricTriple":
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ArgPrediction:
    sentence_id: str
    event: str
    role: str
    span: tuple[int, int] | None  # character offsets, end-exclusive


def gold_events(records) -> dict[str, set[str]]:
    return {r.id: r.event_types for r in records}


def micro_prf(pred: dict, gold: dict) -> MetricTriple:
    """TP/FP/FN over (sentence, event) pairs pooled across sentences."""
    if set(pred) != set(gold):
        missing = sorted(set(gold) ^ set(pred))[:5]
        raise EvaluationError(f"sentence id universes differ (e.g. {missing})")
    tp = fp = fn = 0
    for sid, g in gold.items():
        p = set(pred[sid])
        g = set(g)
        tp += len(p & g)
        fp += len(p - g)
        fn += len(g - p)
    return MetricTriple.from_counts(tp, fp, fn)


def _gold_args(records):
    return {
        (r.id, m.type, role, span.start, span.end)
        for r in records for m in r.events for role, span in m.arguments
    }


def score_arguments(preds, records, mode: str = "gold-events", event_preds: dict | None = None) -> MetricTriple:
    """Exact-match argument scoring.

    A prediction counts as correct iff event, role and character span all match a
    gold argument. In "predicted-events" mode only predictions for events in
    ``event_preds`` are kept, so arguments of missed events become false negatives.
    """
    if mode not in ("gold-events", "predicted-events"):
        raise EvaluationError(f"unknown mode {mode!r}")
    ids = {r.id for r in records}
    if mode == "predicted-events":
        if event_preds is None:
            raise EvaluationError("predicted-events mode needs event predictions")
        if set(event_preds) != ids:
            raise EvaluationError("event predictions and gold records cover different sentences")
    predicted = set()
    for p in preds:
        if p.sentence_id not in ids:
            raise EvaluationError(f"prediction for unknown sentence {p.sentence_id!r}")
        if p.span is None:
            continue
        if mode == "predicted-events" and p.event not in event_preds[p.sentence_id]:
            continue
        predicted.add((p.sentence_id, p.event, p.role, p.span[0], p.span[1]))
    gold = _gold_args(records)
    tp = len(predicted & gold)
    return MetricTriple.from_counts(tp, len(predicted) - tp, len(gold) - tp)


def _jaccard(a, b) -> float:
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union else 0.0


def score_arguments_overlap(preds, records, min_jaccard: float = 0.5) -> MetricTriple:
    """Lenient companion metric: character Jaccard >= min_jaccard counts as a hit.

    Each gold argument is matched at most once. Reported next to, never instead
    of, the exact-match score.
    """
    gold = {}
    for sid, ev, role, s, e in sorted(_gold_args(records)):
        gold.setdefault((sid, ev, role), []).append((s, e))
    tp = fp = 0
    used = set()
    for p in preds:
        if p.span is None:
            continue
        key = (p.sentence_id, p.event, p.role)
        hit = None
        for k, g in enumerate(gold.get(key, [])):
            if (key, k) not in used and _jaccard(p.span, g) >= min_jaccard:
                hit = (key, k)
                break
        if hit:
            used.add(hit)
            tp += 1
        else:
            fp += 1
    n_gold = sum(len(v) for v in gold.values())
    return MetricTriple.from_counts(tp, fp, n_gold - tp)


def stable_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, ensure_ascii=False, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def emit_report(methods=(), config: dict | None = None, ontology_hash: str | None = None,
                extra: dict | None = None) -> dict:
    """Assemble the versioned report document. No timestamps, so reruns are byte-identical."""
    report = {
        "schema": REPORT_SCHEMA,
        "config_hash": stable_hash(config or {}),
        "ontology_hash": ontology_hash,
        "config": config or {},
        "methods": list(methods),
    }
    if extra:
        report.update(extra)
    return report


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def render_table(report: dict) -> str:
    """Plain-text table: method, threshold, P, R, F1, p-value."""
    rows = [("Method", "Threshold", "Precision", "Recall", "F1", "p-value")]
    for m in report.get("methods", []):
        met = m.get("metrics") or {}
        thr = m.get("threshold")
        pv = m.get("p_value")
        rows.append((
            str(m.get("name", "?")),
            "-" if thr is None else f"{thr:.2f}",
            f"{100 * met.get('precision', 0):.2f}",
            f"{100 * met.get('recall', 0):.2f}",
            f"{100 * met.get('f1', 0):.2f}" + (f" ± {100 * m['f1_std']:.2f}" if "f1_std" in m else ""),
            "-" if pv is None else f"{pv:.3g}",
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"
