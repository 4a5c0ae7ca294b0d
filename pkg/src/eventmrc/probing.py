"""Zero-shot probing: score every (sentence, query), calibrate on dev, test significance."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .evaluation import ArgPrediction, MetricTriple, micro_prf
from .heads import (DEFAULT_THRESHOLD, EntailmentHead, PolarHead, SpanHead, decode_span,
                    mask_event_score, span_confidence)
from .querygen import QueryKind, expand_queries, make_masked_query

GRID = [k / 100 for k in range(101)]


class ProbingError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredInstance:
    sentence_id: str
    kind: str
    event: str
    role: str | None
    score: float
    gold: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CalibrationResult:
    threshold: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SignificanceResult:
    ks_statistic: float
    p_value: float

    def to_dict(self) -> dict:
        return asdict(self)


def _head_for(kind: QueryKind, head):
    want = {QueryKind.TE_STATEMENT: EntailmentHead, QueryKind.PQ_EVENT: PolarHead}.get(kind, SpanHead)
    if kind.is_masked:
        return None
    if not isinstance(head, want):
        raise ProbingError(f"{kind.name} needs a {want.__name__}, got {type(head).__name__}")
    return head


def score_corpus(records, ontology, kind, encoder, head=None, max_desc_sentences: int = 0) -> list[ScoredInstance]:
    """One score per expanded query, in sentence order then ontology order.

    Statement / polar kinds score p1; the trigger question scores the confidence of
    the best span (min of its start and end probability); masked kinds score the
    mean sigmoid of the event-name tokens at the mask; argument kinds score the best
    span's confidence with gold = role filled in the sentence.
    """
    kind = QueryKind(kind)
    head = _head_for(kind, head)
    out = []
    for rec in records:
        present = rec.event_types
        if kind.is_masked:
            probe = make_masked_query(kind, rec.id)
            pair = encoder.tokenize(probe.query_text, rec.text)
            logits = encoder.mask_logits(pair, pair.query_token_at(probe.mask_slot[0]))
            for ev in ontology.events:
                s = mask_event_score(logits, encoder.name_token_ids(ev.name))
                out.append(ScoredInstance(rec.id, kind.value, ev.name, None, s, int(ev.name in present)))
            continue
        for q in expand_queries(rec, ontology, [kind], max_desc_sentences):
            pair = encoder.tokenize(q.query_text, rec.text)
            enc = encoder.encode(pair)
            if kind in (QueryKind.TE_STATEMENT, QueryKind.PQ_EVENT):
                s = head.score(enc.pooled).p1
                gold = int(q.event in present)
            else:
                s = span_confidence(head.score(enc, pair))
                if kind.is_argument:
                    gold = int(any(m.spans_for(q.role) for m in rec.events if m.type == q.event))
                else:
                    gold = int(q.event in present)
            out.append(ScoredInstance(rec.id, kind.value, q.event, q.role, float(s), gold))
    return out


def predict_arguments(records, ontology, kind, encoder, head: SpanHead, threshold: float = DEFAULT_THRESHOLD,
                      event_preds: dict | None = None) -> list[ArgPrediction]:
    """Ask one question per (event, role) and decode at most one span each.

    Gold event mentions are queried unless ``event_preds`` supplies predicted labels.
    """
    kind = QueryKind(kind)
    out = []
    for rec in records:
        events = None if event_preds is None else sorted(event_preds.get(rec.id, ()))
        for q in expand_queries(rec, ontology, [kind], events=events):
            pair = encoder.tokenize(q.query_text, rec.text)
            span = decode_span(head.score(encoder.encode(pair), pair), threshold)
            chars = pair.token_span_to_chars(*span) if span else None
            out.append(ArgPrediction(rec.id, q.event, q.role, chars))
    return out


def _f1_fraction(tp: int, fp: int, fn: int) -> tuple[int, int]:
    return 2 * tp, 2 * tp + fp + fn


def _better(a: tuple[int, int], b: tuple[int, int]) -> bool:
    """Exact comparison of F1 fractions num/den (0/0 counts as 0)."""
    return a[0] * max(b[1], 1) > b[0] * max(a[1], 1)


def calibrate_threshold(dev_scores) -> CalibrationResult:
    """Scan t = 0.00 .. 1.00 in 0.01 steps, predicting positive iff score > t.

    Returns the F1-maximizing threshold; ties go to the smallest t.
    """
    scores = np.array([s.score for s in dev_scores], dtype=np.float64)
    gold = np.array([s.gold for s in dev_scores], dtype=bool)
    if not gold.any():
        raise ProbingError("calibration needs at least one gold positive")
    pos = np.sort(scores[gold])
    neg = np.sort(scores[~gold])
    best = None
    for t in GRID:
        tp = len(pos) - int(np.searchsorted(pos, t, side="right"))
        fp = len(neg) - int(np.searchsorted(neg, t, side="right"))
        fn = len(pos) - tp
        frac = _f1_fraction(tp, fp, fn)
        if best is None or _better(frac, best[1]):
            best = (t, frac, (tp, fp, fn))
    t, _, counts = best
    m = MetricTriple.from_counts(*counts)
    return CalibrationResult(t, m.precision, m.recall, m.f1)


def kolmogorov_sf(lam: float, tol: float = 1e-10) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution.

    Uses 2 * sum (-1)^(k-1) exp(-2 k^2 lam^2) for lam >= 1 and the Jacobi-theta
    form 1 - sqrt(2 pi)/lam * sum exp(-(2k-1)^2 pi^2 / (8 lam^2)) below; both
    series stop once a term drops under ``tol``.
    """
    if lam <= 0:
        return 1.0
    if lam >= 1.0:
        total, k = 0.0, 1
        while True:
            term = math.exp(-2.0 * k * k * lam * lam)
            total += term if k % 2 else -term
            if term < tol:
                break
            k += 1
        p = 2.0 * total
    else:
        total, k = 0.0, 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8.0 * lam * lam))
            total += term
            if term < tol or k > 10_000:
                break
            k += 1
        p = 1.0 - math.sqrt(2.0 * math.pi) / lam * total
    return min(1.0, max(0.0, p))


def ks_two_sample(pos_scores, neg_scores) -> SignificanceResult:
    a = np.sort(np.asarray(pos_scores, dtype=np.float64))
    b = np.sort(np.asarray(neg_scores, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ProbingError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    # right-continuous empirical CDFs evaluated at every observation
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    n_eff = a.size * b.size / (a.size + b.size)
    return SignificanceResult(d, kolmogorov_sf(math.sqrt(n_eff) * d))


def significance(scores) -> SignificanceResult:
    """KS test of gold-positive against gold-negative scores, pooled over events."""
    pos = [s.score for s in scores if s.gold]
    neg = [s.score for s in scores if not s.gold]
    return ks_two_sample(pos, neg)


def random_baseline(records, ontology, seed: int) -> list[ScoredInstance]:
    rng = np.random.default_rng(seed)
    out = []
    for rec in records:
        present = rec.event_types
        draws = rng.uniform(0.0, 1.0, len(ontology.events))
        for ev, s in zip(ontology.events, draws):
            out.append(ScoredInstance(rec.id, "RANDOM", ev.name, None, float(s), int(ev.name in present)))
    return out


def mtp_rank_events(mask_logits, ontology, name_token_ids, vocab_tokens=None, k: int = 0):
    """Rank events by the mean sigmoid score of their name tokens at the mask.

    ``name_token_ids`` maps an event name to its token ids. Also returns the k
    highest-scoring vocabulary entries as (token, logit) for inspection.
    """
    logits = np.asarray(mask_logits, dtype=np.float64)
    scored = [(ev.name, mask_event_score(logits, name_token_ids(ev.name))) for ev in ontology.events]
    ranked = sorted(scored, key=lambda x: -x[1])  # stable: ontology order on ties
    top = []
    if k > 0:
        order = np.argsort(-logits, kind="stable")[:k]
        top = [(vocab_tokens[i] if vocab_tokens is not None else int(i), float(logits[i])) for i in order]
    return ranked, top


def predictions_at(scores, threshold: float, sentence_ids) -> dict[str, set[str]]:
    pred = {sid: set() for sid in sentence_ids}
    for s in scores:
        if s.score > threshold:
            pred[s.sentence_id].add(s.event)
    return pred


def evaluate_scores(test_scores, threshold: float, records) -> MetricTriple:
    pred = predictions_at(test_scores, threshold, [r.id for r in records])
    return micro_prf(pred, {r.id: r.event_types for r in records})


def dumps_scores(scores) -> str:
    return "".join(json.dumps(s.to_dict(), sort_keys=True) + "\n" for s in scores)


def load_scores(path) -> list[ScoredInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                out.append(ScoredInstance(d["sentence_id"], d["kind"], d["event"], d.get("role"),
                                          float(d["score"]), int(d["gold"])))
    return out


def probe_method(name: str, dev_scores, test_scores, test_records) -> dict:
    """Calibrate on dev, evaluate on test, KS on test; returns a report entry."""
    cal = calibrate_threshold(dev_scores)
    metrics = evaluate_scores(test_scores, cal.threshold, test_records)
    sig = significance(test_scores)
    return {
        "name": name,
        "threshold": cal.threshold,
        "dev": {"precision": cal.precision, "recall": cal.recall, "f1": cal.f1},
        "metrics": metrics.to_dict(),
        "ks_statistic": sig.ks_statistic,
        "p_value": sig.p_value,
    }
