"""Oracle encoder: a test double whose vectors encode the gold answer.

Paired with :func:`oracle_heads`, every statement/polar query scores exactly 1.0
for a present event and 0.0 otherwise, and span heads put all mass on the gold
span (or the no-answer slot). Used to check plumbing end to end.
"""
from __future__ import annotations

import numpy as np
import torch

from .encoding import EncoderOutput, Vocabulary, tokenize_pair, vocabulary_for
from .heads import EntailmentHead, PolarHead, SpanHead
from .querygen import (ARG_KINDS, QueryKind, expand_queries, make_event_statement,
                       make_event_trigger_question, make_polar_question)

DIM = 4  # [event present, answer start, answer end, no answer]
_BIG = 500.0


class OracleEncoder:
    trainable = False
    dim = DIM

    def __init__(self, records, ontology, vocab: Vocabulary | None = None):
        self.vocab = vocab or vocabulary_for(records, ontology)
        self.ontology = ontology
        self._by_text = {}
        for r in records:
            self._by_text.setdefault(r.text, r)
        self._seen = {}

    def _answer(self, query: str, rec):
        """(event present, gold character span or None) for a query about rec."""
        if rec is None:
            return False, None
        for ev in self.ontology.events:
            statements = {make_event_statement(ev, k) for k in range(len(ev.description) + 1)}
            polar = make_polar_question(ev)
            trig = make_event_trigger_question(ev)
            if query in statements or query == polar:
                return ev.name in rec.event_types, None
            if query == trig:
                spans = [m.trigger for m in rec.events if m.type == ev.name and m.trigger]
                return bool(spans), (spans[0].start, spans[0].end) if spans else None
        for q in expand_queries(rec, self.ontology, ARG_KINDS):
            if q.query_text == query:
                for m in rec.events:
                    if m.type == q.event and m.spans_for(q.role):
                        s = m.spans_for(q.role)[0]
                        return True, (s.start, s.end)
                return True, None
        return False, None

    def tokenize(self, query: str, sentence: str):
        pair = tokenize_pair(query, sentence, self.vocab)
        self._seen[pair.token_ids] = (query, sentence)
        return pair

    def encode(self, pair) -> EncoderOutput:
        query, sentence = self._seen[pair.token_ids]
        present, span = self._answer(query, self._by_text.get(sentence))
        vecs = np.zeros((len(pair), DIM))
        vecs[0, 0] = 1.0 if present else -1.0
        tokens = pair.char_span_to_tokens(*span) if span else None
        if tokens is None:
            vecs[0, 3] = 1.0
        else:
            vecs[pair.sentence_start + tokens[0], 1] = 1.0
            vecs[pair.sentence_start + tokens[1], 2] = 1.0
        return EncoderOutput(vecs, vecs[0].copy())

    def mask_logits(self, pair, position: int) -> np.ndarray:
        _, sentence = self._seen[pair.token_ids]
        rec = self._by_text.get(sentence)
        logits = np.full(len(self.vocab), -_BIG)
        if rec is not None:
            for name in rec.event_types:
                logits[self.name_token_ids(name)] = _BIG
        return logits

    def name_token_ids(self, name: str) -> list[int]:
        return self.vocab.encode_words(name)


def oracle_heads() -> dict:
    """Head modules matched to the oracle's vector layout."""
    te, pq, qa = EntailmentHead(DIM), PolarHead(DIM), SpanHead(DIM)
    with torch.no_grad():
        te.weight.zero_()
        te.weight[0] = torch.tensor([-_BIG, _BIG, -_BIG], dtype=torch.float64)
        te.bias.zero_()
        pq.weight.zero_()
        pq.weight[0] = torch.tensor([-_BIG, _BIG], dtype=torch.float64)
        pq.bias.zero_()
        qa.weight.zero_()
        qa.weight[1, 0] = _BIG
        qa.weight[2, 1] = _BIG
        qa.weight[3] = torch.tensor([_BIG, _BIG], dtype=torch.float64)
        qa.bias.zero_()
    return {QueryKind.TE_STATEMENT: te, QueryKind.PQ_EVENT: pq, "span": qa}
