import math

import numpy as np
from hypothesis import given, settings, strategies as st

from eventmrc.encoding import Vocabulary, tokenize_pair
from eventmrc.evaluation import micro_prf
from eventmrc.heads import (BinaryEventScore, EntailmentLogits, SpanLabels, SpanScores, collapse_to_binary,
                            decode_span, entailment_loss, span_loss)
from eventmrc.probing import GRID, ScoredInstance, calibrate_threshold, ks_two_sample

from test_heads import brute_decode

finite = st.floats(-50, 50, allow_nan=False)
prob = st.floats(0, 1, allow_nan=False)


@given(st.lists(st.tuples(prob, prob), min_size=1, max_size=20), st.sampled_from([0.0, 0.25, 0.5]))
def test_decode_equals_brute_force(pairs, thr):
    s = np.array([a for a, _ in pairs])
    e = np.array([b for _, b in pairs])
    assert decode_span(SpanScores(s, e), thr) == brute_decode(s, e, thr)


@given(finite, finite, finite)
def test_collapse_is_two_way_softmax(l0, l1, l2):
    p = collapse_to_binary(EntailmentLogits(l0, l1, l2))
    assert abs(p.p1 - 1 / (1 + math.exp((l0 + l2) - l1))) < 1e-12
    assert abs(p.p0 + p.p1 - 1) < 1e-12


@given(st.floats(1e-9, 1 - 1e-9), st.integers(0, 1))
def test_binary_loss_nonnegative(p1, y):
    assert entailment_loss(BinaryEventScore(1 - p1, p1), y) >= 0


@given(st.lists(finite, min_size=1, max_size=12), st.data())
def test_span_loss_nonnegative(logits, data):
    z = np.exp(np.array(logits) - max(logits))
    sc = SpanScores(z / z.sum(), z / z.sum())
    i = data.draw(st.integers(0, len(z) - 1))
    j = data.draw(st.integers(i, len(z) - 1))
    assert span_loss(sc, SpanLabels(i, j)) >= 0


@given(st.lists(st.tuples(prob, st.integers(0, 1)), min_size=1, max_size=30))
def test_calibration_on_grid(rows):
    rows = rows + [(0.5, 1)]
    res = calibrate_threshold([ScoredInstance("s", "k", "E", None, s, g) for s, g in rows])
    assert res.threshold in GRID and 0 <= res.f1 <= 1


@given(st.lists(finite, min_size=1, max_size=25), st.lists(finite, min_size=1, max_size=25))
def test_ks_symmetric_and_bounded(a, b):
    r1, r2 = ks_two_sample(a, b), ks_two_sample(b, a)
    assert r1.ks_statistic == r2.ks_statistic
    assert 0 <= r1.ks_statistic <= 1 and 0 <= r1.p_value <= 1


labels = st.sets(st.sampled_from("ABCD"), max_size=3)


@given(st.dictionaries(st.text("xyz", min_size=1, max_size=3), st.tuples(labels, labels), min_size=1),
       st.randoms(use_true_random=False))
def test_micro_prf_permutation_invariant(table, rnd):
    keys = list(table)
    pred = {k: table[k][0] for k in keys}
    gold = {k: table[k][1] for k in keys}
    rnd.shuffle(keys)
    assert micro_prf(pred, gold) == micro_prf({k: pred[k] for k in keys}, {k: gold[k] for k in keys})


words = st.text("abcdefg.,!'", min_size=1, max_size=6)


@settings(max_examples=60)
@given(st.lists(words, min_size=1, max_size=12), st.lists(st.sampled_from([" ", "  ", "\t"]), min_size=12,
                                                         max_size=12))
def test_alignment_round_trip(ws, gaps):
    text = "".join(w + g for w, g in zip(ws, gaps)).strip()
    vocab = Vocabulary.build([text])
    p = tokenize_pair("q", text, vocab)
    assert len(p.token_to_char) == p.n_sentence
    for k, (s, e) in enumerate(p.token_to_char):
        assert p.char_span_to_tokens(s, e) == (k, k)
        assert p.token_span_to_chars(k, k) == (s, e)
        assert all(p.char_to_token[c] == k for c in range(s, e))
    assert all(a[1] <= b[0] for a, b in zip(p.token_to_char, p.token_to_char[1:]))
