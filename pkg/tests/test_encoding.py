import numpy as np
import pytest
import torch

from eventmrc.encoding import (MAX_LEN, EncodingError, MockEncoder, TinyEncoder, Vocabulary, collate,
                               mock_encoder, tiny_trainable_encoder, tokenize_pair, vocabulary_for,
                               word_tokenize)
from eventmrc.heads import EntailmentHead, PolarHead, SpanHead, binary_nll, span_nll
from eventmrc.querygen import QueryKind, make_masked_query

from conftest import make_tiny_bert

Q = "Hence, an event about Marry happened."
X = "They got married."


@pytest.fixture(scope="module")
def vocab(onto, small_corpus):
    return vocabulary_for(small_corpus, onto)


def test_pair_layout(vocab):
    p = tokenize_pair(Q, X, vocab)
    cls, sep1, sep2 = p.segment_boundaries
    assert cls == 0 and p.token_ids[0] == vocab.cls_id
    assert [i for i, t in enumerate(p.token_ids) if t == vocab.cls_id] == [0]
    assert p.token_ids[sep1] == p.token_ids[sep2] == vocab.sep_id
    assert sep2 == len(p) - 1
    # query first: "hence , an event about marry happened ." is 8 tokens
    assert sep1 == 9
    assert p.token_to_char == ((0, 4), (5, 8), (9, 16), (16, 17))
    assert p.token_to_char[0][0] == 0 and p.token_to_char[-1][1] == len(X) == 17
    assert p.segment_ids == [0] * 10 + [1] * 5


def test_alignment_round_trip(vocab, small_corpus):
    for rec in small_corpus[:40]:
        p = tokenize_pair(Q, rec.text, vocab)
        for c, ch in enumerate(rec.text):
            t = p.char_to_token[c]
            if ch.isspace():
                assert t == -1
            else:
                s, e = p.token_to_char[t]
                assert s <= c < e
        for k, (s, e) in enumerate(p.token_to_char):
            (tok,) = word_tokenize(rec.text[s:e])
            assert vocab.id(tok[0]) == p.token_ids[p.sentence_start + k]
        spans = p.token_to_char
        assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))


def test_empty_input_errors(vocab):
    with pytest.raises(EncodingError):
        tokenize_pair("", "x", vocab)
    with pytest.raises(EncodingError):
        tokenize_pair("q", "   ", vocab)


def test_unknown_characters_map_to_oov(vocab):
    p = tokenize_pair(Q, "Zyxq ☃ happened.", vocab)
    assert p.token_ids[p.sentence_start] == vocab.unk_id
    assert p.token_ids[p.sentence_start + 1] == vocab.unk_id


def test_truncation_makes_tail_spans_unanswerable(vocab, caplog):
    long = " ".join(["word"] * 400)
    p = tokenize_pair(Q, long, vocab)
    assert len(p) == MAX_LEN and p.truncated
    assert "truncated" in caplog.text
    assert p.char_span_to_tokens(0, 4) == (0, 0)
    assert p.char_span_to_tokens(len(long) - 4, len(long)) is None


def test_mask_position(vocab):
    q = make_masked_query(QueryKind.MTP_TE)
    p = tokenize_pair(q.query_text, X, vocab)
    pos = p.query_token_at(q.mask_slot[0])
    assert p.token_ids[pos] == vocab.mask_id


def test_vocabulary_build_order():
    v = Vocabulary.build(["b a b", "c b a"])
    assert v.tokens[5:] == ["b", "a", "c"]
    assert v.id("zzz") == v.unk_id


def test_mock_encoder_determinism(vocab):
    p = tokenize_pair(Q, X, vocab)
    a, b = mock_encoder(vocab, 1).encode(p), mock_encoder(vocab, 1).encode(p)
    assert np.array_equal(a.token_vectors, b.token_vectors)
    c = mock_encoder(vocab, 2).encode(p)
    assert not np.array_equal(a.token_vectors, c.token_vectors)
    assert a.token_vectors.shape == (len(p), 32)
    assert np.array_equal(a.pooled, a.token_vectors[0])


def test_tiny_encoder_contract(vocab):
    enc = tiny_trainable_encoder(vocab, seed=0)
    assert sum(p.numel() for p in enc.parameters()) < 1_000_000
    assert len(enc.blocks) == 1
    p = tokenize_pair(Q, X, vocab)
    a, b = enc.encode(p), enc.encode(p)
    assert np.array_equal(a.token_vectors, b.token_vectors)
    assert a.token_vectors.shape == (len(p), 32)
    assert np.array_equal(a.pooled, a.token_vectors[0])
    other = TinyEncoder(vocab, seed=1).encode(p)
    assert not np.array_equal(other.pooled, a.pooled)


def _head_loss(kind, enc, head, batch_pairs):
    ids, seg, mask = collate(batch_pairs)
    hidden = enc(ids, seg, mask)
    if kind == "qa":
        smask = torch.zeros_like(mask)
        for b, p in enumerate(batch_pairs):
            smask[b, p.sentence_start:p.sentence_start + p.n_sentence] = 1
        start = torch.tensor([p.sentence_start for p in batch_pairs])
        end = torch.tensor([p.sentence_start + 2 for p in batch_pairs])
        return span_nll(head(hidden, smask), start, end)
    return binary_nll(head(hidden[:, 0]), torch.tensor([1, 0]))


@pytest.mark.parametrize("kind,head_cls", [("te", EntailmentHead), ("pq", PolarHead), ("qa", SpanHead)])
def test_finite_difference_gradients(vocab, kind, head_cls):
    """Central differences (h=1e-4) on 5 random coordinates with nonzero gradient."""
    enc = TinyEncoder(vocab, seed=3)
    enc.eval()  # dropout off so the loss is a deterministic function
    head = head_cls(enc.dim, seed=1)
    pairs = [tokenize_pair(Q, X, vocab), tokenize_pair("Did any event about Attack happen?",
                                                       "Rebels bombed the embassy.", vocab)]
    params = list(enc.named_parameters()) + [("head." + n, p) for n, p in head.named_parameters()]
    loss = _head_loss(kind, enc, head, pairs)
    grads = torch.autograd.grad(loss, [p for _, p in params])
    coords = [(k, idx) for k, g in enumerate(grads) for idx in torch.nonzero(g.abs() > 1e-7).tolist()]
    rng = np.random.default_rng(0)
    picks = [coords[i] for i in rng.choice(len(coords), 5, replace=False)]
    h = 1e-4
    for k, idx in picks:
        p = params[k][1]
        with torch.no_grad():
            orig = p[tuple(idx)].item()
            p[tuple(idx)] = orig + h
            up = _head_loss(kind, enc, head, pairs).item()
            p[tuple(idx)] = orig - h
            down = _head_loss(kind, enc, head, pairs).item()
            p[tuple(idx)] = orig
        numeric = (up - down) / (2 * h)
        analytic = grads[k][tuple(idx)].item()
        rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic))
        assert rel < 1e-3, (params[k][0], idx, numeric, analytic)


def test_zero_perturbation_same_loss(vocab):
    enc = TinyEncoder(vocab, seed=0)
    enc.eval()
    head = EntailmentHead(enc.dim)
    pairs = [tokenize_pair(Q, X, vocab)] * 2
    a = _head_loss("te", enc, head, pairs).item()
    with torch.no_grad():
        enc.tok[7] += 0.0
    assert _head_loss("te", enc, head, pairs).item() == a


def test_heads_valid_under_every_encoder(vocab, onto, small_corpus, tmp_path):
    from eventmrc.encoding import AdapterEncoder
    words = [t for rec in small_corpus for t, _, _ in word_tokenize(rec.text)] + \
        [t for t, _, _ in word_tokenize(Q + " " + X)]
    adapter = AdapterEncoder(make_tiny_bert(tmp_path / "bert", words))
    for enc in (MockEncoder(vocab, 0), TinyEncoder(vocab, 0), adapter):
        p = enc.tokenize(Q, X)
        out = enc.encode(p)
        assert out.token_vectors.shape[0] == len(p)
        assert np.array_equal(out.pooled, out.token_vectors[0])
        te = EntailmentHead(enc.dim).score(out.pooled)
        pq = PolarHead(enc.dim).score(out.pooled)
        sp = SpanHead(enc.dim).score(out, p)
        assert abs(te.p0 + te.p1 - 1) < 1e-9 and abs(pq.p0 + pq.p1 - 1) < 1e-9
        assert len(sp) == p.n_sentence
        assert abs(sp.start.sum() + sp.null_start - 1) < 1e-6


def test_adapter_alignment_and_mask(tmp_path):
    from eventmrc.encoding import AdapterEncoder
    words = "hence , an event about marry happened . they got married did any happen ?".split()
    enc = AdapterEncoder(make_tiny_bert(tmp_path / "bert", words + ["mar", "##ried"]))
    p = enc.tokenize(Q, X)
    assert p.token_ids[0] == enc.tokenizer.cls_token_id
    assert p.token_to_char[0] == (0, 4)
    for k, (s, e) in enumerate(p.token_to_char):
        assert enc._words(X[s:e])[0][0] == p.token_ids[p.sentence_start + k] or X[s:e].startswith("##")
    q = make_masked_query(QueryKind.MTP_QA)
    pm = enc.tokenize(q.query_text, X)
    pos = pm.query_token_at(q.mask_slot[0])
    assert pm.token_ids[pos] == enc.tokenizer.mask_token_id
    assert enc.mask_logits(pm, pos).shape == (len(enc.tokenizer),)
    assert enc.name_token_ids("Marry") == [enc.tokenizer.convert_tokens_to_ids("marry")]
