"""Pair tokenization, character/token alignment and the encoder implementations.

Every encoder packs a (query, sentence) pair as ``[CLS] query [SEP] sentence [SEP]``
and returns one vector per token plus a pooled vector (the ``[CLS]`` output).
"""
from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import torch
from torch import nn

log = logging.getLogger(__name__)

MAX_LEN = 256
PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK)

_WORD = re.compile(r"\[MASK\]|\w+|[^\w\s]")


class EncodingError(ValueError):
    pass


def word_tokenize(text: str) -> list[tuple[str, int, int]]:
    """Lowercased word/punctuation tokens with character offsets."""
    out = []
    for m in _WORD.finditer(text):
        tok = m.group(0)
        out.append((tok if tok == MASK else tok.lower(), m.start(), m.end()))
    return out


class Vocabulary:
    def __init__(self, tokens):
        tokens = list(tokens)
        if tuple(tokens[: len(SPECIALS)]) != SPECIALS:
            tokens = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}
        if len(self.index) != len(tokens):
            raise EncodingError("duplicate vocabulary entries")

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def cls_id(self) -> int:
        return 2

    @property
    def sep_id(self) -> int:
        return 3

    @property
    def mask_id(self) -> int:
        return 4

    def id(self, token: str) -> int:
        return self.index.get(token, self.unk_id)

    def encode_words(self, text: str) -> list[int]:
        return [self.id(t) for t, _, _ in word_tokenize(text)]

    @classmethod
    def build(cls, texts, min_count: int = 1) -> "Vocabulary":
        counts = Counter(t for text in texts for t, _, _ in word_tokenize(text))
        kept = sorted((t for t, c in counts.items() if c >= min_count and t not in SPECIALS),
                      key=lambda t: (-counts[t], t))
        return cls(list(SPECIALS) + kept)


def vocabulary_for(records, ontology) -> Vocabulary:
    """Closed vocabulary over corpus text plus every string a query can contain."""
    from .querygen import (ARG_TEMPLATE_Q, ARG_TRIG_PLUS_Q, POLAR_Q, STATEMENT, TRIGGER_Q)

    texts = [r.text for r in records]
    texts += [STATEMENT, ARG_TEMPLATE_Q, ARG_TRIG_PLUS_Q, POLAR_Q, TRIGGER_Q]
    for ev in ontology.events:
        texts.append(ev.name)
        texts.extend(ev.description)
        for r in ev.argument_roles:
            texts.append(r.role)
            if r.guide_question:
                texts.append(r.guide_question)
    return Vocabulary.build(texts)


@dataclass(frozen=True)
class TokenizedPair:
    token_ids: tuple[int, ...]
    # positions of [CLS], first [SEP], second [SEP]
    segment_boundaries: tuple[int, int, int]
    # sentence token k -> (start, end) character span in the sentence
    token_to_char: tuple[tuple[int, int], ...]
    # sentence character -> sentence token index, -1 for whitespace
    char_to_token: tuple[int, ...]
    query_offsets: tuple[tuple[int, int], ...] = ()
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def n_sentence(self) -> int:
        return len(self.token_to_char)

    @property
    def sentence_start(self) -> int:
        return self.segment_boundaries[1] + 1

    @property
    def segment_ids(self) -> list[int]:
        sep1 = self.segment_boundaries[1]
        return [0] * (sep1 + 1) + [1] * (len(self.token_ids) - sep1 - 1)

    def char_span_to_tokens(self, start: int, end: int) -> tuple[int, int] | None:
        """Sentence-token indices (inclusive) covering [start, end); None if truncated away."""
        if self.truncated and (not self.token_to_char or end > self.token_to_char[-1][1]):
            return None
        covered = [t for t in self.char_to_token[start:end] if t >= 0]
        if not covered:
            raise EncodingError(f"span [{start},{end}) covers no token")
        return covered[0], covered[-1]

    def token_span_to_chars(self, i: int, j: int) -> tuple[int, int]:
        return self.token_to_char[i][0], self.token_to_char[j][1]

    def query_token_at(self, char_start: int) -> int:
        """Absolute position of the query token beginning at a query character offset."""
        for k, (s, _) in enumerate(self.query_offsets):
            if s == char_start:
                return 1 + k
        raise EncodingError(f"no query token starts at character {char_start}")


def assemble_pair(query_tokens, sentence_tokens, sentence_len: int, cls_id: int, sep_id: int,
                  max_len: int = MAX_LEN) -> TokenizedPair:
    """Pack pre-tokenized (id, start, end) triples into the fixed pair layout."""
    budget = max_len - 3 - len(query_tokens)
    if budget < 1:
        raise EncodingError(f"query too long for max length {max_len}")
    truncated = len(sentence_tokens) > budget
    if truncated:
        log.warning("sentence truncated from %d to %d tokens", len(sentence_tokens), budget)
        sentence_tokens = sentence_tokens[:budget]
    ids = [cls_id] + [t for t, _, _ in query_tokens] + [sep_id]
    sep1 = len(ids) - 1
    ids += [t for t, _, _ in sentence_tokens] + [sep_id]
    c2t = [-1] * sentence_len
    for k, (_, s, e) in enumerate(sentence_tokens):
        for c in range(s, e):
            c2t[c] = k
    return TokenizedPair(
        tuple(ids),
        (0, sep1, len(ids) - 1),
        tuple((s, e) for _, s, e in sentence_tokens),
        tuple(c2t),
        tuple((s, e) for _, s, e in query_tokens),
        truncated,
    )


def tokenize_pair(query: str, sentence: str, vocab: Vocabulary, max_len: int = MAX_LEN) -> TokenizedPair:
    if not query.strip() or not sentence.strip():
        raise EncodingError("query and sentence must be non-empty")
    q = [(vocab.id(t), s, e) for t, s, e in word_tokenize(query)]
    x = [(vocab.id(t), s, e) for t, s, e in word_tokenize(sentence)]
    return assemble_pair(q, x, len(sentence), vocab.cls_id, vocab.sep_id, max_len)


@dataclass(frozen=True)
class EncoderOutput:
    token_vectors: np.ndarray  # (T, d)
    pooled: np.ndarray  # (d,)

    def sentence_vectors(self, pair: TokenizedPair) -> np.ndarray:
        s = pair.sentence_start
        return self.token_vectors[s:s + pair.n_sentence]


class Encoder(Protocol):
    dim: int

    def tokenize(self, query: str, sentence: str) -> TokenizedPair: ...

    def encode(self, pair: TokenizedPair) -> EncoderOutput: ...

    def mask_logits(self, pair: TokenizedPair, position: int) -> np.ndarray: ...

    def name_token_ids(self, name: str) -> list[int]: ...


class MockEncoder:
    """Fixed random feature map: hashed token embeddings through two tanh layers."""

    trainable = False

    def __init__(self, vocab: Vocabulary, seed: int = 0, dim: int = 32):
        self.vocab = vocab
        self.seed = seed
        self.dim = dim
        rng = np.random.default_rng([seed, 0xE1])
        scale = 1.0 / np.sqrt(dim)
        self.w1 = rng.normal(0.0, scale, (2 * dim, dim))
        self.b1 = rng.normal(0.0, 0.1, dim)
        self.w2 = rng.normal(0.0, scale, (dim, dim))
        self.b2 = rng.normal(0.0, 0.1, dim)
        self._table = np.stack([self._embed(t) for t in range(len(vocab))])

    def _embed(self, token_id: int) -> np.ndarray:
        return np.random.default_rng([self.seed, 0xE2, token_id]).normal(0.0, 1.0, self.dim)

    def tokenize(self, query: str, sentence: str) -> TokenizedPair:
        return tokenize_pair(query, sentence, self.vocab)

    def encode(self, pair: TokenizedPair) -> EncoderOutput:
        e = self._table[list(pair.token_ids)]
        ctx = np.broadcast_to(e.mean(axis=0), e.shape)
        h = np.tanh(np.concatenate([e, ctx], axis=1) @ self.w1 + self.b1)
        out = np.tanh(h @ self.w2 + self.b2)
        return EncoderOutput(out, out[0].copy())

    def mask_logits(self, pair: TokenizedPair, position: int) -> np.ndarray:
        return self._table @ self.encode(pair).token_vectors[position]

    def name_token_ids(self, name: str) -> list[int]:
        return self.vocab.encode_words(name)


class _Block(nn.Module):
    """Pre-norm self-attention with relative-offset bias, then a GELU feed-forward."""

    def __init__(self, dim: int, heads: int, rel_window: int, dropout: float, gen: torch.Generator):
        super().__init__()
        dt = torch.float64

        def init(*shape, std):
            return nn.Parameter(torch.randn(*shape, generator=gen, dtype=dt) * std)

        self.dim, self.heads, self.rel_window, self.dropout = dim, heads, rel_window, dropout
        self.ln1 = nn.LayerNorm(dim, dtype=dt)
        self.qkv = init(dim, 3 * dim, std=dim ** -0.5)
        self.out = init(dim, dim, std=dim ** -0.5)
        self.rel = init(heads, 2 * rel_window + 1, std=0.02)
        self.ln2 = nn.LayerNorm(dim, dtype=dt)
        self.ff1 = init(dim, 4 * dim, std=dim ** -0.5)
        self.ff1_b = nn.Parameter(torch.zeros(4 * dim, dtype=dt))
        self.ff2 = init(4 * dim, dim, std=(4 * dim) ** -0.5)
        self.ff2_b = nn.Parameter(torch.zeros(dim, dtype=dt))

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        B, T, _ = x.shape
        h = self.ln1(x)
        q, k, v = (h @ self.qkv).split(self.dim, dim=-1)
        hd = self.dim // self.heads
        q, k, v = (t.view(B, T, self.heads, hd).transpose(1, 2) for t in (q, k, v))
        att = q @ k.transpose(-1, -2) / hd ** 0.5
        offs = torch.arange(T)[None, :] - torch.arange(T)[:, None]
        offs = offs.clamp(-self.rel_window, self.rel_window) + self.rel_window
        att = att + self.rel[:, offs][None]
        att = att.masked_fill(~mask[:, None, None, :].bool(), float("-inf"))
        ctx = (att.softmax(-1) @ v).transpose(1, 2).reshape(B, T, self.dim)
        drop = nn.functional.dropout
        x = x + drop(ctx @ self.out, self.dropout, self.training)
        ff = nn.functional.gelu(self.ln2(x) @ self.ff1 + self.ff1_b) @ self.ff2 + self.ff2_b
        return x + drop(ff, self.dropout, self.training)


class TinyEncoder(nn.Module):
    """Small float64 transformer trained from scratch.

    Attention carries a learned bias per head for each clipped relative offset,
    so local-context patterns are easy to pick up from little data.
    """

    trainable = True

    def __init__(self, vocab: Vocabulary, seed: int = 0, dim: int = 32, heads: int = 4, layers: int = 1,
                 max_len: int = MAX_LEN, rel_window: int = 8, dropout: float = 0.1,
                 word_dropout: float = 0.1):
        super().__init__()
        if dim % heads:
            raise ValueError("dim must be divisible by heads")
        self.vocab = vocab
        self.seed = seed
        self.dim = dim
        self.heads = heads
        self.n_layers = layers
        self.rel_window = rel_window
        self.dropout = dropout
        self.word_dropout = word_dropout
        self.max_len = max_len
        gen = torch.Generator().manual_seed(seed)
        dt = torch.float64
        self.tok = nn.Parameter(torch.randn(len(vocab), dim, generator=gen, dtype=dt) * 0.5)
        self.pos = nn.Parameter(torch.randn(max_len, dim, generator=gen, dtype=dt) * 0.02)
        self.seg = nn.Parameter(torch.randn(2, dim, generator=gen, dtype=dt) * 0.1)
        self.blocks = nn.ModuleList(_Block(dim, heads, rel_window, dropout, gen) for _ in range(layers))
        self.ln_out = nn.LayerNorm(dim, dtype=dt)

    def spec(self) -> dict:
        """Constructor arguments (minus the vocabulary), enough to rebuild the module."""
        return {"seed": self.seed, "dim": self.dim, "heads": self.heads, "layers": self.n_layers,
                "max_len": self.max_len, "rel_window": self.rel_window, "dropout": self.dropout,
                "word_dropout": self.word_dropout}

    def forward(self, ids: torch.Tensor, segments: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """ids/segments/mask: (B, T). Returns hidden states (B, T, d)."""
        T = ids.shape[1]
        if self.training and self.word_dropout > 0:
            drop = (torch.rand(ids.shape) < self.word_dropout) & (ids >= len(SPECIALS))
            ids = ids.masked_fill(drop, self.vocab.unk_id)
        x = self.tok[ids] + self.pos[:T] + self.seg[segments]
        for block in self.blocks:
            x = block(x, mask)
        return self.ln_out(x)

    def lm_logits(self, hidden: torch.Tensor) -> torch.Tensor:
        return hidden @ self.tok.T

    def tokenize(self, query: str, sentence: str) -> TokenizedPair:
        return tokenize_pair(query, sentence, self.vocab)

    @torch.no_grad()
    def encode(self, pair: TokenizedPair) -> EncoderOutput:
        self.eval()
        ids, seg, mask = collate([pair])
        hidden = self(ids, seg, mask)[0].numpy().copy()
        return EncoderOutput(hidden, hidden[0].copy())

    @torch.no_grad()
    def mask_logits(self, pair: TokenizedPair, position: int) -> np.ndarray:
        self.eval()
        ids, seg, mask = collate([pair])
        return self.lm_logits(self(ids, seg, mask)[0, position]).numpy()

    def name_token_ids(self, name: str) -> list[int]:
        return self.vocab.encode_words(name)


def collate(pairs, pad_id: int = 0):
    """Right-padded (ids, segments, attention mask) long tensors."""
    T = max(len(p) for p in pairs)
    ids = torch.full((len(pairs), T), pad_id, dtype=torch.long)
    seg = torch.zeros((len(pairs), T), dtype=torch.long)
    mask = torch.zeros((len(pairs), T), dtype=torch.long)
    for b, p in enumerate(pairs):
        n = len(p)
        ids[b, :n] = torch.tensor(p.token_ids)
        seg[b, :n] = torch.tensor(p.segment_ids)
        mask[b, :n] = 1
    return ids, seg, mask


def tiny_trainable_encoder(vocab: Vocabulary, seed: int = 0, dim: int = 32) -> TinyEncoder:
    return TinyEncoder(vocab, seed=seed, dim=dim)


def mock_encoder(vocab: Vocabulary, seed: int = 0) -> MockEncoder:
    return MockEncoder(vocab, seed=seed)


class AdapterEncoder:
    """Wraps a local Hugging Face masked-LM directory (weights + fast tokenizer).

    Subword offsets come from the tokenizer's offset mapping, so the same
    alignment contract holds as for the reference word tokenizer.
    """

    trainable = False

    def __init__(self, directory, max_len: int = MAX_LEN):
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        self.tokenizer = AutoTokenizer.from_pretrained(str(directory))
        if not self.tokenizer.is_fast:
            raise EncodingError("adapter needs a fast tokenizer for offset mapping")
        self.model = AutoModelForMaskedLM.from_pretrained(str(directory)).eval()
        self.dim = self.model.config.hidden_size
        self.max_len = max_len

    def _words(self, text: str):
        enc = self.tokenizer(text, add_special_tokens=False, return_offsets_mapping=True)
        return [(i, s, e) for i, (s, e) in zip(enc["input_ids"], enc["offset_mapping"])]

    def tokenize(self, query: str, sentence: str) -> TokenizedPair:
        if not query.strip() or not sentence.strip():
            raise EncodingError("query and sentence must be non-empty")
        return assemble_pair(self._words(query), self._words(sentence), len(sentence),
                             self.tokenizer.cls_token_id, self.tokenizer.sep_token_id, self.max_len)

    @torch.no_grad()
    def _run(self, pair: TokenizedPair):
        ids = torch.tensor([pair.token_ids])
        seg = torch.tensor([pair.segment_ids])
        kwargs = {"input_ids": ids, "attention_mask": torch.ones_like(ids), "output_hidden_states": True}
        if "token_type_ids" in self.tokenizer.model_input_names:
            kwargs["token_type_ids"] = seg
        return self.model(**kwargs)

    def encode(self, pair: TokenizedPair) -> EncoderOutput:
        hidden = self._run(pair).hidden_states[-1][0].double().numpy()
        return EncoderOutput(hidden, hidden[0].copy())

    def mask_logits(self, pair: TokenizedPair, position: int) -> np.ndarray:
        return self._run(pair).logits[0, position].double().numpy()

    def name_token_ids(self, name: str) -> list[int]:
        return [i for i, _, _ in self._words(name)]
