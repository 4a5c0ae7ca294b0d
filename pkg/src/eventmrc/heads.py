"""Task heads and losses: entailment, polar yes/no, span selection, masked-token scoring.

The contract functions work on plain numpy arrays; the ``nn.Module`` heads below
share the same arithmetic in differentiable form for training.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

EPS = 1e-12
DEFAULT_THRESHOLD = 0.5


class HeadError(ValueError):
    pass


@dataclass(frozen=True)
class EntailmentLogits:
    l0: float  # contradiction
    l1: float  # entailment
    l2: float  # neutral


@dataclass(frozen=True)
class BinaryEventScore:
    p0: float
    p1: float

    def __post_init__(self):
        if not (0.0 <= self.p0 <= 1.0 and 0.0 <= self.p1 <= 1.0) or abs(self.p0 + self.p1 - 1) > 1e-9:
            raise HeadError(f"invalid binary distribution ({self.p0}, {self.p1})")


@dataclass(frozen=True)
class SpanScores:
    """Start/end distributions over sentence tokens.

    ``null_start``/``null_end`` hold the mass of the virtual no-answer slot; they
    are zero when the head was evaluated without one.
    """

    start: np.ndarray
    end: np.ndarray
    null_start: float = 0.0
    null_end: float = 0.0

    def __len__(self) -> int:
        return len(self.start)


@dataclass(frozen=True)
class SpanLabels:
    start: int | None
    end: int | None

    @property
    def answerable(self) -> bool:
        return self.start is not None


NO_ANSWER = SpanLabels(None, None)


def _vec(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise HeadError(f"{name} contains non-finite values")
    return a


def _linear(pooled, weight, bias, cols: int) -> np.ndarray:
    x = _vec(pooled, "pooled")
    w = _vec(weight, "weight")
    if x.ndim != 1 or w.shape != (x.shape[0], cols):
        raise HeadError(f"dimension mismatch: pooled {x.shape} vs weight {w.shape}")
    out = x @ w
    if bias is not None:
        out = out + _vec(bias, "bias")
    return out


def _softmax2(a: float, b: float) -> BinaryEventScore:
    m = max(a, b)
    ea, eb = math.exp(a - m), math.exp(b - m)
    z = ea + eb
    return BinaryEventScore(ea / z, eb / z)


def entailment_head(pooled, weight, bias=None) -> EntailmentLogits:
    """Linear map (d,) x (d, 3) -> contradiction/entailment/neutral logits."""
    l = _linear(pooled, weight, bias, 3)
    return EntailmentLogits(float(l[0]), float(l[1]), float(l[2]))


def collapse_to_binary(logits: EntailmentLogits) -> BinaryEventScore:
    """[p0, p1] = softmax(l0 + l2, l1): contradiction and neutral both vote 'no event'."""
    return _softmax2(logits.l0 + logits.l2, logits.l1)


def entailment_loss(score: BinaryEventScore, y: int) -> float:
    p0 = max(score.p0, EPS)
    p1 = max(score.p1, EPS)
    return -((1 - y) * math.log(p0) + y * math.log(p1))


def polar_head(pooled, weight, bias=None) -> BinaryEventScore:
    l = _linear(pooled, weight, bias, 2)
    return _softmax2(float(l[0]), float(l[1]))


polar_loss = entailment_loss


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def span_head(sentence_vectors, weight, bias=None, null_vector=None) -> SpanScores:
    """Start/end scores over the sentence tokens.

    weight is (d, 2): column 0 scores starts, column 1 ends. When ``null_vector``
    (the classifier-token output) is given, its scores join the normalization as
    the virtual no-answer slot.
    """
    x = _vec(sentence_vectors, "sentence_vectors")
    if x.ndim != 2 or x.shape[0] < 1:
        raise HeadError("span head needs at least one sentence token")
    w = _vec(weight, "weight")
    if w.shape != (x.shape[1], 2):
        raise HeadError(f"dimension mismatch: vectors {x.shape} vs weight {w.shape}")
    b = np.zeros(2) if bias is None else _vec(bias, "bias")
    logits = x @ w + b
    if null_vector is None:
        return SpanScores(_softmax(logits[:, 0]), _softmax(logits[:, 1]))
    nl = _vec(null_vector, "null_vector") @ w + b
    s = _softmax(np.concatenate([[nl[0]], logits[:, 0]]))
    e = _softmax(np.concatenate([[nl[1]], logits[:, 1]]))
    return SpanScores(s[1:], e[1:], float(s[0]), float(e[0]))


def best_span(scores: SpanScores) -> tuple[int, int]:
    """argmax over i <= j of start[i] + end[j]; ties go to smallest i, then smallest j."""
    s = np.asarray(scores.start)
    e = np.asarray(scores.end)
    total = s[:, None] + e[None, :]
    n = len(s)
    total = np.where(np.triu(np.ones((n, n), dtype=bool)), total, -np.inf)
    # row-major argmax returns the first maximum: smallest i, then smallest j
    i, j = divmod(int(np.argmax(total)), n)
    return i, j


def decode_span(scores: SpanScores, threshold: float = DEFAULT_THRESHOLD) -> tuple[int, int] | None:
    if not 0.0 <= threshold <= 1.0:
        raise HeadError("threshold must lie in [0, 1]")
    i, j = best_span(scores)
    if scores.start[i] > threshold and scores.end[j] > threshold:
        return i, j
    return None


def span_confidence(scores: SpanScores) -> float:
    """min(start, end) at the best pair: exceeds t exactly when decode_span(t) answers."""
    i, j = best_span(scores)
    return float(min(scores.start[i], scores.end[j]))


def span_loss(scores: SpanScores, labels: SpanLabels) -> float:
    n = len(scores)
    if not labels.answerable:
        return -math.log(max(scores.null_start, EPS)) - math.log(max(scores.null_end, EPS))
    if not (0 <= labels.start <= labels.end < n):
        raise HeadError(f"gold span ({labels.start}, {labels.end}) out of range for n={n}")
    return -math.log(max(scores.start[labels.start], EPS)) - math.log(max(scores.end[labels.end], EPS))


def mask_event_score(mask_logits, event_name_token_ids) -> float:
    ids = list(event_name_token_ids)
    if not ids:
        raise HeadError("event name has an empty tokenization")
    z = np.asarray(mask_logits, dtype=np.float64)[ids]
    return float(np.mean(1.0 / (1.0 + np.exp(-z))))


# --- differentiable heads -----------------------------------------------------


def binary_log_probs_from_ternary(logits: torch.Tensor) -> torch.Tensor:
    """(..., 3) entailment logits -> (..., 2) log [p0, p1]."""
    pair = torch.stack([logits[..., 0] + logits[..., 2], logits[..., 1]], dim=-1)
    return torch.log_softmax(pair, dim=-1)


def binary_nll(log_probs: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Mean cross entropy; log-probabilities floored at log(EPS) like the scalar loss."""
    lp = log_probs.clamp_min(math.log(EPS))
    y = y.to(lp.dtype)
    return -((1 - y) * lp[..., 0] + y * lp[..., 1]).mean()


class EntailmentHead(nn.Module):
    n_out = 3

    def __init__(self, dim: int, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.weight = nn.Parameter(torch.randn(dim, 3, generator=gen, dtype=torch.float64) * dim ** -0.5)
        self.bias = nn.Parameter(torch.zeros(3, dtype=torch.float64))

    def forward(self, pooled: torch.Tensor) -> torch.Tensor:
        """log [p0, p1] per row."""
        return binary_log_probs_from_ternary(pooled @ self.weight + self.bias)

    def score(self, pooled: np.ndarray) -> BinaryEventScore:
        w, b = self.weight.detach().numpy(), self.bias.detach().numpy()
        return collapse_to_binary(entailment_head(pooled, w, b))


class PolarHead(nn.Module):
    n_out = 2

    def __init__(self, dim: int, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.weight = nn.Parameter(torch.randn(dim, 2, generator=gen, dtype=torch.float64) * dim ** -0.5)
        self.bias = nn.Parameter(torch.zeros(2, dtype=torch.float64))

    def forward(self, pooled: torch.Tensor) -> torch.Tensor:
        return torch.log_softmax(pooled @ self.weight + self.bias, dim=-1)

    def score(self, pooled: np.ndarray) -> BinaryEventScore:
        return polar_head(pooled, self.weight.detach().numpy(), self.bias.detach().numpy())


class SpanHead(nn.Module):
    """Start/end scorer; the classifier-token vector scores the no-answer slot."""

    def __init__(self, dim: int, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.weight = nn.Parameter(torch.randn(dim, 2, generator=gen, dtype=torch.float64) * dim ** -0.5)
        self.bias = nn.Parameter(torch.zeros(2, dtype=torch.float64))

    def forward(self, hidden: torch.Tensor, sent_mask: torch.Tensor) -> torch.Tensor:
        """hidden (B, T, d), sent_mask (B, T) marking sentence tokens.

        Returns (B, T, 2) log-probabilities; position 0 is the no-answer slot and
        every position outside the sentence segment gets -inf.
        """
        logits = hidden @ self.weight + self.bias
        keep = sent_mask.bool().clone()
        keep[:, 0] = True
        logits = logits.masked_fill(~keep[..., None], float("-inf"))
        return torch.log_softmax(logits, dim=1)

    def score(self, out, pair) -> SpanScores:
        return span_head(out.sentence_vectors(pair), self.weight.detach().numpy(),
                         self.bias.detach().numpy(), null_vector=out.pooled)


def span_nll(log_probs: torch.Tensor, start: torch.Tensor, end: torch.Tensor) -> torch.Tensor:
    """start/end hold absolute token positions; 0 selects the no-answer slot."""
    lp = log_probs.clamp_min(math.log(EPS))
    b = torch.arange(lp.shape[0])
    return -(lp[b, start, 0] + lp[b, end, 1]).mean()


HEADS = {"te": EntailmentHead, "pq": PolarHead, "qa": SpanHead}
