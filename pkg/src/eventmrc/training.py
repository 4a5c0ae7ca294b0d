"""K-shot sampling, gradient training of the heads (and tiny encoder), multi-seed aggregation."""
from __future__ import annotations

import copy
import json
import logging
import random
import statistics
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .corpus import by_split
from .encoding import MAX_LEN, SPECIALS, TinyEncoder, Vocabulary, collate, vocabulary_for, word_tokenize
from .evaluation import MetricTriple, score_arguments, stable_hash
from .heads import HEADS, binary_nll, span_nll
from .probing import (calibrate_threshold, evaluate_scores, predict_arguments, predictions_at,
                      score_corpus)
from .querygen import (QueryInstance, QueryKind, make_arg_question, make_event_statement,
                       make_polar_question)

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "EEXCKPT1"


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 16
    negative_ratio: int = 3
    max_desc_sentences: int = 0
    seed: int = 0
    optimizer: str = "adam"
    weight_decay: float = 0.0
    freeze_encoder: bool = False
    calibrate: bool = False
    threshold: float = 0.5
    event_kind: str = "TE_STATEMENT"
    arg_kind: str = "ARG_GUIDE"
    pretrain_epochs: int = 20  # masked-token epochs on unlabeled train text (tiny encoder only)

    def __post_init__(self):
        if self.learning_rate < 0 or self.epochs < 1 or self.batch_size < 1 or self.negative_ratio < 0:
            raise ValueError("learning_rate >= 0, epochs >= 1, batch_size >= 1, negative_ratio >= 0 required")
        if self.pretrain_epochs < 0:
            raise ValueError("pretrain_epochs must be >= 0")
        if self.max_desc_sentences < 0:
            raise ValueError("max_desc_sentences must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        QueryKind(self.event_kind)
        if not QueryKind(self.arg_kind).is_argument:
            raise ValueError(f"{self.arg_kind} is not an argument query kind")

    @property
    def head_kind(self) -> str:
        return {"TE_STATEMENT": "te", "PQ_EVENT": "pq"}[self.event_kind]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrainInstance:
    query: QueryInstance
    sentence: str
    label: int | None = None
    answer: tuple[int, int] | None = None  # character span; None means no answer


@dataclass
class FewShotSample:
    K: int
    seed: int
    train_instances: list
    shortfall: dict = field(default_factory=dict)

    @property
    def positives(self) -> int:
        return sum(1 for i in self.train_instances if i.label == 1)

    @property
    def negatives(self) -> int:
        return sum(1 for i in self.train_instances if i.label == 0)


def _event_query(rec, ev, kind: QueryKind, max_desc: int) -> QueryInstance:
    if kind is QueryKind.TE_STATEMENT:
        return QueryInstance(rec.id, make_event_statement(ev, max_desc), kind, ev.name)
    return QueryInstance(rec.id, make_polar_question(ev), kind, ev.name)


def _argument_instances(rec, ev, kind: QueryKind):
    out = []
    for m in rec.events:
        if m.type != ev.name:
            continue
        trigger = m.trigger.text if m.trigger else None
        if kind.needs_trigger and trigger is None:
            continue
        for role in ev.role_names:
            text = make_arg_question(ev, role, kind, trigger)
            spans = m.spans_for(role)
            answer = (spans[0].start, spans[0].end) if spans else None
            out.append(TrainInstance(QueryInstance(rec.id, text, kind, ev.name, role), rec.text, answer=answer))
    return out


def sample_k_shot(records, ontology, K: int, seed: int, negative_ratio: int = 3, kind="TE_STATEMENT",
                  max_desc_sentences: int = 0) -> FewShotSample:
    """Pick K sentences per event type and build training instances for them.

    Statement/polar kinds: each pick gives one positive for its event plus
    ``negative_ratio`` negatives drawn from events absent from the sentence.
    Argument kinds: each pick gives one question per role of its event.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    kind = QueryKind(kind)
    rng = random.Random(seed)
    instances, shortfall = [], {}
    for ev in ontology.events:
        candidates = [r for r in records if ev.name in r.event_types]
        rng.shuffle(candidates)
        chosen = candidates[:K]
        if len(chosen) < K:
            shortfall[ev.name] = K - len(chosen)
            log.warning("only %d positive sentences for %s (K=%d)", len(chosen), ev.name, K)
        for rec in chosen:
            if kind.is_argument:
                instances.extend(_argument_instances(rec, ev, kind))
                continue
            instances.append(TrainInstance(_event_query(rec, ev, kind, max_desc_sentences), rec.text, label=1))
            absent = [e for e in ontology.events if e.name not in rec.event_types]
            for neg in rng.sample(absent, min(negative_ratio, len(absent))):
                instances.append(TrainInstance(_event_query(rec, neg, kind, max_desc_sentences), rec.text, label=0))
    return FewShotSample(K, seed, instances, shortfall)


def full_instances(records, ontology, kind="TE_STATEMENT", max_desc_sentences: int = 0) -> list[TrainInstance]:
    """Full supervision: every (sentence, event) statement, or every gold (event, role) question."""
    kind = QueryKind(kind)
    out = []
    for rec in records:
        if kind.is_argument:
            seen = set()
            for m in rec.events:
                if m.type not in seen:
                    seen.add(m.type)
                    out.extend(_argument_instances(rec, ontology.event(m.type), kind))
        else:
            for ev in ontology.events:
                out.append(TrainInstance(_event_query(rec, ev, kind, max_desc_sentences), rec.text,
                                         label=int(ev.name in rec.event_types)))
    return out


# --- optimization -------------------------------------------------------------


@dataclass
class TrainResult:
    encoder: object
    head: nn.Module
    head_kind: str
    losses: list  # mean training loss per epoch


def _span_targets(pair, answer):
    if answer is None:
        return 0, 0
    tokens = pair.char_span_to_tokens(*answer)
    if tokens is None:
        return 0, 0
    return pair.sentence_start + tokens[0], pair.sentence_start + tokens[1]


def _sentence_mask(pairs, T: int) -> torch.Tensor:
    m = torch.zeros((len(pairs), T), dtype=torch.long)
    for b, p in enumerate(pairs):
        m[b, p.sentence_start:p.sentence_start + p.n_sentence] = 1
    return m


def _frozen_hidden(encoder, pairs) -> torch.Tensor:
    T = max(len(p) for p in pairs)
    out = torch.zeros((len(pairs), T, encoder.dim), dtype=torch.float64)
    for b, p in enumerate(pairs):
        out[b, :len(p)] = torch.from_numpy(encoder.encode(p).token_vectors)
    return out


def train(head_kind: str, encoder, instances, config: TrainConfig, head: nn.Module | None = None) -> TrainResult:
    """Minimize the head's cross entropy by mini-batch gradient descent.

    The encoder is optimized jointly when it is an ``nn.Module`` and not frozen;
    otherwise its outputs are computed once and only the head is trained.
    """
    if head_kind not in HEADS:
        raise ValueError(f"unknown head kind {head_kind!r}")
    if not instances:
        raise ValueError("no training instances")
    head = head or HEADS[head_kind](encoder.dim, seed=config.seed)
    pairs = [encoder.tokenize(i.query.query_text, i.sentence) for i in instances]
    joint = isinstance(encoder, nn.Module) and not config.freeze_encoder
    if head_kind == "qa":
        targets = torch.tensor([_span_targets(p, i.answer) for p, i in zip(pairs, instances)], dtype=torch.long)
    else:
        targets = torch.tensor([i.label for i in instances], dtype=torch.long)
    features = None if joint else _frozen_hidden(encoder, pairs)

    params = list(head.parameters())
    if joint:
        params += list(encoder.parameters())
    if config.optimizer == "adam":
        opt = torch.optim.Adam(params, lr=config.learning_rate, weight_decay=config.weight_decay)
    else:
        opt = torch.optim.SGD(params, lr=config.learning_rate, weight_decay=config.weight_decay)
    gen = torch.Generator().manual_seed(config.seed)
    torch.manual_seed(config.seed)  # dropout draws
    if joint:
        encoder.train()
    n = len(instances)
    losses = []
    for epoch in range(config.epochs):
        order = torch.randperm(n, generator=gen)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            batch_pairs = [pairs[i] for i in idx.tolist()]
            if joint:
                ids, seg, mask = collate(batch_pairs)
                hidden = encoder(ids, seg, mask)
            else:
                hidden = features[idx]
                hidden = hidden[:, :max(len(p) for p in batch_pairs)]
            if head_kind == "qa":
                smask = _sentence_mask(batch_pairs, hidden.shape[1])
                loss = span_nll(head(hidden, smask), targets[idx, 0], targets[idx, 1])
            else:
                loss = binary_nll(head(hidden[:, 0]), targets[idx])
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch starting {lo}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        losses.append(total / n)
        log.debug("epoch %d loss %.6f", epoch, losses[-1])
    if isinstance(encoder, nn.Module):
        encoder.eval()
    return TrainResult(encoder, head, head_kind, losses)


# --- multi-seed protocol --------------------------------------------------------


@dataclass(frozen=True)
class AggregateResult:
    per_seed: tuple  # MetricTriple per seed
    seeds: tuple

    @property
    def mean(self) -> MetricTriple:
        k = len(self.per_seed)
        return MetricTriple(
            sum(m.precision for m in self.per_seed) / k,
            sum(m.recall for m in self.per_seed) / k,
            sum(m.f1 for m in self.per_seed) / k,
        )

    @property
    def std_f1(self) -> float:
        """Sample standard deviation (n - 1 denominator) of per-seed F1."""
        f1s = [m.f1 for m in self.per_seed]
        return statistics.stdev(f1s) if len(f1s) >= 2 else 0.0

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "per_seed": [m.to_dict() for m in self.per_seed],
            "mean": self.mean.to_dict(),
            "f1_std": self.std_f1,
        }


def aggregate(per_seed, seeds) -> AggregateResult:
    return AggregateResult(tuple(per_seed), tuple(seeds))


def base_encoder(records, seed: int, config: TrainConfig, vocab: Vocabulary, encoder_factory=None,
                 cache: Path | None = None):
    """Fresh encoder for one seed; a tiny encoder is first pretrained on unlabeled train text.

    With ``cache`` set, pretrained weights are stored under a key derived from the
    texts, vocabulary, encoder spec and epoch count, and reloaded on later runs.
    """
    encoder = (encoder_factory or (lambda s: TinyEncoder(vocab, seed=s)))(seed)
    if not isinstance(encoder, TinyEncoder) or config.pretrain_epochs == 0:
        return encoder
    texts = [r.text for r in by_split(records, "train")]
    path = None
    if cache is not None:
        key = stable_hash({"texts": texts, "vocab": encoder.vocab.tokens, "spec": encoder.spec(),
                           "epochs": config.pretrain_epochs})
        path = Path(cache) / f"tiny-{key[:24]}.pt"
        if path.exists():
            encoder.load_state_dict(torch.load(path))
            encoder.eval()
            return encoder
    pretrain_mlm(encoder, texts, config.pretrain_epochs, seed=seed)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(encoder.state_dict(), path)
    return encoder


def run_event_seed(records, ontology, K: int, seed: int, config: TrainConfig, encoder):
    """One K-shot event-detection run: sample, train, calibrate on dev, test.

    ``encoder`` is trained in place. Returns (test metrics, threshold, test predictions).
    """
    train_recs, dev, test = (by_split(records, s) for s in ("train", "dev", "test"))
    cfg = replace(config, seed=seed)
    sample = sample_k_shot(train_recs, ontology, K, seed, cfg.negative_ratio, cfg.event_kind,
                           cfg.max_desc_sentences)
    result = train(cfg.head_kind, encoder, sample.train_instances, cfg)
    dev_scores = score_corpus(dev, ontology, cfg.event_kind, encoder, result.head, cfg.max_desc_sentences)
    threshold = calibrate_threshold(dev_scores).threshold
    test_scores = score_corpus(test, ontology, cfg.event_kind, encoder, result.head, cfg.max_desc_sentences)
    metrics = evaluate_scores(test_scores, threshold, test)
    preds = predictions_at(test_scores, threshold, [r.id for r in test])
    return metrics, threshold, preds


def run_argument_seed(records, ontology, K: int, seed: int, config: TrainConfig, encoder,
                      event_preds: dict | None = None):
    """One K-shot argument run; returns (gold-events metrics, predicted-events metrics or None)."""
    train_recs, test = by_split(records, "train"), by_split(records, "test")
    cfg = replace(config, seed=seed)
    sample = sample_k_shot(train_recs, ontology, K, seed, kind=cfg.arg_kind)
    result = train("qa", encoder, sample.train_instances, cfg)
    preds = predict_arguments(test, ontology, cfg.arg_kind, encoder, result.head, cfg.threshold)
    gold_mode = score_arguments(preds, test, "gold-events")
    pred_mode = None
    if event_preds is not None:
        pp = predict_arguments(test, ontology, cfg.arg_kind, encoder, result.head, cfg.threshold,
                               event_preds=event_preds)
        pred_mode = score_arguments(pp, test, "predicted-events", event_preds)
    return gold_mode, pred_mode


def run_seed(records, ontology, Ks, seed: int, config: TrainConfig, tasks=("event", "argument"),
             encoder_factory=None, vocab: Vocabulary | None = None, cache: Path | None = None) -> dict:
    """All K values for one seed, sharing one (pretrained) base encoder.

    Returns {K: {"event": (metrics, threshold), "argument": metrics, "argument_predicted": metrics}}.
    """
    vocab = vocab or vocabulary_for(records, ontology)
    base = base_encoder(records, seed, config, vocab, encoder_factory, cache)
    out = {}
    for K in Ks:
        entry = {}
        event_preds = None
        if "event" in tasks:
            m, t, event_preds = run_event_seed(records, ontology, K, seed, config, copy.deepcopy(base))
            entry["event"] = (m, t)
        if "argument" in tasks:
            g, p = run_argument_seed(records, ontology, K, seed, config, copy.deepcopy(base), event_preds)
            entry["argument"] = g
            if p is not None:
                entry["argument_predicted"] = p
        log.info("K=%d seed=%d done", K, seed)
        out[K] = entry
    return out


def merge_seed_results(per_seed, seeds) -> dict:
    """Aggregate ``run_seed`` outputs (one per seed, same order as ``seeds``) per K."""
    merged = {}
    for K in per_seed[0]:
        runs = [r[K] for r in per_seed]
        entry = {}
        if "event" in runs[0]:
            entry["event"] = aggregate([r["event"][0] for r in runs], seeds)
            entry["thresholds"] = [r["event"][1] for r in runs]
        if "argument" in runs[0]:
            entry["argument"] = aggregate([r["argument"] for r in runs], seeds)
        if "argument_predicted" in runs[0]:
            entry["argument_predicted"] = aggregate([r["argument_predicted"] for r in runs], seeds)
        merged[K] = entry
    return merged


def run_few_shot_protocol(records, ontology, Ks, seeds, config: TrainConfig, tasks=("event", "argument"),
                          encoder_factory=None, vocab: Vocabulary | None = None,
                          cache: Path | None = None) -> dict:
    """For each K and seed: sample, train, calibrate on dev, evaluate on test; then aggregate.

    Returns {K: {"event": AggregateResult, "thresholds": [...], "argument": ...,
    "argument_predicted": ...}}.
    """
    if len(seeds) < 2:
        raise ValueError("the protocol needs at least two seeds")
    vocab = vocab or vocabulary_for(records, ontology)
    per_seed = [run_seed(records, ontology, Ks, s, config, tasks, encoder_factory, vocab, cache) for s in seeds]
    return merge_seed_results(per_seed, seeds)


# --- checkpoints -----------------------------------------------------------------


def save_checkpoint(path, result: TrainResult, meta: dict | None = None) -> None:
    """JSON checkpoint: magic header, encoder spec, vocabulary and named tensors."""
    tensors = []
    modules = [("head", result.head)]
    enc = result.encoder
    spec = {"kind": "frozen"}
    if isinstance(enc, TinyEncoder):
        modules.insert(0, ("encoder", enc))
        spec = {"kind": "tiny", **enc.spec()}
    for prefix, mod in modules:
        for name, t in mod.state_dict().items():
            arr = t.detach().cpu().numpy()
            tensors.append({"name": f"{prefix}.{name}", "shape": list(arr.shape),
                            "data": arr.reshape(-1).tolist()})
    vocab = getattr(enc, "vocab", None)
    doc = {
        "format": CHECKPOINT_MAGIC,
        "head_kind": result.head_kind,
        "encoder": spec,
        "vocab": vocab.tokens if vocab is not None else None,
        "meta": meta or {},
        "tensors": tensors,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path, encoder=None):
    """Rebuild (encoder, head, doc). Frozen-encoder checkpoints need ``encoder`` passed in."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not an {CHECKPOINT_MAGIC} checkpoint")
    spec = doc["encoder"]
    if spec["kind"] == "tiny":
        kwargs = {k: v for k, v in spec.items() if k != "kind"}
        encoder = TinyEncoder(Vocabulary(doc["vocab"]), **kwargs)
    elif encoder is None:
        raise ValueError("checkpoint has a frozen encoder; pass the encoder explicitly")
    head = HEADS[doc["head_kind"]](encoder.dim)
    states = {"encoder": {}, "head": {}}
    for t in doc["tensors"]:
        prefix, name = t["name"].split(".", 1)
        states[prefix][name] = torch.tensor(np.array(t["data"], dtype=np.float64).reshape(t["shape"]))
    if isinstance(encoder, TinyEncoder) and states["encoder"]:
        encoder.load_state_dict(states["encoder"])
    head.load_state_dict(states["head"])
    return encoder, head, doc


def pretrain_mlm(encoder: TinyEncoder, texts, epochs: int = 10, learning_rate: float = 3e-3,
                 batch_size: int = 32, mask_prob: float = 0.15, seed: int = 0) -> list:
    """Masked-token pretraining on unlabeled text; returns per-epoch mean loss.

    Sentences are fed as single segments, [CLS] text [SEP]; gold labels are never read.
    """
    vocab = encoder.vocab
    seqs = [[vocab.cls_id] + [vocab.id(t) for t, _, _ in word_tokenize(x)][:MAX_LEN - 2] + [vocab.sep_id]
            for x in texts if x.strip()]
    gen = torch.Generator().manual_seed(seed)
    torch.manual_seed(seed)
    opt = torch.optim.Adam(encoder.parameters(), lr=learning_rate)
    encoder.train()
    losses = []
    for _ in range(epochs):
        order = torch.randperm(len(seqs), generator=gen).tolist()
        total = 0.0
        for lo in range(0, len(seqs), batch_size):
            batch = [seqs[i] for i in order[lo:lo + batch_size]]
            T = max(len(s) for s in batch)
            ids = torch.zeros((len(batch), T), dtype=torch.long)
            mask = torch.zeros_like(ids)
            for b, s in enumerate(batch):
                ids[b, :len(s)] = torch.tensor(s)
                mask[b, :len(s)] = 1
            cand = (ids >= len(SPECIALS)) & mask.bool()
            pick = (torch.rand(ids.shape, generator=gen) < mask_prob) & cand
            if not pick.any():
                continue
            inputs = ids.masked_fill(pick, vocab.mask_id)
            hidden = encoder(inputs, torch.zeros_like(ids), mask)
            logits = encoder.lm_logits(hidden[pick])
            loss = nn.functional.cross_entropy(logits, ids[pick])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(batch)
        losses.append(total / len(seqs))
        log.debug("pretrain epoch %d loss %.6f", len(losses) - 1, losses[-1])
    encoder.eval()
    return losses

