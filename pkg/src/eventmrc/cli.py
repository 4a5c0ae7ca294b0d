"""Command-line entry point: ``eventmrc <subcommand> ...``.

Every subcommand writes its outputs plus a ``manifest.json`` (merged config,
input/output hashes, library versions) into ``--out``. Exit codes: 0 ok,
2 validation error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .corpus import CorpusError, by_split, compute_stats, load_corpus, save_corpus, synthesize
from .encoding import (AdapterEncoder, EncodingError, MockEncoder, TinyEncoder, Vocabulary,
                       vocabulary_for)
from .evaluation import (EvaluationError, dumps_report, emit_report, micro_prf, render_table,
                         score_arguments, score_arguments_overlap)
from .heads import HEADS, HeadError
from .ontology import OntologyError, builtin_ontology_path, load_ontology
from .probing import (ProbingError, calibrate_threshold, dumps_scores, evaluate_scores, load_scores,
                      predict_arguments, probe_method, random_baseline, score_corpus, significance)
from .querygen import QueryError, QueryKind, expand_queries
from .training import (DivergenceError, TrainConfig, base_encoder, full_instances, load_checkpoint,
                       merge_seed_results, run_seed, sample_k_shot, save_checkpoint, train)

log = logging.getLogger("eventmrc")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3
VALIDATION_ERRORS = (OntologyError, CorpusError, QueryError, EncodingError, EvaluationError, HeadError,
                     ProbingError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError)


class UsageError(ValueError):
    pass


# --- helpers -----------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _csv(cast):
    def parse(text):
        if isinstance(text, list):
            return [cast(x) for x in text]
        try:
            return [cast(x) for x in str(text).split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _kind(text: str) -> QueryKind:
    try:
        return QueryKind(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown query kind {text!r}; choose from {', '.join(k.value for k in QueryKind)}") from None


def _kinds(text):
    return [_kind(k) for k in _csv(str)(text)]


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _config_view(args, with_out: bool = False) -> dict:
    # the output directory stays out of reports so they do not depend on where they land
    skip = {"func", "config", "log_level"} | (set() if with_out else {"out"})
    view = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, QueryKind):
            v = v.value
        elif isinstance(v, list):
            v = [x.value if isinstance(x, QueryKind) else x for x in v]
        view[k] = v
    return view


def _write_manifest(args, out: Path, inputs, outputs) -> None:
    manifest = {
        "command": args.command,
        "config": _config_view(args, with_out=True),
        "inputs": {str(p): _sha256(p) for p in inputs if p},
        "outputs": {p.name: _sha256(p) for p in outputs},
        "versions": {"eventmrc": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "torch": torch.__version__},
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _ontology(args):
    return load_ontology(args.ontology or builtin_ontology_path())


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.learning_rate, epochs=args.epochs, batch_size=args.batch_size,
        negative_ratio=args.negative_ratio, max_desc_sentences=args.max_desc, seed=args.seed,
        optimizer=args.optimizer, weight_decay=args.weight_decay, freeze_encoder=args.freeze_encoder,
        calibrate=args.calibrate, threshold=args.threshold, event_kind=args.event_kind.value,
        arg_kind=args.arg_kind.value, pretrain_epochs=args.pretrain_epochs,
    )


def cache_dir() -> Path | None:
    d = os.environ.get("EEX_CACHE_DIR")
    return Path(d) if d else None


def resolve_encoder(uri: str, records, ontology, vocab: Vocabulary | None = None):
    """Build an encoder from ``mock:<seed>``, ``tiny:<seed>``, ``adapter:<dir>`` or ``oracle``."""
    scheme, _, rest = uri.partition(":")
    if scheme == "adapter":
        if not rest or not Path(rest).is_dir():
            raise UsageError(f"adapter directory not found: {rest!r}")
        return AdapterEncoder(rest)
    if scheme == "oracle":
        from .oracle import OracleEncoder
        return OracleEncoder(records, ontology, vocab)
    if scheme not in ("mock", "tiny"):
        raise UsageError(f"unknown encoder URI {uri!r} (use mock:<seed>, tiny:<seed> or adapter:<dir>)")
    try:
        seed = int(rest or 0)
    except ValueError:
        raise UsageError(f"encoder seed must be an integer, got {rest!r}") from None
    vocab = vocab or vocabulary_for(records, ontology)
    return MockEncoder(vocab, seed=seed) if scheme == "mock" else TinyEncoder(vocab, seed=seed)


def _head_for_kind(kind: QueryKind) -> str:
    if kind is QueryKind.TE_STATEMENT:
        return "te"
    if kind is QueryKind.PQ_EVENT:
        return "pq"
    return "qa"


# --- subcommands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    onto = _ontology(args)
    out = _out_dir(args)
    syn = synthesize(onto, args.n, args.seed, args.distractor_rate)
    corpus = out / "corpus.jsonl"
    save_corpus(syn.records, corpus)
    stats = {"stats": compute_stats(syn.records).to_dict(), "tally": dict(sorted(syn.tally.items()))}
    st = _write(out / "stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    log.info("wrote %d sentences to %s", len(syn.records), corpus)
    _write_manifest(args, out, [args.ontology], [corpus, st])
    return EXIT_OK


def cmd_generate_queries(args) -> int:
    onto = _ontology(args)
    records = load_corpus(args.corpus, onto)
    if args.split:
        records = by_split(records, args.split)
    out = _out_dir(args)
    lines = []
    for rec in records:
        for q in expand_queries(rec, onto, args.kinds, args.max_desc):
            lines.append(json.dumps(q.to_dict(), sort_keys=True, ensure_ascii=False))
    path = _write(out / "queries.jsonl", "".join(line + "\n" for line in lines))
    log.info("wrote %d queries to %s", len(lines), path)
    _write_manifest(args, out, [args.ontology, args.corpus], [path])
    return EXIT_OK


def _probe_heads(args, encoder, records, onto):
    """Trained head from --checkpoint, oracle heads, or a freshly seeded head."""
    kind = args.kind
    if args.checkpoint:
        enc, head, _ = load_checkpoint(args.checkpoint, encoder if not isinstance(encoder, TinyEncoder) else None)
        return enc, head
    if args.encoder.startswith("oracle"):
        from .oracle import oracle_heads
        heads = oracle_heads()
        return encoder, heads.get(kind, heads["span"])
    if kind.is_masked:
        return encoder, None
    return encoder, HEADS[_head_for_kind(kind)](encoder.dim, seed=args.seed)


def cmd_probe(args) -> int:
    onto = _ontology(args)
    records = load_corpus(args.corpus, onto)
    dev, test = by_split(records, "dev"), by_split(records, "test")
    if not dev or not test:
        raise UsageError("probing needs non-empty dev and test splits")
    out = _out_dir(args)
    outputs = []
    config = _config_view(args)
    if args.baseline == "random":
        dev_s, test_s = random_baseline(dev, onto, args.seed), random_baseline(test, onto, args.seed + 1)
        methods = [probe_method("RANDOM", dev_s, test_s, test)]
    else:
        encoder = resolve_encoder(args.encoder, records, onto)
        encoder, head = _probe_heads(args, encoder, records, onto)
        if args.kind.is_argument:
            preds = predict_arguments(test, onto, args.kind, encoder, head, args.threshold)
            exact = score_arguments(preds, test, "gold-events")
            methods = [{"name": args.kind.value, "threshold": args.threshold, "metrics": exact.to_dict(),
                        "overlap_metrics": score_arguments_overlap(preds, test).to_dict(),
                        "ks_statistic": None, "p_value": None}]
            dev_s = test_s = None
        else:
            dev_s = score_corpus(dev, onto, args.kind, encoder, head, args.max_desc)
            test_s = score_corpus(test, onto, args.kind, encoder, head, args.max_desc)
            methods = [probe_method(args.kind.value, dev_s, test_s, test)]
    if dev_s is not None:
        outputs.append(_write(out / "scores_dev.jsonl", dumps_scores(dev_s)))
        outputs.append(_write(out / "scores_test.jsonl", dumps_scores(test_s)))
    report = emit_report(methods, config, onto.content_hash())
    outputs.append(_write(out / "report.json", dumps_report(report)))
    sys.stdout.write(render_table(report))
    _write_manifest(args, out, [args.ontology, args.corpus, args.checkpoint], outputs)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    dev = load_scores(args.scores)
    cal = calibrate_threshold(dev)
    doc = {"calibration": cal.to_dict()}
    inputs = [args.scores]
    if args.test_scores:
        test = load_scores(args.test_scores)
        sig = significance(test)
        doc["significance"] = sig.to_dict()
        if args.corpus:
            onto = _ontology(args)
            test_recs = [r for r in load_corpus(args.corpus, onto) if r.split == "test"]
            doc["test_metrics"] = evaluate_scores(test, cal.threshold, test_recs).to_dict()
            inputs.append(args.corpus)
        inputs.append(args.test_scores)
    out = _out_dir(args)
    path = _write(out / "calibration.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(f"threshold {cal.threshold:.2f}  dev F1 {cal.f1:.4f}\n")
    _write_manifest(args, out, inputs, [path])
    return EXIT_OK


def cmd_train(args) -> int:
    onto = _ontology(args)
    records = load_corpus(args.corpus, onto)
    cfg = _train_config(args)
    train_recs = by_split(records, "train")
    if not train_recs:
        raise UsageError("corpus has no train split")
    vocab = vocabulary_for(records, onto)
    factory = lambda s: resolve_encoder(args.encoder, records, onto, vocab)  # noqa: E731
    encoder = base_encoder(records, args.seed, cfg, vocab, factory, cache=cache_dir())
    kind = args.event_kind if args.task == "event" else args.arg_kind
    if args.K:
        sample = sample_k_shot(train_recs, onto, args.K, args.seed, cfg.negative_ratio, kind, cfg.max_desc_sentences)
        instances = sample.train_instances
    else:
        instances = full_instances(train_recs, onto, kind, cfg.max_desc_sentences)
    head_kind = _head_for_kind(kind)
    result = train(head_kind, encoder, instances, cfg)
    threshold = cfg.threshold
    if cfg.calibrate and args.task == "event":
        dev = by_split(records, "dev")
        threshold = calibrate_threshold(score_corpus(dev, onto, kind, encoder, result.head,
                                                     cfg.max_desc_sentences)).threshold
    out = _out_dir(args)
    meta = {"task": args.task, "kind": kind.value, "threshold": threshold, "encoder_uri": args.encoder,
            "max_desc_sentences": cfg.max_desc_sentences, "train_config": cfg.to_dict(),
            "instances": len(instances)}
    ckpt = out / "checkpoint.json"
    save_checkpoint(ckpt, result, meta)
    tlog = _write(out / "training_log.json", json.dumps({"losses": result.losses}, indent=2) + "\n")
    log.info("trained %s head on %d instances; final loss %.6f", head_kind, len(instances), result.losses[-1])
    _write_manifest(args, out, [args.ontology, args.corpus], [ckpt, tlog])
    return EXIT_OK


def _load_trained(args, records, onto):
    doc = json.loads(Path(args.checkpoint).read_text(encoding="utf-8"))
    meta = doc.get("meta", {})
    encoder = None
    if doc.get("encoder", {}).get("kind") != "tiny":
        uri = args.encoder or meta.get("encoder_uri")
        if not uri:
            raise UsageError("checkpoint has a frozen encoder; pass --encoder")
        vocab = Vocabulary(doc["vocab"]) if doc.get("vocab") else None
        encoder = resolve_encoder(uri, records, onto, vocab)
    encoder, head, doc = load_checkpoint(args.checkpoint, encoder)
    return encoder, head, doc["meta"]


def cmd_evaluate(args) -> int:
    onto = _ontology(args)
    records = by_split(load_corpus(args.corpus, onto), args.split)
    out = _out_dir(args)
    gold = {r.id: r.event_types for r in records}
    event_preds = None
    if args.event_predictions:
        raw = json.loads(Path(args.event_predictions).read_text(encoding="utf-8"))
        event_preds = {sid: set(evs) for sid, evs in raw.items()}
    methods = []
    inputs = [args.ontology, args.corpus, args.event_predictions, args.checkpoint]
    if args.checkpoint:
        encoder, head, meta = _load_trained(args, load_corpus(args.corpus, onto), onto)
        kind = QueryKind(meta["kind"])
        threshold = args.threshold if args.threshold is not None else meta.get("threshold", 0.5)
        if kind.is_argument:
            preds = predict_arguments(records, onto, kind, encoder, head, threshold)
            entry = {"name": kind.value, "threshold": threshold,
                     "metrics": score_arguments(preds, records, "gold-events").to_dict(),
                     "overlap_metrics": score_arguments_overlap(preds, records).to_dict()}
            if event_preds is not None:
                pp = predict_arguments(records, onto, kind, encoder, head, threshold, event_preds=event_preds)
                entry["predicted_events_metrics"] = score_arguments(pp, records, "predicted-events",
                                                                    event_preds).to_dict()
            methods.append(entry)
        else:
            scores = score_corpus(records, onto, kind, encoder, head, meta.get("max_desc_sentences", 0))
            methods.append({"name": kind.value, "threshold": threshold,
                            "metrics": evaluate_scores(scores, threshold, records).to_dict()})
    elif event_preds is not None:
        methods.append({"name": "event-predictions", "threshold": None,
                        "metrics": micro_prf(event_preds, gold).to_dict()})
    else:
        raise UsageError("evaluate needs --checkpoint or --event-predictions")
    report = emit_report(methods, _config_view(args), onto.content_hash())
    path = _write(out / "report.json", dumps_report(report))
    sys.stdout.write(render_table(report))
    _write_manifest(args, out, inputs, [path])
    return EXIT_OK


def _few_shot_seed(payload):
    records, onto, Ks, seed, cfg, tasks, uri = payload
    torch.set_num_threads(1)
    vocab = vocabulary_for(records, onto)
    factory = lambda s: resolve_encoder(uri.split(":")[0] + f":{s}", records, onto, vocab)  # noqa: E731
    return run_seed(records, onto, Ks, seed, cfg, tasks, factory, vocab, cache=cache_dir())


def cmd_few_shot(args) -> int:
    onto = _ontology(args)
    records = load_corpus(args.corpus, onto)
    cfg = _train_config(args)
    if len(args.seeds) < 2:
        raise UsageError("few-shot needs at least two seeds")
    tasks = ("event", "argument") if args.task == "both" else (args.task,)
    if not args.encoder.startswith(("tiny", "mock")):
        raise UsageError("few-shot supports mock:<seed> and tiny:<seed> encoders")
    payloads = [(records, onto, args.Ks, s, cfg, tasks, args.encoder) for s in args.seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            per_seed = list(pool.map(_few_shot_seed, payloads))
    else:
        per_seed = [_few_shot_seed(p) for p in payloads]
    results = merge_seed_results(per_seed, args.seeds)
    few = {}
    methods = []
    for K in args.Ks:
        entry = {name: agg.to_dict() for name, agg in results[K].items() if name != "thresholds"}
        if "thresholds" in results[K]:
            entry["thresholds"] = results[K]["thresholds"]
        few[str(K)] = entry
        for name, agg in results[K].items():
            if name == "thresholds":
                continue
            methods.append({"name": f"{name} K={K}", "threshold": None, "metrics": agg.mean.to_dict(),
                            "f1_std": agg.std_f1})
    report = emit_report(methods, _config_view(args), onto.content_hash(), {"few_shot": few})
    out = _out_dir(args)
    path = _write(out / "report.json", dumps_report(report))
    sys.stdout.write(render_table(report))
    _write_manifest(args, out, [args.ontology, args.corpus], [path])
    return EXIT_OK


def cmd_report(args) -> int:
    tables = []
    for p in args.reports:
        rep = json.loads(Path(p).read_text(encoding="utf-8"))
        if rep.get("schema") is None or "methods" not in rep:
            raise UsageError(f"{p} is not an experiment report")
        tables.append(f"# {p}\n" + render_table(rep))
    text = "\n".join(tables)
    sys.stdout.write(text)
    if args.out:
        out = _out_dir(args)
        path = _write(out / "table.txt", text)
        _write_manifest(args, out, args.reports, [path])
    return EXIT_OK


# --- parser ------------------------------------------------------------------------


def _add_common(p, out_required=True):
    p.add_argument("--config", help="JSON file of option defaults; explicit flags win")
    p.add_argument("--ontology", help="ontology JSON (default: built-in synthetic ontology)")
    p.add_argument("--out", required=out_required, help="output directory")
    p.add_argument("--log-level", default="WARNING")


def _add_train_opts(p):
    d = TrainConfig()
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--negative-ratio", type=int, default=d.negative_ratio)
    p.add_argument("--max-desc", type=int, default=d.max_desc_sentences,
                   help="description sentences appended to statements (0, 1, 5 in the original variants)")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=d.optimizer)
    p.add_argument("--weight-decay", type=float, default=d.weight_decay)
    p.add_argument("--freeze-encoder", action="store_true")
    p.add_argument("--pretrain-epochs", type=int, default=d.pretrain_epochs,
                   help="masked-token epochs on unlabeled train text before fine-tuning (tiny encoder)")
    p.add_argument("--calibrate", action="store_true", help="recalibrate the event threshold on dev")
    p.add_argument("--threshold", type=float, default=d.threshold)
    p.add_argument("--event-kind", type=_kind, default=QueryKind(d.event_kind))
    p.add_argument("--arg-kind", type=_kind, default=QueryKind(d.arg_kind))
    p.add_argument("--encoder", default="tiny:0")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eventmrc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"eventmrc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    _add_common(p)
    p.add_argument("--n", type=int, default=1500)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--distractor-rate", type=float, default=0.4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("generate-queries", help="expand a corpus into query JSONL")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--kinds", type=_kinds, default=[QueryKind.TE_STATEMENT])
    p.add_argument("--split", choices=("train", "dev", "test"))
    p.add_argument("--max-desc", type=int, default=0)
    p.set_defaults(func=cmd_generate_queries)

    p = sub.add_parser("probe", help="zero-shot scoring, calibration and KS test")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--encoder", default="mock:0", help="mock:<seed>, tiny:<seed>, adapter:<dir> or oracle")
    p.add_argument("--kind", type=_kind, default=QueryKind.TE_STATEMENT)
    p.add_argument("--checkpoint", help="trained head (and tiny encoder) to probe with")
    p.add_argument("--baseline", choices=("random",))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-desc", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5, help="span threshold for argument kinds")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("calibrate", help="pick the dev threshold for a score file")
    _add_common(p)
    p.add_argument("--scores", required=True, help="dev score JSONL")
    p.add_argument("--test-scores", help="optional test score JSONL for KS and test metrics")
    p.add_argument("--corpus", help="corpus with the test sentences (for test metrics)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("train", help="train a head (and tiny encoder)")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=("event", "argument"), default="event")
    p.add_argument("--K", type=int, help="K-shot sample instead of the full train split")
    p.add_argument("--seed", type=int, default=0)
    _add_train_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("few-shot", help="K-shot protocol over several seeds")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--Ks", type=_csv(int), default=[1, 3, 5, 7, 9])
    p.add_argument("--seeds", type=_csv(int), default=[0, 1, 2])
    p.add_argument("--task", choices=("event", "argument", "both"), default="both")
    p.add_argument("--jobs", type=int, default=1, help="parallel per-seed runs")
    _add_train_opts(p)
    p.set_defaults(func=cmd_few_shot, seed=0)

    p = sub.add_parser("evaluate", help="score a checkpoint or event predictions against gold")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--checkpoint")
    p.add_argument("--encoder", help="encoder URI for frozen-encoder checkpoints")
    p.add_argument("--event-predictions", help='JSON {"sentence_id": ["Event", ...]}')
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render report JSON files as a table")
    _add_common(p, out_required=False)
    p.add_argument("reports", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


def _subparser(parser, command):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return sub.choices[command]


def parse_args(argv=None):
    """Parse flags, folding in ``--config`` JSON as defaults so explicit flags win."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        subparser = _subparser(parser, args.command)
        known = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            action = known[dest]
            if action.type is not None and value is not None and not isinstance(value, bool):
                value = action.type(value)
            defaults[dest] = value
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors already printed
        return EXIT_VALIDATION if exc.code else EXIT_OK
    except VALIDATION_ERRORS as exc:
        print(f"eventmrc: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(1)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"eventmrc: training diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except VALIDATION_ERRORS as exc:
        print(f"eventmrc: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"eventmrc: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
