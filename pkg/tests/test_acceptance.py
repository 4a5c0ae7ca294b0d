"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` (lines are also repeated in the
terminal summary). Criterion 7 trains 12 models and takes a couple of minutes.
"""
import json
import math
import sys
import time

import numpy as np
import pytest
import torch
from scipy import stats

from eventmrc.corpus import by_split, compute_stats, generate_synthetic, load_corpus
from eventmrc.encoding import TinyEncoder, tokenize_pair, vocabulary_for
from eventmrc.heads import (BinaryEventScore, EntailmentHead, EntailmentLogits, PolarHead, SpanHead,
                            SpanLabels, SpanScores, collapse_to_binary, decode_span, entailment_loss,
                            span_loss)
from eventmrc.oracle import OracleEncoder, oracle_heads
from eventmrc.probing import (GRID, ScoredInstance, calibrate_threshold, ks_two_sample, probe_method,
                              random_baseline, score_corpus, significance)
from eventmrc.querygen import QueryKind, make_arg_question, make_event_statement, make_event_trigger_question, \
    make_masked_query
from eventmrc.training import TrainConfig, run_few_shot_protocol

from conftest import DATA
from test_cli import _files, _pipeline
from test_encoding import _head_loss
from test_heads import brute_decode
from test_probing import oracle_calibration

RESULTS = []


def verdict(n, title, ok, detail):
    line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    sys.__stdout__.write("\n" + line + "\n")
    sys.__stdout__.flush()
    assert ok, line


def test_01_template_golden(ace_onto):
    t0 = time.perf_counter()
    gold = json.loads((DATA / "golden_queries.json").read_text(encoding="utf-8"))
    from eventmrc.ontology import ArgumentRole, EventType
    bare = lambda name, roles=(): EventType(name, (), tuple(ArgumentRole(r, None) for r in roles))  # noqa: E731
    checks = [make_event_statement(bare(n), 0) == s for n, s in gold["statement"].items()]
    checks.append(make_event_statement(ace_onto.event("Marry"), 1) == gold["statement_desc1_marry"])
    checks.append(make_event_statement(ace_onto.event("Be-Born"), 5) == gold["statement_desc5_be_born"])
    checks.append(make_arg_question(bare("Transfer-Ownership", ["Artifact"]), "Artifact",
                                    QueryKind.ARG_TEMPLATE) == gold["arg_template"])
    for key, text in gold["arg_guide"].items():
        e, r = key.split("/")
        checks.append(make_arg_question(ace_onto.event(e), r, QueryKind.ARG_GUIDE) == text)
    tr = bare("Transport", ["Destination"])
    checks.append(make_arg_question(tr, "Destination", QueryKind.ARG_TRIG, "deploy") == gold["arg_trig"])
    checks.append(make_arg_question(tr, "Destination", QueryKind.ARG_TRIG_PLUS, "deploy") == gold["arg_trig_plus"])
    checks += [make_event_trigger_question(bare(n)) == s for n, s in gold["trigger_question"].items()]
    checks.append(make_masked_query(QueryKind.MTP_TE).query_text == gold["mtp_te"])
    checks.append(make_masked_query(QueryKind.MTP_QA).query_text == gold["mtp_qa"])
    dt = time.perf_counter() - t0
    verdict(1, "template golden suite", all(checks) and dt < 1,
            f"{sum(checks)}/{len(checks)} strings byte-identical in {dt:.3f}s (limit 1s)")


def test_02_span_decoder_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    mismatches = 0
    for k in range(1000):
        n = int(rng.integers(1, 65))
        thr = (0.0, 0.25, 0.5)[k % 3]
        st, en = rng.dirichlet(np.full(n, 0.3)), rng.dirichlet(np.full(n, 0.3))
        mismatches += decode_span(SpanScores(st, en), thr) != brute_decode(st, en, thr)
    dt = time.perf_counter() - t0
    verdict(2, "span-decoder oracle", mismatches == 0 and dt < 5,
            f"{1000 - mismatches}/1000 exact matches in {dt:.2f}s (limit 5s)")


def test_03_calibration_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    bad = 0
    for _ in range(200):
        n = int(rng.integers(1, 60))
        scores = (rng.integers(0, 100, n) + 0.5) / 100
        gold = rng.integers(0, 2, n)
        gold[int(rng.integers(0, n))] = 1
        pairs = list(zip(scores.tolist(), gold.tolist()))
        res = calibrate_threshold([ScoredInstance("s", "k", "E", None, s, g) for s, g in pairs])
        f1, t = oracle_calibration(pairs)
        bad += not (abs(res.f1 - f1) < 1e-12 and res.threshold == t and res.threshold in GRID)
    dt = time.perf_counter() - t0
    verdict(3, "threshold-calibration oracle", bad == 0 and dt < 5,
            f"{200 - bad}/200 sets equal the exhaustive oracle (F1 and smallest grid t) in {dt:.2f}s (limit 5s)")


def test_04_losses_and_gradients(onto, small_corpus):
    t0 = time.perf_counter()
    errs = [
        abs(entailment_loss(BinaryEventScore(0.5, 0.5), 1) - 0.693147),
        abs(span_loss(SpanScores(np.full(4, 0.25), np.full(4, 0.25)), SpanLabels(1, 2)) - 2.772589),
        abs(entailment_loss(BinaryEventScore(0.1, 0.9), 0) - 2.302585),
    ]
    exact = [abs(entailment_loss(BinaryEventScore(0.5, 0.5), 1) - math.log(2)),
             abs(span_loss(SpanScores(np.full(4, 0.25), np.full(4, 0.25)), SpanLabels(1, 2)) - 2 * math.log(4)),
             abs(entailment_loss(BinaryEventScore(0.1, 0.9), 0) + math.log(0.1))]
    vocab = vocabulary_for(small_corpus, onto)
    pairs = [tokenize_pair("Hence, an event about Marry happened.", "They got married.", vocab),
             tokenize_pair("Who is the attacker?", "Rebels bombed the embassy.", vocab)]
    worst = 0.0
    rng = np.random.default_rng(0)
    for kind, cls in (("te", EntailmentHead), ("pq", PolarHead), ("qa", SpanHead)):
        enc = TinyEncoder(vocab, seed=5)
        enc.eval()
        head = cls(enc.dim, seed=2)
        params = list(enc.parameters()) + list(head.parameters())
        grads = torch.autograd.grad(_head_loss(kind, enc, head, pairs), params)
        coords = [(k, tuple(i)) for k, g in enumerate(grads) for i in torch.nonzero(g.abs() > 1e-7).tolist()]
        for c in rng.choice(len(coords), 5, replace=False):
            k, idx = coords[c]
            with torch.no_grad():
                orig = params[k][idx].item()
                params[k][idx] = orig + 1e-4
                up = _head_loss(kind, enc, head, pairs).item()
                params[k][idx] = orig - 1e-4
                down = _head_loss(kind, enc, head, pairs).item()
                params[k][idx] = orig
            num, ana = (up - down) / 2e-4, grads[k][idx].item()
            worst = max(worst, abs(num - ana) / max(abs(num), abs(ana)))
    dt = time.perf_counter() - t0
    ok = max(exact) < 1e-9 and max(errs) < 1e-6 and worst < 1e-3 and dt < 30
    verdict(4, "loss / gradient checks", ok,
            f"closed-form error {max(exact):.1e} (limit 1e-9); worst FD relative error {worst:.1e} "
            f"over 3 heads x 5 coordinates (limit 1e-3); {dt:.1f}s (limit 30s)")


def test_05_ks():
    t0 = time.perf_counter()
    d0 = ks_two_sample([1, 2, 3], [1, 2, 3]).ks_statistic
    d1 = ks_two_sample([10, 11, 12, 13], [0, 1, 2, 3]).ks_statistic
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        a, b = rng.normal(size=int(rng.integers(2, 80))), rng.normal(0.3, size=int(rng.integers(2, 80)))
        r = ks_two_sample(a, b)
        lam = math.sqrt(len(a) * len(b) / (len(a) + len(b))) * r.ks_statistic
        worst = max(worst, abs(r.p_value - stats.kstwobign.sf(lam)))
    dt = time.perf_counter() - t0
    verdict(5, "KS test", d0 == 0 and d1 == 1 and worst < 1e-6 and dt < 1,
            f"D(identical)={d0}, D(disjoint)={d1}, max |p - scipy kstwobign| = {worst:.1e} (limit 1e-6), {dt:.3f}s")


def test_06_collapse_shift_invariance():
    # The binary collapse softmax(l0 + l2, l1) adds 2c to one side and c to the
    # other under a common shift, so the literal formula cannot satisfy this
    # criterion; it is evaluated as stated and expected to fail.
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        l0, l1, l2 = rng.normal(size=3)
        base = collapse_to_binary(EntailmentLogits(l0, l1, l2))
        for c in (-100.0, 0.0, 100.0):
            s = collapse_to_binary(EntailmentLogits(l0 + c, l1 + c, l2 + c))
            worst = max(worst, abs(s.p0 - base.p0), abs(s.p1 - base.p1))
    verdict(6, "softmax-collapse shift invariance", worst < 1e-9,
            f"max change of (p0, p1) over c in {{-100, 0, 100}} = {worst:.3g} (limit 1e-9)")


def test_07_synthetic_few_shot(onto):
    t0 = time.perf_counter()
    records = generate_synthetic(onto, 1500, 7)
    sizes = {k: v.sentences for k, v in compute_stats(records).by_split.items()}
    roles_ok = len(onto.events) == 6 and all(len(e.role_names) >= 2 for e in onto.events)
    res = run_few_shot_protocol(records, onto, [1, 9], [0, 1, 2], TrainConfig())
    dt = time.perf_counter() - t0
    ev1, ev9 = res[1]["event"].mean.f1, res[9]["event"].mean.f1
    arg1, arg9 = res[1]["argument"].mean.f1, res[9]["argument"].mean.f1
    ok = (roles_ok and sizes == {"train": 1000, "dev": 250, "test": 250}
          and ev9 >= 0.90 and arg9 >= 0.80 and ev1 <= ev9 and arg1 <= arg9 and dt <= 600)
    verdict(7, "synthetic end-to-end few-shot", ok,
            f"K=9 event F1 {ev9:.3f} ± {res[9]['event'].std_f1:.3f} (need >= 0.90), "
            f"argument F1 {arg9:.3f} ± {res[9]['argument'].std_f1:.3f} (need >= 0.80); "
            f"K=1 event {ev1:.3f}, argument {arg1:.3f} (need <= K=9); {dt:.0f}s (limit 600s)")


def test_08_zero_shot_plumbing(onto):
    records = generate_synthetic(onto, 1500, 7)
    dev, test = by_split(records, "dev"), by_split(records, "test")
    enc = OracleEncoder(records, onto)
    head = oracle_heads()[QueryKind.TE_STATEMENT]
    entry = probe_method("oracle", score_corpus(dev, onto, "TE_STATEMENT", enc, head),
                         score_corpus(test, onto, "TE_STATEMENT", enc, head), test)
    oracle_f1 = entry["metrics"]["f1"]
    gaps, significant = [], 0
    for seed in range(20):
        dev_scores = random_baseline(dev, onto, seed)
        rate = np.mean([s.gold for s in dev_scores])
        gaps.append(calibrate_threshold(dev_scores).f1 - 2 * rate / (1 + rate))
        significant += significance(random_baseline(test, onto, 1000 + seed)).p_value <= 0.05
    ok = oracle_f1 == 1.0 and max(abs(g) for g in gaps) <= 0.05 and significant <= 2
    verdict(8, "zero-shot plumbing sanity", ok,
            f"oracle test F1 {oracle_f1}; random calibrated dev F1 - base-rate F1 in "
            f"[{min(gaps):.3f}, {max(gaps):.3f}] (limit ±0.05); KS p > 0.05 in {20 - significant}/20 seeds (need >= 18)")


def test_09_cli_determinism(tmp_path):
    from eventmrc.cli import main
    assert main(["synth", "--n", "60", "--seed", "3", "--out", str(tmp_path / "src")]) == 0
    corpus = tmp_path / "src" / "corpus.jsonl"
    first = {d.name: _files(d) for d in _pipeline(tmp_path / "run", corpus)}
    second = {d.name: _files(d) for d in _pipeline(tmp_path / "run", corpus)}
    same = [n for n in first if first[n] == second[n]]
    verdict(9, "CLI determinism", len(same) == len(first),
            f"{len(same)}/{len(first)} commands rewrote byte-identical outputs ({', '.join(sorted(first))})")


def test_10_ace_style_structural(ace_onto):
    path = DATA / "ace_style_sample.jsonl"
    st = compute_stats(load_corpus(path, ace_onto))
    raw = [json.loads(l) for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
    expect = {}
    for r in raw:  # independent tally straight from the JSON
        c = expect.setdefault(r["split"], [0, 0, 0])
        c[0] += 1
        c[1] += len(r["events"])
        c[2] += sum(len(e["arguments"]) for e in r["events"])
    got = {k: [v.sentences, v.events, v.arguments] for k, v in st.by_split.items()}
    total = [st.total.sentences, st.total.events, st.total.arguments]
    ok = got == expect and total == [sum(v[i] for v in expect.values()) for i in range(3)]
    verdict(10, "ACE-style data path", ok, f"stats {got} reproduce the file's own tally {expect}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
