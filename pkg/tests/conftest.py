import os
import sys
from pathlib import Path

import pytest
import torch

from eventmrc.corpus import generate_synthetic
from eventmrc.ontology import builtin_ontology_path, load_ontology

torch.set_num_threads(1)

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def onto():
    return load_ontology(builtin_ontology_path())


@pytest.fixture(scope="session")
def ace_onto():
    return load_ontology(DATA / "ace_style_ontology.json")


@pytest.fixture(scope="session")
def small_corpus(onto):
    return generate_synthetic(onto, 120, 3)


@pytest.fixture(autouse=True)
def _no_cache_env(monkeypatch):
    monkeypatch.delenv("EEX_CACHE_DIR", raising=False)


def make_tiny_bert(directory, words, seed=0):
    """Random 1-layer BERT masked LM plus a WordPiece vocab, saved to ``directory``."""
    from transformers import BertConfig, BertForMaskedLM, BertTokenizer

    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab = specials + sorted(set(words) - set(specials))
    tok = BertTokenizer(vocab={w: i for i, w in enumerate(vocab)})
    tok.save_pretrained(str(directory))
    torch.manual_seed(seed)
    cfg = BertConfig(vocab_size=len(vocab), hidden_size=16, num_hidden_layers=1, num_attention_heads=2,
                     intermediate_size=32, max_position_embeddings=300)
    BertForMaskedLM(cfg).save_pretrained(str(directory))
    return Path(directory)


os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
