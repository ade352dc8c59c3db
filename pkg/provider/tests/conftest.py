"""Shared fixtures: a tiny local BERT checkpoint so tests never touch a network."""

import os

os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("HF_HUB_OFFLINE", "1")

import json
import string

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizer

HIDDEN_SIZE = 32
CONDITION = "prompt_table_figure_options"


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> str:
    """Randomly initialized 2-layer BERT with a wordpiece vocab, saved locally."""
    root = tmp_path_factory.mktemp("ckpt")
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    pieces = list(string.ascii_lowercase) + list(string.digits)
    words = ["passage", "text", "skill", "item", ",", "."]
    vocab = specials + pieces + ["##" + p for p in pieces] + words
    vocab_path = root / "vocab.txt"
    vocab_path.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(vocab_path))
    config = BertConfig(vocab_size=len(vocab), hidden_size=HIDDEN_SIZE,
                        num_hidden_layers=2, num_attention_heads=4,
                        intermediate_size=64, max_position_embeddings=512)
    torch.manual_seed(7)
    model = BertModel(config)
    target = root / "model"
    model.save_pretrained(target)
    tokenizer.save_pretrained(target)
    return str(target)


def composed_line(item_id: str, text: str, condition: str = CONDITION) -> str:
    return json.dumps({
        "id": item_id,
        "condition": condition,
        "text": text,
        "token_count": len(text.split()),
        "truncated": False,
    }, sort_keys=True)


@pytest.fixture
def composed_file(tmp_path):
    """Six composed items: e2/e5 share a text, e4 is empty."""
    texts = {
        "e1": "passage text for skill one",
        "e2": "the same item text twice",
        "e3": "a b c d e",
        "e4": "",
        "e5": "the same item text twice",
        "e6": "passage, text. item 42",
    }
    path = tmp_path / "items.composed.jsonl"
    path.write_text(
        "\n".join(composed_line(i, t) for i, t in texts.items()) + "\n",
        encoding="utf-8")
    return path


@pytest.fixture
def long_file(tmp_path):
    """One composed item whose text is 1,000 words."""
    words = " ".join(f"word{i:04d}" for i in range(1000))
    path = tmp_path / "long.composed.jsonl"
    path.write_text(composed_line("long-1", words) + "\n", encoding="utf-8")
    return path
