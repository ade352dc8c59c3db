"""Transformer sentence encoder: composed item text in, embedding file out.

Reads the line-delimited JSON written by ``itemalign compose`` and produces
the embedding file format that ``itemalign`` consumes (JSON header line,
then one ``id<TAB>floats`` row per item, input order preserved).  The header
``provider`` field records the model identifier, the pooling mode, and the
instruction prefix when one is configured.

Inference is deterministic: the model runs in eval mode under
``torch.inference_mode()``, so there is no dropout and no gradient state.
Residual nondeterminism across hardware or library builds is out of
contract.

Token counts are exact subword counts from the encoder's own tokenizer,
special tokens included (a BERT-style encoder wraps every text in [CLS] and
[SEP], so empty text counts 2).  A configured instruction prefix is
prepended before tokenization, so counts and truncation flags account for
the sequence the model actually sees.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from itemalign.embeddings import EmbeddingHeader, EmbeddingSet, write_embeddings
from transformers import AutoConfig, AutoModel, AutoTokenizer

POOLINGS = ("cls", "mean")


class ProviderError(ValueError):
    """Invalid configuration or malformed input; the run aborts."""


@dataclass(frozen=True)
class ProviderConfig:
    """How to load and run the encoder; mirrored one-to-one by CLI flags."""

    model: str
    pooling: str = "cls"
    max_tokens: int = 512
    batch_size: int = 32
    device: str = "cpu"
    prefix: str = ""

    def __post_init__(self):
        if not self.model:
            raise ProviderError("model identifier must be nonempty")
        if self.pooling not in POOLINGS:
            raise ProviderError(
                f"pooling must be one of {POOLINGS}, got {self.pooling!r}"
            )
        if self.max_tokens < 1:
            raise ProviderError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.batch_size < 1:
            raise ProviderError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def provider_string(self) -> str:
        """Value stamped into the embedding file header's provider field."""
        parts = [self.model, f"pooling={self.pooling}"]
        if self.prefix:
            parts.append(f"prefix={self.prefix!r}")
        return " ".join(parts)


@dataclass(frozen=True)
class ComposedRecord:
    id: str
    condition: str
    text: str


def read_composed(source: str) -> list[ComposedRecord]:
    """Parse composed-input lines; any malformed line aborts with its number.

    Each line is a JSON object with at least `id`, `condition`, and `text`
    (string-valued); extra fields such as `token_count` are ignored.  All
    lines must share one condition, and ids must be unique.
    """
    records: list[ComposedRecord] = []
    seen: set[str] = set()
    condition: str | None = None
    for lineno, raw in enumerate(source.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProviderError(f"line {lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ProviderError(f"line {lineno}: record must be a JSON object")
        for key in ("id", "condition", "text"):
            if key not in doc:
                raise ProviderError(f"line {lineno}: missing field {key!r}")
            if not isinstance(doc[key], str):
                raise ProviderError(f"line {lineno}: field {key!r} must be a string")
        if doc["id"] in seen:
            raise ProviderError(f"line {lineno}: duplicate id {doc['id']!r}")
        seen.add(doc["id"])
        if condition is None:
            condition = doc["condition"]
        elif doc["condition"] != condition:
            raise ProviderError(
                f"line {lineno}: condition {doc['condition']!r} differs from "
                f"{condition!r}; one file holds one condition"
            )
        records.append(ComposedRecord(doc["id"], doc["condition"], doc["text"]))
    return records


class SentenceEncoder:
    """Loaded tokenizer + model pair behind ProviderConfig.

    The tokenizer and model config load eagerly (token reports need no
    weights); the model itself loads on first use.
    """

    def __init__(self, config: ProviderConfig):
        self.config = config
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(config.model)
            self._model_config = AutoConfig.from_pretrained(config.model)
        except (OSError, ValueError) as exc:
            raise ProviderError(f"cannot load model {config.model!r}: {exc}") from None
        self._model = None

    @property
    def width(self) -> int:
        return int(self._model_config.hidden_size)

    @property
    def model(self):
        if self._model is None:
            try:
                model = AutoModel.from_pretrained(self.config.model)
                model.to(self.config.device)
            except (OSError, ValueError, RuntimeError) as exc:
                raise ProviderError(
                    f"cannot load model {self.config.model!r} "
                    f"on device {self.config.device!r}: {exc}"
                ) from None
            self._model = model.eval()
        return self._model

    def _with_prefix(self, texts: list[str]) -> list[str]:
        if not self.config.prefix:
            return texts
        return [self.config.prefix + t for t in texts]

    def encode(self, texts: list[str]) -> np.ndarray:
        """(n, width) float64 matrix, rows in input order."""
        texts = self._with_prefix(texts)
        rows = []
        for start in range(0, len(texts), self.config.batch_size):
            batch = texts[start:start + self.config.batch_size]
            enc = self.tokenizer(batch, padding=True, truncation=True,
                                 max_length=self.config.max_tokens,
                                 return_tensors="pt").to(self.config.device)
            with torch.inference_mode():
                hidden = self.model(**enc).last_hidden_state
            if self.config.pooling == "cls":
                pooled = hidden[:, 0, :]
            else:
                mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
                pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
            rows.append(pooled.double().cpu().numpy())
        if not rows:
            return np.empty((0, self.width))
        return np.concatenate(rows, axis=0)

    def token_counts(self, texts: list[str]) -> list[int]:
        """Exact subword counts, special tokens and prefix included."""
        texts = self._with_prefix(texts)
        if not texts:
            return []
        # verbose=False: counting past the model's window is the point here
        encoded = self.tokenizer(list(texts), add_special_tokens=True, verbose=False)
        return [len(ids) for ids in encoded["input_ids"]]


def encode_records(records: list[ComposedRecord], config: ProviderConfig,
                   encoder: SentenceEncoder | None = None) -> EmbeddingSet:
    encoder = encoder if encoder is not None else SentenceEncoder(config)
    vectors = encoder.encode([r.text for r in records])
    header = EmbeddingHeader(
        dim=encoder.width,
        provider=config.provider_string,
        condition=records[0].condition if records else "unknown",
        count=len(records),
    )
    return EmbeddingSet(header, {r.id: vectors[i] for i, r in enumerate(records)})


def encode_file(input_file: str | Path, output_file: str | Path,
                config: ProviderConfig,
                encoder: SentenceEncoder | None = None) -> EmbeddingSet:
    """Encode every composed line of input_file into output_file."""
    in_path, out_path = Path(input_file), Path(output_file)
    if in_path.resolve() == out_path.resolve():
        raise ProviderError(f"output {out_path} would overwrite the input file")
    records = read_composed(in_path.read_text(encoding="utf-8"))
    embeddings = encode_records(records, config, encoder)
    out_path.write_text(write_embeddings(embeddings), encoding="utf-8")
    return embeddings


@dataclass(frozen=True)
class TokenRow:
    id: str
    token_count: int
    truncated: bool


def token_report(input_file: str | Path, config: ProviderConfig,
                 encoder: SentenceEncoder | None = None) -> list[TokenRow]:
    """One row per input line: id, exact subword count, over-budget flag."""
    records = read_composed(Path(input_file).read_text(encoding="utf-8"))
    encoder = encoder if encoder is not None else SentenceEncoder(config)
    counts = encoder.token_counts([r.text for r in records])
    return [TokenRow(r.id, c, c > config.max_tokens)
            for r, c in zip(records, counts)]


def render_token_csv(rows: list[TokenRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "token_count", "truncated"])
    for row in rows:
        writer.writerow([row.id, row.token_count, str(row.truncated).lower()])
    return buf.getvalue()
