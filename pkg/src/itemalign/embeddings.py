"""Embedding sets: the on-disk format, validation, normalization, and a
deterministic synthetic generator with plantable class structure.

File format: the first line is a JSON header {dim, provider, condition,
count}; each following line is `<id>\\t<v1> <v2> ... <vdim>` with floats in
shortest round-trip decimal form, UTF-8, LF line endings.  Floats survive
write/read bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import gaussian_vector


class EmbeddingFormatError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingHeader:
    dim: int
    provider: str
    condition: str
    count: int

    def __post_init__(self):
        if self.dim < 1:
            raise EmbeddingFormatError(f"dim must be >= 1, got {self.dim}")
        if self.count < 0:
            raise EmbeddingFormatError(f"count must be >= 0, got {self.count}")


class EmbeddingSet:
    """Fixed-dimension vectors keyed by item id, in insertion order."""

    def __init__(self, header: EmbeddingHeader, records: dict[str, np.ndarray]):
        if len(records) != header.count:
            raise EmbeddingFormatError(
                f"header count {header.count} != number of records {len(records)}"
            )
        for item_id, vec in records.items():
            if vec.shape != (header.dim,):
                raise EmbeddingFormatError(
                    f"vector for id {item_id!r} has length {vec.shape[0]}, expected {header.dim}"
                )
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFormatError(f"non-finite component in vector for id {item_id!r}")
        self.header = header
        self.records = {k: np.asarray(v, dtype=np.float64) for k, v in records.items()}

    @property
    def dim(self) -> int:
        return self.header.dim

    def ids(self) -> list[str]:
        return list(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def vector(self, item_id: str) -> np.ndarray:
        return self.records[item_id]

    def matrix(self, ids: list[str] | None = None) -> np.ndarray:
        """Row matrix for the given ids (all records when ids is None)."""
        if ids is None:
            ids = self.ids()
        missing = [i for i in ids if i not in self.records]
        if missing:
            raise KeyError(f"ids not present in embedding set: {missing[:5]}")
        return np.stack([self.records[i] for i in ids]) if ids else np.empty((0, self.dim))

    def subset(self, ids: list[str]) -> "EmbeddingSet":
        records = {i: self.records[i] for i in ids}
        header = EmbeddingHeader(self.header.dim, self.header.provider,
                                 self.header.condition, len(records))
        return EmbeddingSet(header, records)


def write_embeddings(embeddings: EmbeddingSet) -> str:
    header = {
        "dim": embeddings.header.dim,
        "provider": embeddings.header.provider,
        "condition": embeddings.header.condition,
        "count": embeddings.header.count,
    }
    lines = [json.dumps(header)]
    for item_id, vec in embeddings.records.items():
        lines.append(item_id + "\t" + " ".join(repr(float(x)) for x in vec))
    return "\n".join(lines) + "\n"


def read_embeddings(source: str) -> EmbeddingSet:
    lines = source.splitlines()
    if not lines:
        raise EmbeddingFormatError("empty embedding file")
    try:
        raw_header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise EmbeddingFormatError(f"invalid header JSON: {exc.msg}") from None
    for key in ("dim", "provider", "condition", "count"):
        if key not in raw_header:
            raise EmbeddingFormatError(f"header missing field {key!r}")
    header = EmbeddingHeader(
        dim=int(raw_header["dim"]),
        provider=str(raw_header["provider"]),
        condition=str(raw_header["condition"]),
        count=int(raw_header["count"]),
    )
    records: dict[str, np.ndarray] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        item_id, sep, payload = raw.partition("\t")
        if not sep:
            raise EmbeddingFormatError(f"line {lineno}: missing tab separator")
        if item_id in records:
            raise EmbeddingFormatError(f"line {lineno}: duplicate id {item_id!r}")
        fields = payload.split()
        if len(fields) != header.dim:
            raise EmbeddingFormatError(
                f"line {lineno} (id {item_id!r}): {len(fields)} components, expected {header.dim}"
            )
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise EmbeddingFormatError(f"line {lineno} (id {item_id!r}): {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise EmbeddingFormatError(f"line {lineno} (id {item_id!r}): non-finite component")
        records[item_id] = np.array(values, dtype=np.float64)
    if len(records) != header.count:
        raise EmbeddingFormatError(
            f"header count {header.count} != number of rows {len(records)}"
        )
    return EmbeddingSet(header, records)


def l2_normalize(embeddings: EmbeddingSet) -> EmbeddingSet:
    """Rescale every vector to unit Euclidean norm.  Idempotent."""
    records: dict[str, np.ndarray] = {}
    for item_id, vec in embeddings.records.items():
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ValueError(f"cannot normalize zero vector for id {item_id!r}")
        records[item_id] = vec / norm
    return EmbeddingSet(embeddings.header, records)


@dataclass(frozen=True)
class PlantedConfig:
    """Controlled class geometry for synthetic embeddings.

    Class means sit on a sphere of radius class_separation/2 around the
    origin; overlap_pairs then pull selected class means together to plant
    the kind of semantic overlap the diagnostics are meant to detect.
    """

    n_classes: int
    dim: int = 64
    class_separation: float = 10.0
    noise_sigma: float = 1.0
    overlap_pairs: tuple[tuple[int, int, float], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1:
            raise ValueError("n_classes must be positive")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.class_separation < 0:
            raise ValueError("class_separation must be nonnegative")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        for a, b, sep in self.overlap_pairs:
            if not (1 <= a <= self.n_classes and 1 <= b <= self.n_classes):
                raise ValueError(f"overlap pair ({a}, {b}) references unknown classes")
            if sep < 0:
                raise ValueError("overlap_separation must be nonnegative")
            if sep >= self.class_separation:
                raise ValueError("overlap_separation must be below class_separation")


def planted_class_means(config: PlantedConfig) -> dict[int, np.ndarray]:
    """Deterministic class means (1-based class indices)."""
    radius = config.class_separation / 2.0
    means: dict[int, np.ndarray] = {}
    for c in range(1, config.n_classes + 1):
        direction = np.array(gaussian_vector(config.dim, config.seed, "class-mean", c))
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:  # measure-zero guard
            direction = np.zeros(config.dim)
            direction[0] = 1.0
            norm = 1.0
        means[c] = direction / norm * radius
    for a, b, sep in config.overlap_pairs:
        offset = means[b] - means[a]
        norm = float(np.linalg.norm(offset))
        if norm == 0.0:
            offset = np.array(gaussian_vector(config.dim, config.seed, "overlap", a, b))
            norm = float(np.linalg.norm(offset))
        means[b] = means[a] + offset / norm * sep
    return means


def synthetic_embeddings(
    ids: list[str],
    config: PlantedConfig,
    class_of: dict[str, int],
    provider: str = "synthetic",
    condition: str = "synthetic",
) -> EmbeddingSet:
    """Generate one vector per id: class mean plus isotropic Gaussian noise.

    The noise stream is keyed by (seed, id), so each id's vector does not
    depend on the order or presence of other ids.
    """
    missing = [i for i in ids if i not in class_of]
    if missing:
        raise ValueError(f"class_of missing ids: {missing[:5]}")
    means = planted_class_means(config)
    records: dict[str, np.ndarray] = {}
    for item_id in ids:
        cls = class_of[item_id]
        if cls not in means:
            raise ValueError(f"id {item_id!r} has class {cls} outside 1..{config.n_classes}")
        noise = np.array(gaussian_vector(config.dim, config.seed, "noise", item_id))
        records[item_id] = means[cls] + config.noise_sigma * noise
    header = EmbeddingHeader(config.dim, provider, condition, len(records))
    return EmbeddingSet(header, records)
