import numpy as np
import pytest

from itemalign.classifiers import Dataset
from itemalign.corpus import Corpus, Item, canonical_scheme
from itemalign.embeddings import (
    EmbeddingHeader,
    EmbeddingSet,
    PlantedConfig,
    synthetic_embeddings,
)

# Table-layout fixture counts: per-skill sizes whose domain sums are
# (289, 383, 269, 329) and total 1270.
TEST_A_SKILL_COUNTS = (148, 141, 196, 93, 94, 128, 141, 180, 98, 51)
TEST_B_SKILL_COUNTS = (127, 126, 160, 70, 77, 109, 119, 151, 77, 36)


def make_item(item_id, skill, scheme=None, **overrides):
    scheme = scheme or canonical_scheme()
    fields = dict(
        id=item_id,
        prompt=f"Sample passage for item {item_id}.",
        options=("alpha", "beta", "gamma", "delta"),
        key="B",
        domain=scheme.skill_to_domain[skill],
        skill=skill,
    )
    fields.update(overrides)
    return Item(**fields)


def make_corpus(skill_counts, name="fixture", prefix="item"):
    scheme = canonical_scheme()
    items = []
    for skill, count in enumerate(skill_counts, start=1):
        for j in range(count):
            items.append(make_item(f"{prefix}-s{skill}-{j:04d}", skill, scheme))
    return Corpus(name=name, scheme=scheme, items=items)


@pytest.fixture
def scheme():
    return canonical_scheme()


@pytest.fixture
def table_one_corpus():
    return make_corpus(TEST_A_SKILL_COUNTS, name="test-A")


@pytest.fixture
def small_corpus():
    # one item per skill
    return make_corpus((1,) * 10, name="tiny")


def make_embedding_set(matrix, ids=None, provider="synthetic", condition="synthetic"):
    matrix = np.asarray(matrix, dtype=np.float64)
    if ids is None:
        ids = [f"p{i:04d}" for i in range(matrix.shape[0])]
    header = EmbeddingHeader(matrix.shape[1], provider, condition, matrix.shape[0])
    return EmbeddingSet(header, {i: row for i, row in zip(ids, matrix)})


def make_planted_datasets(n_train_per_class=100, n_test_per_class=50, n_classes=2,
                          dim=64, separation=10.0, seed=7):
    """Well-separated Gaussian class clouds split into train and test Datasets."""
    config = PlantedConfig(n_classes=n_classes, dim=dim,
                           class_separation=separation, seed=seed)
    train_ids, test_ids = [], []
    class_of = {}
    for c in range(n_classes):
        for j in range(n_train_per_class):
            i = f"tr-{c}-{j:03d}"
            train_ids.append(i)
            class_of[i] = c + 1  # generator classes are 1-based
        for j in range(n_test_per_class):
            i = f"te-{c}-{j:03d}"
            test_ids.append(i)
            class_of[i] = c + 1
    embs = synthetic_embeddings(train_ids + test_ids, config, class_of)
    names = tuple(f"class-{c}" for c in range(n_classes))

    def dataset(ids):
        x = np.stack([embs.vector(i) for i in ids])
        y = np.array([class_of[i] - 1 for i in ids])
        return Dataset(features=x, labels=y, class_names=names)

    return dataset(train_ids), dataset(test_ids)
