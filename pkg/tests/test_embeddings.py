import math

import numpy as np
import pytest

from itemalign.embeddings import (
    EmbeddingFormatError,
    EmbeddingHeader,
    EmbeddingSet,
    PlantedConfig,
    l2_normalize,
    planted_class_means,
    read_embeddings,
    synthetic_embeddings,
    write_embeddings,
)


def make_set(records, provider="test", condition="prompt_only"):
    arrays = {k: np.asarray(v, dtype=np.float64) for k, v in records.items()}
    dim = next(iter(arrays.values())).shape[0]
    return EmbeddingSet(EmbeddingHeader(dim, provider, condition, len(arrays)), arrays)


class TestFileFormat:
    def test_roundtrip_identity(self):
        es = make_set({"a": [1.0, 0.25, -3.5], "b": [0.1, 0.2, 0.3]})
        again = read_embeddings(write_embeddings(es))
        assert again.ids() == ["a", "b"]
        assert again.header == es.header
        for i in es.ids():
            assert np.array_equal(again.vector(i), es.vector(i))

    def test_bit_exact_floats(self):
        # values chosen to exercise shortest-repr round-tripping
        rng = np.random.default_rng(0)
        vecs = {f"id{i}": rng.standard_normal(5) * 10.0 ** rng.integers(-8, 8)
                for i in range(20)}
        es = make_set(vecs)
        text = write_embeddings(es)
        again = read_embeddings(text)
        for i in es.ids():
            assert again.vector(i).tobytes() == es.vector(i).tobytes()
        # write o read is the identity on canonical files
        assert write_embeddings(again) == text

    def test_dim_mismatch_names_row(self):
        text = '{"dim": 3, "provider": "p", "condition": "c", "count": 1}\nrow1\t1.0 2.0\n'
        with pytest.raises(EmbeddingFormatError, match="row1"):
            read_embeddings(text)

    def test_nonfinite_rejected(self):
        text = '{"dim": 2, "provider": "p", "condition": "c", "count": 1}\nr\t1.0 nan\n'
        with pytest.raises(EmbeddingFormatError, match="non-finite"):
            read_embeddings(text)

    def test_duplicate_id_rejected(self):
        text = (
            '{"dim": 1, "provider": "p", "condition": "c", "count": 2}\n'
            "x\t1.0\nx\t2.0\n"
        )
        with pytest.raises(EmbeddingFormatError, match="duplicate"):
            read_embeddings(text)

    def test_count_mismatch_rejected(self):
        text = '{"dim": 1, "provider": "p", "condition": "c", "count": 2}\nx\t1.0\n'
        with pytest.raises(EmbeddingFormatError, match="count"):
            read_embeddings(text)


class TestNormalize:
    def test_three_four_five(self):
        es = make_set({"v": [3.0, 4.0]})
        out = l2_normalize(es)
        assert np.allclose(out.vector("v"), [0.6, 0.8], atol=1e-15)

    def test_unit_vector_unchanged(self):
        es = make_set({"v": [1.0, 0.0, 0.0]})
        out = l2_normalize(es)
        assert abs(np.linalg.norm(out.vector("v")) - 1.0) < 1e-12

    def test_zero_vector_names_id(self):
        es = make_set({"bad": [0.0, 0.0]})
        with pytest.raises(ValueError, match="bad"):
            l2_normalize(es)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        es = make_set({f"i{k}": rng.standard_normal(8) for k in range(10)})
        once = l2_normalize(es)
        twice = l2_normalize(once)
        for i in es.ids():
            assert np.allclose(once.vector(i), twice.vector(i), atol=1e-15)


class TestSynthetic:
    def test_deterministic_bytes(self):
        ids = [f"q{i}" for i in range(30)]
        cls = {i: 1 + (k % 3) for k, i in enumerate(ids)}
        cfg = PlantedConfig(n_classes=3, dim=16, seed=11)
        a = write_embeddings(synthetic_embeddings(ids, cfg, cls))
        b = write_embeddings(synthetic_embeddings(ids, cfg, cls))
        assert a == b

    def test_order_independent_per_id(self):
        ids = [f"q{i}" for i in range(10)]
        cls = {i: 1 for i in ids}
        cfg = PlantedConfig(n_classes=1, dim=8, seed=2)
        forward = synthetic_embeddings(ids, cfg, cls)
        backward = synthetic_embeddings(list(reversed(ids)), cfg, cls)
        for i in ids:
            assert np.array_equal(forward.vector(i), backward.vector(i))

    def test_within_class_cosine_exceeds_between(self):
        ids = [f"a{i}" for i in range(100)] + [f"b{i}" for i in range(100)]
        cls = {i: (1 if i.startswith("a") else 2) for i in ids}
        cfg = PlantedConfig(n_classes=2, dim=32, class_separation=10.0,
                            noise_sigma=0.1, seed=5)
        es = synthetic_embeddings(ids, cfg, cls)
        a = es.matrix([i for i in ids if cls[i] == 1])
        b = es.matrix([i for i in ids if cls[i] == 2])

        def avg_cos(x, y):
            xn = x / np.linalg.norm(x, axis=1, keepdims=True)
            yn = y / np.linalg.norm(y, axis=1, keepdims=True)
            return float(np.mean(xn @ yn.T))

        within = 0.5 * (avg_cos(a, a) + avg_cos(b, b))
        between = avg_cos(a, b)
        assert within > between

    def test_overlap_pair_pulls_classes_together(self):
        ids = [f"c{c}i{i}" for c in (1, 2, 3) for i in range(60)]
        cls = {i: int(i[1]) for i in ids}
        cfg = PlantedConfig(
            n_classes=3, dim=32, class_separation=10.0, noise_sigma=0.1,
            overlap_pairs=((2, 3, 0.5),), seed=13,
        )
        es = synthetic_embeddings(ids, cfg, cls)

        def group(c):
            return es.matrix([i for i in ids if cls[i] == c])

        def avg_cos(x, y):
            xn = x / np.linalg.norm(x, axis=1, keepdims=True)
            yn = y / np.linalg.norm(y, axis=1, keepdims=True)
            return float(np.mean(xn @ yn.T))

        assert avg_cos(group(2), group(3)) > avg_cos(group(1), group(3))

    def test_overlap_moves_mean_to_requested_distance(self):
        cfg = PlantedConfig(n_classes=3, dim=16, class_separation=8.0,
                            overlap_pairs=((1, 3, 0.25),), seed=1)
        means = planted_class_means(cfg)
        assert math.isclose(float(np.linalg.norm(means[3] - means[1])), 0.25,
                            rel_tol=1e-12)

    def test_invalid_overlap_rejected(self):
        with pytest.raises(ValueError):
            PlantedConfig(n_classes=2, overlap_pairs=((1, 5, 0.5),))
        with pytest.raises(ValueError):
            PlantedConfig(n_classes=2, class_separation=1.0,
                          overlap_pairs=((1, 2, 2.0),))
