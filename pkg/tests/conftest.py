import numpy as np
import pytest

from biascorpus.embedding import EmbeddingModel, TrainConfig, Vocabulary


def model_from_vectors(mapping, counts=None):
    """Build a query-only model from an explicit word -> vector mapping."""
    words = list(mapping)
    dim = len(next(iter(mapping.values())))
    if counts is None:
        counts = np.full(len(words), 10, dtype=np.int64)
    else:
        counts = np.asarray([counts[w] for w in words], dtype=np.int64)
    vocab = Vocabulary(words, counts, min_count=1)
    vectors = np.array([mapping[w] for w in words], dtype=np.float64)
    cfg = TrainConfig(dim=dim, min_count=1)
    return EmbeddingModel(vocab=vocab, dim=dim, input_vectors=vectors,
                          output_vectors=np.zeros_like(vectors),
                          train_config=cfg, seed=0)


@pytest.fixture
def toy_model():
    return model_from_vectors({
        "he": [1.0, 0.1], "she": [0.1, 1.0],
        "smart": [0.9, 0.2], "kind": [0.2, 0.9], "tree": [0.5, 0.5]})
