import numpy as np
import pytest

from usimkit.corpus import Instance, SubstituteSet
from usimkit.representations import EmbeddingTable


@pytest.fixture
def tiny_table() -> EmbeddingTable:
    """A handful of 3-d vectors with known geometry."""
    entries = {
        "cat": np.array([1.0, 0.0, 0.0]),
        "dog": np.array([0.9, 0.1, 0.0]),
        "feline": np.array([0.95, 0.05, 0.0]),
        "car": np.array([0.0, 1.0, 0.0]),
        "bus": np.array([0.0, 0.9, 0.1]),
        "truck": np.array([0.1, 0.9, 0.0]),
        "red": np.array([0.0, 0.0, 1.0]),
        "the": np.array([0.3, 0.3, 0.3]),
        "sat": np.array([0.5, 0.0, 0.5]),
    }
    return EmbeddingTable(dimension=3, entries=entries)


@pytest.fixture
def cat_instance() -> Instance:
    return Instance(instance_id="cat.1", lemma="cat", pos="n",
                    tokens=("the", "cat", "sat"), target_index=1)


def make_instance(instance_id, lemma, tokens, target_index, pos="n") -> Instance:
    return Instance(instance_id=instance_id, lemma=lemma, pos=pos,
                    tokens=tuple(tokens), target_index=target_index)


def make_set(instance_id, weighted) -> SubstituteSet:
    return SubstituteSet(instance_id=instance_id, entries=tuple(weighted))
