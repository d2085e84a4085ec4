import pytest

from conceptdnf import (
    ClassLabels,
    ConceptSet,
    Instance,
    SyntheticModel,
    SyntheticOracle,
    Vocabulary,
    cached,
)

# Running example: one bedroom image decomposed into bed/wall/lamp, with an
# additive single-class model whose only pairs reaching 95% are
# {bed,wall} and {bed,lamp}.

BED, WALL, LAMP = 0, 1, 2


@pytest.fixture
def bedroom_vocab():
    return Vocabulary(("bed", "wall", "lamp"))


@pytest.fixture
def bedroom_labels():
    return ClassLabels(("Bedroom",))


@pytest.fixture
def bedroom_model():
    return SyntheticModel(((0.9, 0.05, 0.05),), monotone=True, seed=0)


@pytest.fixture
def bedroom_oracle(bedroom_model):
    return cached(SyntheticOracle(bedroom_model))


@pytest.fixture
def bedroom_instance():
    return Instance("img1", ConceptSet.of([BED, WALL, LAMP]), 0, None, (1.0,))
