"""Reproducible synthetic datasets and additive models with known
ground-truth explanations, for end-to-end testing without real images."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .core import (
    ClassLabels,
    ConceptSet,
    ExplanationList,
    ExplanationRule,
    Instance,
    Vocabulary,
)
from .oracle import SyntheticModel, synthetic_predict


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GenerateConfig:
    num_classes: int = 5
    vocab_size: int = 40
    instances_per_class: int = 50
    k_min: int = 3
    k_max: int = 8
    weight_sparsity: float = 0.6  # fraction of zero-weight concepts per class
    monotone: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_classes < 1:
            raise GenerationError("need at least one class")
        if self.k_max > self.vocab_size:
            raise GenerationError(
                f"k_max {self.k_max} exceeds vocabulary size {self.vocab_size}"
            )
        if not 1 <= self.k_min <= self.k_max:
            raise GenerationError("need 1 <= k_min <= k_max")
        if not 0 <= self.weight_sparsity < 1:
            raise GenerationError("weight_sparsity must be in [0, 1)")


def _default_names(prefix: str, n: int) -> tuple[str, ...]:
    width = max(2, len(str(n - 1)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


def _draw_weights(cfg: GenerateConfig, rng: random.Random) -> list[list[float]]:
    rows: list[list[float]] = []
    for _ in range(cfg.num_classes):
        row = [0.0] * cfg.vocab_size
        for i in range(cfg.vocab_size):
            if rng.random() >= cfg.weight_sparsity:
                # truncated exponential keeps a few dominant concepts per class
                w = min(rng.expovariate(1.0), 4.0)
                if not cfg.monotone and rng.random() < 0.25:
                    w = -w
                row[i] = round(w, 6)
        if all(w <= 0 for w in row):
            row[rng.randrange(cfg.vocab_size)] = 1.0
        rows.append(row)
    return rows


def _sample_objects(
    weights: list[float], k: int, rng: random.Random
) -> ConceptSet:
    # weighted sampling without replacement, biased toward high-weight concepts
    vocab_size = len(weights)
    pool = list(range(vocab_size))
    probs = [max(w, 0.0) + 0.05 for w in weights]
    chosen: set[int] = set()
    while len(chosen) < k:
        total = sum(probs[i] for i in pool)
        r = rng.random() * total
        acc = 0.0
        pick = pool[-1]
        for i in pool:
            acc += probs[i]
            if r <= acc:
                pick = i
                break
        chosen.add(pick)
        pool.remove(pick)
    return ConceptSet.of(chosen)


def generate(
    cfg: GenerateConfig,
) -> tuple[Vocabulary, ClassLabels, list[Instance], SyntheticModel]:
    """Deterministic for a fixed config: per-class sparse non-negative
    weights, instances biased toward their generating class's dominant
    concepts, predicted class recomputed from the model."""
    rng = random.Random(cfg.seed)
    vocab = Vocabulary(_default_names("obj", cfg.vocab_size))
    labels = ClassLabels(_default_names("class", cfg.num_classes))
    model = SyntheticModel(
        tuple(tuple(row) for row in _draw_weights(cfg, rng)),
        monotone=cfg.monotone,
        seed=cfg.seed,
    )
    instances: list[Instance] = []
    serial = 0
    for c in range(cfg.num_classes):
        for _ in range(cfg.instances_per_class):
            k = rng.randint(cfg.k_min, cfg.k_max)
            objects = _sample_objects(list(model.weights[c]), k, rng)
            scores = tuple(
                model.class_score(y, objects) for y in range(cfg.num_classes)
            )
            predicted = synthetic_predict(model, objects)
            instances.append(
                Instance(f"inst{serial:05d}", objects, predicted, c, scores)
            )
            serial += 1
    return vocab, labels, instances, model


@dataclass(frozen=True)
class PlantedConfig:
    num_classes: int = 3
    instances_per_class: int = 4
    max_fillers: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_classes < 1:
            raise GenerationError("need at least one class")
        if self.instances_per_class < 1:
            raise GenerationError("need at least one instance per class")
        if self.max_fillers < 0:
            raise GenerationError("max_fillers must be >= 0")


def planted_list_dataset(
    cfg: PlantedConfig,
) -> tuple[Vocabulary, ClassLabels, list[Instance], SyntheticModel, ExplanationList]:
    """Dataset where each class c has a marker concept of weight 1 (all other
    weights 0) and each instance carries exactly its class marker plus
    zero-weight fillers. Every instance's complete explanation is exactly
    {marker}, so the planted list (marker -> class, per class) is perfect."""
    rng = random.Random(cfg.seed)
    c = cfg.num_classes
    n_fillers = cfg.max_fillers + 1
    vocab = Vocabulary(
        tuple(f"marker{i:02d}" for i in range(c))
        + tuple(f"filler{i:02d}" for i in range(n_fillers))
    )
    labels = ClassLabels(_default_names("class", c))
    weights = []
    for y in range(c):
        row = [0.0] * len(vocab)
        row[y] = 1.0
        weights.append(tuple(row))
    model = SyntheticModel(tuple(weights), monotone=True, seed=cfg.seed)

    instances: list[Instance] = []
    serial = 0
    for y in range(c):
        for _ in range(cfg.instances_per_class):
            fillers = rng.sample(range(c, c + n_fillers), rng.randint(0, cfg.max_fillers))
            objects = ConceptSet.of([y, *fillers])
            scores = tuple(model.class_score(cls, objects) for cls in range(c))
            predicted = synthetic_predict(model, objects)
            instances.append(
                Instance(f"planted{serial:05d}", objects, predicted, y, scores)
            )
            serial += 1

    n_total = len(instances)
    share = 100.0 * cfg.instances_per_class / n_total
    rules = tuple(
        ExplanationRule(ConceptSet.of([y]), y, cfg.instances_per_class, share)
        for y in range(1, c)
    )
    # the first class is left to the default rule
    planted = ExplanationList(rules, default_class=0, default_d_pct=share)
    return vocab, labels, instances, model, planted
