"""Shared domain types: concept vocabularies, canonical concept sets,
instances, local/global explanation structures, and their JSON formats.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence


class VocabularyError(ValueError):
    """Unknown concept id/name or malformed vocabulary."""


class DatasetError(ValueError):
    """Malformed dataset record or violated instance invariant."""


# ---------------------------------------------------------------------------
# Vocabulary and class labels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    """Dense concept id space 0..V-1 with unique human-readable names."""

    names: tuple[str, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        index = {name: i for i, name in enumerate(self.names)}
        if len(index) != len(self.names):
            raise VocabularyError("duplicate concept names in vocabulary")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise VocabularyError(f"unknown concept name: {name!r}") from None

    def name_of(self, concept_id: int) -> str:
        if not 0 <= concept_id < len(self.names):
            raise VocabularyError(f"concept id out of range: {concept_id}")
        return self.names[concept_id]

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, list) or not all(isinstance(n, str) for n in data):
            raise VocabularyError(f"{path}: vocabulary must be a JSON array of strings")
        return cls(tuple(data))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(list(self.names)) + "\n")


@dataclass(frozen=True)
class ClassLabels:
    """Dense class id space 0..C-1; string labels live only at the I/O boundary."""

    names: tuple[str, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        index = {name: i for i, name in enumerate(self.names)}
        if len(index) != len(self.names):
            raise DatasetError("duplicate class labels")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DatasetError(f"unknown class label: {name!r}") from None

    def name_of(self, class_id: int) -> str:
        if not 0 <= class_id < len(self.names):
            raise DatasetError(f"class id out of range: {class_id}")
        return self.names[class_id]


# ---------------------------------------------------------------------------
# ConceptSet
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConceptSet:
    """Canonical subset of concept ids, encoded as a bitmask.

    Python ints give a fixed number of machine words per vocabulary size, so
    subset tests, unions and hashing are O(V/word). Equality and hashing
    respect set semantics.
    """

    mask: int

    def __post_init__(self) -> None:
        if self.mask < 0:
            raise VocabularyError("negative bitmask")

    @classmethod
    def of(cls, ids: Iterable[int]) -> "ConceptSet":
        mask = 0
        for i in ids:
            if i < 0:
                raise VocabularyError(f"negative concept id: {i}")
            mask |= 1 << i
        return cls(mask)

    @classmethod
    def empty(cls) -> "ConceptSet":
        return cls(0)

    def ids(self) -> tuple[int, ...]:
        out = []
        mask = self.mask
        i = 0
        while mask:
            if mask & 1:
                out.append(i)
            mask >>= 1
            i += 1
        return tuple(out)

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __iter__(self) -> Iterator[int]:
        return iter(self.ids())

    def __contains__(self, concept_id: int) -> bool:
        return concept_id >= 0 and bool(self.mask >> concept_id & 1)

    @property
    def is_empty(self) -> bool:
        return self.mask == 0

    def issubset(self, other: "ConceptSet") -> bool:
        return self.mask & other.mask == self.mask

    def union(self, other: "ConceptSet") -> "ConceptSet":
        return ConceptSet(self.mask | other.mask)

    def difference(self, other: "ConceptSet") -> "ConceptSet":
        return ConceptSet(self.mask & ~other.mask)

    def add(self, concept_id: int) -> "ConceptSet":
        return ConceptSet(self.mask | 1 << concept_id)

    def remove(self, concept_id: int) -> "ConceptSet":
        return ConceptSet(self.mask & ~(1 << concept_id))

    def sort_key(self) -> tuple[int, ...]:
        """Ascending-lexicographic key over member ids, used for tie-breaks."""
        return self.ids()

    def names(self, vocab: Vocabulary) -> list[str]:
        return [vocab.name_of(i) for i in self.ids()]


def canonicalize(raw: Iterable[int], vocab_size: int | None = None) -> ConceptSet:
    """Sort and deduplicate raw concept ids into a canonical ConceptSet."""
    ids = list(raw)
    if vocab_size is not None:
        for i in ids:
            if not 0 <= i < vocab_size:
                raise VocabularyError(f"concept id out of range: {i}")
    return ConceptSet.of(ids)


def is_subset(a: ConceptSet, b: ConceptSet) -> bool:
    return a.issubset(b)


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------


def argmax_class(scores: Sequence[float]) -> int:
    """Index of the maximal score; ties broken by lowest class id."""
    best = 0
    for c in range(1, len(scores)):
        if scores[c] > scores[best]:
            best = c
    return best


@dataclass(frozen=True)
class Instance:
    """An annotated example: its concept set, predicted class, and
    optional per-class reference scores."""

    id: str
    objects: ConceptSet
    predicted_class: int
    true_class: int | None = None
    reference_scores: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.objects.is_empty:
            raise DatasetError(f"instance {self.id!r}: empty object set")
        if self.reference_scores is not None:
            if argmax_class(self.reference_scores) != self.predicted_class:
                raise DatasetError(
                    f"instance {self.id!r}: predicted_class is not the argmax "
                    "of reference_scores"
                )


# ---------------------------------------------------------------------------
# Local explanations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mscx:
    """A minimally sufficient concept set for one (instance, class)."""

    concepts: ConceptSet
    instance_id: str
    class_id: int
    score_ratio: float


@dataclass(frozen=True)
class CompleteExplanation:
    """All recorded minimally sufficient sets for one (instance, class).

    Empty ``mscxs`` means the search ran and found nothing sufficient;
    hard failures raise instead.
    """

    instance_id: str
    class_id: int
    mscxs: tuple[Mscx, ...]

    def __post_init__(self) -> None:
        masks = [m.concepts for m in self.mscxs]
        if len({m.mask for m in masks}) != len(masks):
            raise DatasetError(f"duplicate sets in explanation of {self.instance_id!r}")
        for a in masks:
            for b in masks:
                if a != b and a.issubset(b):
                    raise DatasetError(
                        f"explanation of {self.instance_id!r} is not an antichain"
                    )

    @property
    def is_empty(self) -> bool:
        return not self.mscxs

    def concept_sets(self) -> tuple[ConceptSet, ...]:
        return tuple(m.concepts for m in self.mscxs)


# ---------------------------------------------------------------------------
# Global explanations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MdnfClause:
    concepts: ConceptSet
    covered_total: int
    covered_marginal: int
    d_total_pct: float
    d_marginal_pct: float

    def __post_init__(self) -> None:
        if self.covered_marginal > self.covered_total:
            raise DatasetError("clause marginal coverage exceeds total coverage")


@dataclass(frozen=True)
class CoveringExplanation:
    """Per-class monotone DNF; clause order is greedy selection order but the
    semantics is an unordered disjunction."""

    class_id: int
    clauses: tuple[MdnfClause, ...]
    support_size: int


@dataclass(frozen=True)
class ExplanationRule:
    antecedent: ConceptSet
    class_id: int
    covered_marginal: int
    d_pct: float


@dataclass(frozen=True)
class ExplanationList:
    """Ordered rules plus a default; the first matching antecedent decides."""

    rules: tuple[ExplanationRule, ...]
    default_class: int
    default_d_pct: float = 0.0

    def __post_init__(self) -> None:
        masks = [r.antecedent.mask for r in self.rules]
        if len(set(masks)) != len(masks):
            raise DatasetError("antecedent appears twice in explanation list")
        if any(r.antecedent.is_empty for r in self.rules):
            raise DatasetError("only the default rule may have an empty antecedent")


# ---------------------------------------------------------------------------
# JSON formats
# ---------------------------------------------------------------------------


def instance_to_json(inst: Instance, vocab: Vocabulary, labels: ClassLabels) -> dict:
    scores = None
    if inst.reference_scores is not None:
        scores = {labels.name_of(c): s for c, s in enumerate(inst.reference_scores)}
    return {
        "id": inst.id,
        "objects": inst.objects.names(vocab),
        "predicted_class": labels.name_of(inst.predicted_class),
        "true_class": None if inst.true_class is None else labels.name_of(inst.true_class),
        "scores": scores,
    }


def instance_from_json(obj: dict, vocab: Vocabulary, labels: ClassLabels) -> Instance:
    try:
        objects = canonicalize([vocab.id_of(n) for n in obj["objects"]], len(vocab))
        predicted = labels.id_of(obj["predicted_class"])
        true_raw = obj.get("true_class")
        true_class = None if true_raw is None else labels.id_of(true_raw)
        scores_raw = obj.get("scores")
        scores = None
        if scores_raw is not None:
            dense = [0.0] * len(labels)
            for name, s in scores_raw.items():
                dense[labels.id_of(name)] = float(s)
            scores = tuple(dense)
        return Instance(obj["id"], objects, predicted, true_class, scores)
    except KeyError as exc:
        raise DatasetError(f"dataset record missing field {exc}") from None


def load_dataset(
    path: str | Path, vocab: Vocabulary, labels: ClassLabels | None = None
) -> tuple[list[Instance], ClassLabels]:
    """Read a JSON-lines dataset. When ``labels`` is None the dense class id
    space is the sorted set of labels appearing anywhere in the file."""
    raw = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                raw.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from None
    if labels is None:
        seen: set[str] = set()
        for obj in raw:
            seen.add(obj["predicted_class"])
            if obj.get("true_class") is not None:
                seen.add(obj["true_class"])
            if obj.get("scores"):
                seen.update(obj["scores"])
        labels = ClassLabels(tuple(sorted(seen)))
    instances = [instance_from_json(obj, vocab, labels) for obj in raw]
    ids = [i.id for i in instances]
    if len(set(ids)) != len(ids):
        raise DatasetError(f"{path}: duplicate instance ids")
    return instances, labels


def save_dataset(
    instances: Sequence[Instance],
    path: str | Path,
    vocab: Vocabulary,
    labels: ClassLabels,
) -> None:
    with open(path, "w") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_json(inst, vocab, labels)) + "\n")


def explanation_to_json(
    exp: CompleteExplanation, vocab: Vocabulary, labels: ClassLabels
) -> dict:
    return {
        "id": exp.instance_id,
        "class": labels.name_of(exp.class_id),
        "mscxs": [
            {"concepts": m.concepts.names(vocab), "score_ratio": m.score_ratio}
            for m in exp.mscxs
        ],
    }


def explanation_from_json(
    obj: dict, vocab: Vocabulary, labels: ClassLabels
) -> CompleteExplanation:
    class_id = labels.id_of(obj["class"])
    mscxs = tuple(
        Mscx(
            canonicalize([vocab.id_of(n) for n in m["concepts"]], len(vocab)),
            obj["id"],
            class_id,
            float(m["score_ratio"]),
        )
        for m in obj["mscxs"]
    )
    return CompleteExplanation(obj["id"], class_id, mscxs)


def load_explanations(
    path: str | Path, vocab: Vocabulary, labels: ClassLabels
) -> list[CompleteExplanation]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(explanation_from_json(json.loads(line), vocab, labels))
    return out


def save_explanations(
    explanations: Sequence[CompleteExplanation],
    path: str | Path,
    vocab: Vocabulary,
    labels: ClassLabels,
) -> None:
    with open(path, "w") as fh:
        for exp in explanations:
            fh.write(json.dumps(explanation_to_json(exp, vocab, labels)) + "\n")


def covering_to_json(
    cov: CoveringExplanation, vocab: Vocabulary, labels: ClassLabels
) -> dict:
    return {
        "class": labels.name_of(cov.class_id),
        "support_size": cov.support_size,
        "clauses": [
            {
                "concepts": c.concepts.names(vocab),
                "covered_total": c.covered_total,
                "covered_marginal": c.covered_marginal,
                "d_total_pct": c.d_total_pct,
                "d_marginal_pct": c.d_marginal_pct,
            }
            for c in cov.clauses
        ],
    }


def covering_from_json(
    obj: dict, vocab: Vocabulary, labels: ClassLabels
) -> CoveringExplanation:
    clauses = tuple(
        MdnfClause(
            canonicalize([vocab.id_of(n) for n in c["concepts"]], len(vocab)),
            int(c["covered_total"]),
            int(c["covered_marginal"]),
            float(c["d_total_pct"]),
            float(c["d_marginal_pct"]),
        )
        for c in obj["clauses"]
    )
    return CoveringExplanation(labels.id_of(obj["class"]), clauses, int(obj["support_size"]))


def explanation_list_to_json(
    elist: ExplanationList, vocab: Vocabulary, labels: ClassLabels
) -> dict:
    rules = [
        {
            "if": r.antecedent.names(vocab),
            "then": labels.name_of(r.class_id),
            "covered": r.covered_marginal,
            "d_pct": r.d_pct,
        }
        for r in elist.rules
    ]
    rules.append(
        {"if": [], "then": labels.name_of(elist.default_class), "d_pct": elist.default_d_pct}
    )
    return {"rules": rules, "default": labels.name_of(elist.default_class)}


def explanation_list_from_json(
    obj: dict, vocab: Vocabulary, labels: ClassLabels
) -> ExplanationList:
    rules = []
    default_d = 0.0
    for r in obj["rules"]:
        ante = canonicalize([vocab.id_of(n) for n in r["if"]], len(vocab))
        if ante.is_empty:
            default_d = float(r["d_pct"])
            continue
        rules.append(
            ExplanationRule(
                ante, labels.id_of(r["then"]), int(r.get("covered", 0)), float(r["d_pct"])
            )
        )
    return ExplanationList(tuple(rules), labels.id_of(obj["default"]), default_d)
