"""Global explanation compilation: greedy set cover into per-class monotone
DNF, multi-class explanation lists, their exact small-instance oracles, and
the evaluators for both matching semantics.

Evaluators take an explicit ``mode``: ``"presence"`` matches an antecedent
when its concepts are present in the instance, ``"mscx"`` when the antecedent
is one of the instance's recorded minimally sufficient sets. Construction
uses mscx semantics; the DNF's logical reading is presence semantics.
"""

from __future__ import annotations

from itertools import combinations, permutations
from typing import Iterable, Mapping, Sequence

from .core import (
    CompleteExplanation,
    ConceptSet,
    CoveringExplanation,
    ExplanationList,
    ExplanationRule,
    Instance,
    MdnfClause,
)

MODES = ("presence", "mscx")

# R: mask -> ids of support instances whose P_min contains that set
CoverageMap = dict[ConceptSet, frozenset[str]]
# M: mask -> (instance id, predicted class) pairs
MaskIndex = dict[ConceptSet, tuple[tuple[str, int], ...]]

PminById = Mapping[str, CompleteExplanation]


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def build_coverage_map(explanations: Sequence[CompleteExplanation]) -> CoverageMap:
    """Invert per-instance explanations of one class into mask -> instances."""
    classes = {e.class_id for e in explanations}
    if len(classes) > 1:
        raise ValueError(f"explanations span multiple classes: {sorted(classes)}")
    out: dict[ConceptSet, set[str]] = {}
    for exp in explanations:
        for s in exp.concept_sets():
            out.setdefault(s, set()).add(exp.instance_id)
    return {s: frozenset(ids) for s, ids in out.items()}


def greedy_cover(
    support: Iterable[str], coverage: CoverageMap, class_id: int
) -> CoveringExplanation:
    """Pick, each round, the mask covering the most still-uncovered support
    instances; ties go to the larger total coverage, then the
    lexicographically smallest antecedent."""
    support_ids = set(support)
    support_size = len(support_ids)
    restricted = {s: ids & support_ids for s, ids in coverage.items()}
    uncovered = set(support_ids)
    clauses: list[MdnfClause] = []
    while uncovered:
        best: ConceptSet | None = None
        best_key: tuple[int, int, tuple[int, ...]] | None = None
        for s, ids in restricted.items():
            gain = len(ids & uncovered)
            key = (-gain, -len(ids), s.sort_key())
            if best_key is None or key < best_key:
                best, best_key = s, key
        if best is None or -best_key[0] == 0:
            break  # no mask covers a new instance
        covered = restricted[best]
        marginal = len(covered & uncovered)
        clauses.append(
            MdnfClause(
                best,
                covered_total=len(covered),
                covered_marginal=marginal,
                d_total_pct=100.0 * len(covered) / support_size,
                d_marginal_pct=100.0 * marginal / support_size,
            )
        )
        uncovered -= covered
        del restricted[best]
    return CoveringExplanation(class_id, tuple(clauses), support_size)


def exact_min_cover(
    support: Iterable[str], coverage: CoverageMap, max_masks: int = 20
) -> list[ConceptSet]:
    """Minimum-cardinality subfamily covering all coverable support instances,
    by exhaustive enumeration in increasing size."""
    support_ids = set(support)
    masks = sorted(coverage, key=lambda s: s.sort_key())
    if len(masks) > max_masks:
        raise ValueError(f"{len(masks)} masks exceeds exact limit {max_masks}")
    coverable = set().union(*(coverage[m] & support_ids for m in masks)) if masks else set()
    for size in range(0, len(masks) + 1):
        for combo in combinations(masks, size):
            covered: set[str] = set()
            for m in combo:
                covered |= coverage[m] & support_ids
            if covered >= coverable:
                return list(combo)
    return list(masks)


def _matches(
    antecedent: ConceptSet,
    instance: Instance,
    mode: str,
    pmin: CompleteExplanation | None,
) -> bool:
    if mode == "presence":
        return antecedent.issubset(instance.objects)
    if pmin is None:
        return False
    return any(antecedent == s for s in pmin.concept_sets())


def eval_dnf_coverage(
    phi: CoveringExplanation,
    instances: Sequence[Instance],
    mode: str,
    pmin_by_id: PminById | None = None,
) -> tuple[float, list[float]]:
    """Coverage fraction plus the cumulative coverage after each clause
    prefix (one entry per clause)."""
    _check_mode(mode)
    if not instances:
        return 0.0, [0.0 for _ in phi.clauses]
    covered: set[str] = set()
    curve: list[float] = []
    remaining = list(instances)
    for clause in phi.clauses:
        for inst in remaining:
            if inst.id in covered:
                continue
            pmin = pmin_by_id.get(inst.id) if pmin_by_id else None
            if _matches(clause.concepts, inst, mode, pmin):
                covered.add(inst.id)
        curve.append(len(covered) / len(instances))
    fraction = curve[-1] if curve else 0.0
    return fraction, curve


def format_formula(
    cov: CoveringExplanation,
    vocab,
    min_pct: float = 0.0,
    display: str = "marginal",
) -> str:
    """Pretty DNF line with percentage subscripts, e.g.
    ``(bed)_26% ∨ (wall ∧ bed)_25%``. ``display`` picks marginal or total
    percentages; clauses under ``min_pct`` are hidden."""
    if display not in ("marginal", "total"):
        raise ValueError(f"display must be 'marginal' or 'total', got {display!r}")
    parts = []
    for clause in cov.clauses:
        pct = clause.d_marginal_pct if display == "marginal" else clause.d_total_pct
        if pct < min_pct:
            continue
        names = " ∧ ".join(clause.concepts.names(vocab))
        parts.append(f"({names})_{pct:.0f}%")
    return " ∨ ".join(parts)


def build_mask_index(
    instances: Sequence[Instance], pmin_by_id: PminById
) -> MaskIndex:
    """Index every distinct minimal mask to the (instance, predicted class)
    pairs whose explanation contains it."""
    out: dict[ConceptSet, list[tuple[str, int]]] = {}
    for inst in instances:
        pmin = pmin_by_id.get(inst.id)
        if pmin is None:
            continue
        for s in pmin.concept_sets():
            out.setdefault(s, []).append((inst.id, inst.predicted_class))
    return {s: tuple(pairs) for s, pairs in out.items()}


def _modal_class(instances: Sequence[Instance]) -> int:
    counts: dict[int, int] = {}
    for inst in instances:
        counts[inst.predicted_class] = counts.get(inst.predicted_class, 0) + 1
    # ties break to the lowest class id
    return min(counts, key=lambda c: (-counts[c], c))


def explanation_list(
    instances: Sequence[Instance], mask_index: MaskIndex
) -> ExplanationList:
    """Greedy rule extraction: each round pick the mask minimizing newly
    induced errors, then maximizing new coverage; consequent is the majority
    predicted class among the newly covered instances."""
    if not instances:
        raise ValueError("explanation_list needs at least one instance")
    n_total = len(instances)
    uncovered = {inst.id for inst in instances}
    available = dict(mask_index)
    rules: list[ExplanationRule] = []
    while uncovered and available:
        best_mask: ConceptSet | None = None
        best_key: tuple[int, int, tuple[int, ...]] | None = None
        best_class = 0
        best_gain = 0
        for s in available:
            per_class: dict[int, int] = {}
            for inst_id, cls in available[s]:
                if inst_id in uncovered:
                    per_class[cls] = per_class.get(cls, 0) + 1
            gain = sum(per_class.values())
            if gain == 0:
                continue
            majority = min(per_class, key=lambda c: (-per_class[c], c))
            err = gain - per_class[majority]
            key = (err, -gain, s.sort_key())
            if best_key is None or key < best_key:
                best_mask, best_key = s, key
                best_class, best_gain = majority, gain
        if best_mask is None:
            break
        rules.append(
            ExplanationRule(
                best_mask, best_class, best_gain, 100.0 * best_gain / n_total
            )
        )
        covered_now = {inst_id for inst_id, _ in available[best_mask]}
        uncovered -= covered_now
        del available[best_mask]
    default = _modal_class(instances)
    default_d = 100.0 * len(uncovered) / n_total
    return ExplanationList(tuple(rules), default, default_d)


def classify_with_list(
    elist: ExplanationList,
    instance: Instance,
    mode: str,
    pmin: CompleteExplanation | None = None,
) -> int:
    """First matching rule decides; the default rule always fires."""
    _check_mode(mode)
    for rule in elist.rules:
        if _matches(rule.antecedent, instance, mode, pmin):
            return rule.class_id
    return elist.default_class


def list_accuracy(
    elist: ExplanationList,
    instances: Sequence[Instance],
    mode: str,
    pmin_by_id: PminById | None = None,
) -> float:
    """Fraction of instances whose list classification matches the
    model's predicted class."""
    _check_mode(mode)
    if not instances:
        raise ValueError("list_accuracy needs at least one instance")
    hits = 0
    for inst in instances:
        pmin = pmin_by_id.get(inst.id) if pmin_by_id else None
        if classify_with_list(elist, inst, mode, pmin) == inst.predicted_class:
            hits += 1
    return hits / len(instances)


def perfect_list_exists(
    instances: Sequence[Instance], pmin_by_id: PminById, max_instances: int = 8
) -> bool:
    """Brute-force check that some ordering of the available masks (with the
    best class per rule) classifies every instance as its predicted class in
    mscx mode. Intended for tiny datasets only."""
    if len(instances) > max_instances:
        raise ValueError(f"too many instances for brute force: {len(instances)}")
    index = build_mask_index(instances, pmin_by_id)
    masks = sorted(index, key=lambda s: s.sort_key())
    by_id = {inst.id: inst for inst in instances}

    def list_is_perfect(order: Sequence[ConceptSet], assignment: dict[ConceptSet, int],
                        default: int) -> bool:
        for inst in instances:
            pmin = pmin_by_id.get(inst.id)
            predicted = default
            for s in order:
                if pmin is not None and any(s == t for t in pmin.concept_sets()):
                    predicted = assignment[s]
                    break
            if predicted != inst.predicted_class:
                return False
        return True

    defaults = sorted({inst.predicted_class for inst in instances})
    for size in range(0, len(masks) + 1):
        for order in permutations(masks, size):
            # the first rule matching an instance decides, so each rule's class
            # must equal the predicted class of everything it newly covers
            assignment: dict[ConceptSet, int] = {}
            consistent = True
            claimed: set[str] = set()
            for s in order:
                classes = {
                    by_id[i].predicted_class
                    for i, _ in index[s]
                    if i not in claimed
                }
                if len(classes) > 1:
                    consistent = False
                    break
                if classes:
                    assignment[s] = classes.pop()
                    claimed |= {i for i, _ in index[s]}
                else:
                    assignment[s] = 0
            if not consistent:
                continue
            for default in defaults:
                if list_is_perfect(order, assignment, default):
                    return True
    return False
