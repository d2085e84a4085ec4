"""Fidelity metrics over local explanations, their aggregation, and the
size histogram of minimal sufficient sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import CompleteExplanation, ConceptSet, Instance
from .oracle import Oracle, ScoreQuery
from .search import NonPositiveReferenceError


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class FidelityReport:
    fid_plus_mean: float
    fid_plus_std: float
    fid_minus_mean: float
    fid_minus_std: float
    n_instances: int
    n_skipped: int = 0


def _reference(oracle: Oracle, instance: Instance, class_id: int) -> float:
    ref = oracle.score(ScoreQuery(instance.id, class_id, instance.objects))
    if ref <= 0:
        raise NonPositiveReferenceError(
            f"instance {instance.id!r}: reference score {ref} <= 0"
        )
    return ref


def fidelity_plus(
    oracle: Oracle, instance: Instance, class_id: int, pmin: CompleteExplanation
) -> float:
    """Score ratio after removing every concept appearing in any minimal
    sufficient set. Lower is better; the remainder may be the empty set."""
    if pmin.is_empty:
        raise MetricsError(f"instance {instance.id!r}: empty explanation")
    ref = _reference(oracle, instance, class_id)
    union = ConceptSet.empty()
    for s in pmin.concept_sets():
        union = union.union(s)
    remainder = instance.objects.difference(union)
    return oracle.score(ScoreQuery(instance.id, class_id, remainder)) / ref


def fidelity_minus(
    oracle: Oracle, instance: Instance, class_id: int, pmin: CompleteExplanation
) -> float:
    """Mean, over all minimal sufficient sets, of the retained-set score
    ratio. Each term is >= tau_p under the extraction oracle; the mean may
    exceed 1 for non-monotone models."""
    terms = fidelity_minus_terms(oracle, instance, class_id, pmin)
    return sum(terms) / len(terms)


def fidelity_minus_terms(
    oracle: Oracle, instance: Instance, class_id: int, pmin: CompleteExplanation
) -> list[float]:
    if pmin.is_empty:
        raise MetricsError(f"instance {instance.id!r}: empty explanation")
    ref = _reference(oracle, instance, class_id)
    return [
        oracle.score(ScoreQuery(instance.id, class_id, s)) / ref
        for s in pmin.concept_sets()
    ]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    # population standard deviation, by convention
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


def aggregate_fidelity(
    oracle: Oracle,
    instances: Sequence[Instance],
    pmin_by_id: Mapping[str, CompleteExplanation],
) -> FidelityReport:
    """Mean and population std of both fidelities over instances with a
    non-empty explanation; empty-explanation instances are counted as
    skipped."""
    plus: list[float] = []
    minus: list[float] = []
    skipped = 0
    for inst in instances:
        pmin = pmin_by_id.get(inst.id)
        if pmin is None or pmin.is_empty:
            skipped += 1
            continue
        plus.append(fidelity_plus(oracle, inst, pmin.class_id, pmin))
        minus.append(fidelity_minus(oracle, inst, pmin.class_id, pmin))
    if not plus:
        raise MetricsError("no instances with non-empty explanations")
    p_mean, p_std = _mean_std(plus)
    m_mean, m_std = _mean_std(minus)
    return FidelityReport(p_mean, p_std, m_mean, m_std, len(plus), skipped)


def mscx_size_histogram(
    explanations: Sequence[CompleteExplanation],
) -> dict[int, int]:
    """Count of minimal sufficient sets by number of concepts."""
    hist: dict[int, int] = {}
    for exp in explanations:
        for s in exp.concept_sets():
            hist[len(s)] = hist.get(len(s), 0) + 1
    return dict(sorted(hist.items()))
