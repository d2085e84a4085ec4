"""Local explanation search: the sufficiency predicate, beam search over
growing concept subsets, greedy backward minimization, and an exact
power-set enumerator used as ground truth at small sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import CompleteExplanation, ConceptSet, Instance, Mscx
from .oracle import Oracle, ScoreQuery


class SearchError(ValueError):
    """Violated precondition of the sufficiency test or search."""


class EmptySubsetError(SearchError):
    """The sufficiency test excludes the empty set."""


class NonPositiveReferenceError(SearchError):
    """Ratio semantics require a positive reference score."""


class TooManyObjectsError(SearchError):
    """Instance exceeds the exact enumerator's size limit."""


@dataclass(frozen=True)
class SearchConfig:
    tau_p: float = 0.95
    beam_width: int = 3
    max_successors: int | None = 5  # None = unlimited
    max_depth: int | None = None
    exact_k_limit: int = 15

    def __post_init__(self) -> None:
        if not 0 < self.tau_p <= 1:
            raise SearchError(f"tau_p must be in (0, 1], got {self.tau_p}")
        if self.beam_width < 1:
            raise SearchError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.max_successors is not None and self.max_successors < 1:
            raise SearchError("max_successors must be >= 1 or None")


def reference_score(oracle: Oracle, instance: Instance, class_id: int) -> float:
    """Score of the full object set; the denominator of every ratio."""
    ref = oracle.score(ScoreQuery(instance.id, class_id, instance.objects))
    if ref <= 0:
        raise NonPositiveReferenceError(
            f"instance {instance.id!r}, class {class_id}: reference score {ref} <= 0"
        )
    return ref


def is_sufficient(
    oracle: Oracle,
    instance: Instance,
    class_id: int,
    subset: ConceptSet,
    tau_p: float,
    ref: float | None = None,
) -> bool:
    """True iff retaining only ``subset`` keeps at least ``tau_p`` of the
    full-set score."""
    if subset.is_empty:
        raise EmptySubsetError("sufficiency is undefined for the empty set")
    if not subset.issubset(instance.objects):
        raise SearchError(
            f"subset {subset.ids()} not contained in objects of {instance.id!r}"
        )
    if ref is None:
        ref = reference_score(oracle, instance, class_id)
    elif ref <= 0:
        raise NonPositiveReferenceError(f"reference score {ref} <= 0")
    return oracle.score(ScoreQuery(instance.id, class_id, subset)) >= tau_p * ref


def minimize_set(
    oracle: Oracle,
    instance: Instance,
    class_id: int,
    subset: ConceptSet,
    tau_p: float,
    ref: float | None = None,
) -> ConceptSet:
    """Greedy backward elimination: drop concepts (tried in ascending id
    order) while the remainder stays sufficient. Returns a 1-minimal set."""
    if ref is None:
        ref = reference_score(oracle, instance, class_id)
    if not is_sufficient(oracle, instance, class_id, subset, tau_p, ref):
        raise SearchError(f"minimize_set called on an insufficient set {subset.ids()}")
    current = subset
    changed = True
    while changed:
        changed = False
        for o in current.ids():
            trial = current.remove(o)
            if trial.is_empty:
                continue
            if is_sufficient(oracle, instance, class_id, trial, tau_p, ref):
                current = trial
                changed = True
    return current


def _antichain_minima(masks: list[int]) -> list[int]:
    """Keep only masks with no proper subset also present."""
    return [
        m
        for m in masks
        if not any(o != m and o & m == o for o in masks)
    ]


def _build_explanation(
    oracle: Oracle,
    instance: Instance,
    class_id: int,
    minimal_masks: list[int],
    ref: float,
) -> CompleteExplanation:
    sets = sorted((ConceptSet(m) for m in set(minimal_masks)),
                  key=lambda s: (len(s), s.sort_key()))
    mscxs = tuple(
        Mscx(
            s,
            instance.id,
            class_id,
            oracle.score(ScoreQuery(instance.id, class_id, s)) / ref,
        )
        for s in sets
    )
    return CompleteExplanation(instance.id, class_id, mscxs)


@dataclass(frozen=True)
class BeamStats:
    """Instrumentation for complexity checks: how many sufficient sets the
    search collected and how deep the frontier went."""

    collected_sufficient: int
    max_depth: int
    distinct_queries: int


def beam_add(
    oracle: Oracle,
    instance: Instance,
    class_id: int,
    config: SearchConfig = SearchConfig(),
) -> CompleteExplanation:
    return beam_add_with_stats(oracle, instance, class_id, config)[0]


def beam_add_with_stats(
    oracle: Oracle,
    instance: Instance,
    class_id: int,
    config: SearchConfig = SearchConfig(),
) -> tuple[CompleteExplanation, BeamStats]:
    """Beam search from the empty set, adding one concept per depth.

    Sufficient sets found at any depth are collected and never re-enter the
    frontier; the frontier keeps the ``beam_width`` best insufficient
    candidates. Collected sets are pruned to an antichain and backward-
    minimized, so every returned set is sufficient and 1-minimal.
    An empty result means the search exhausted its frontier without finding
    any sufficient set (as opposed to raising on a hard error).
    """
    memo: dict[int, float] = {}

    class _MemoOracle(Oracle):
        def score(self, q: ScoreQuery) -> float:
            if q.subset.mask not in memo:
                memo[q.subset.mask] = oracle.score(q)
            return memo[q.subset.mask]

    run_oracle = _MemoOracle()
    ref = reference_score(run_oracle, instance, class_id)
    tau = config.tau_p
    objs = instance.objects.ids()

    def score_of(s: ConceptSet) -> float:
        return run_oracle.score(ScoreQuery(instance.id, class_id, s))

    sufficient: set[int] = set()
    frontier: list[ConceptSet] = [ConceptSet.empty()]
    depth = 0
    max_depth_reached = 0
    while frontier:
        depth += 1
        if config.max_depth is not None and depth > config.max_depth:
            break
        max_depth_reached = depth
        candidates: dict[int, ConceptSet] = {}
        for base in frontier:
            extensions: list[ConceptSet] = []
            for o in objs:
                if o in base:
                    continue
                trial = base.add(o)
                if trial.mask in sufficient:
                    continue
                if score_of(trial) >= tau * ref:
                    sufficient.add(trial.mask)
                else:
                    extensions.append(trial)
            extensions.sort(key=lambda t: (-score_of(t), t.sort_key()))
            if config.max_successors is not None:
                extensions = extensions[: config.max_successors]
            for t in extensions:
                candidates[t.mask] = t
        ranked = sorted(candidates.values(), key=lambda t: (-score_of(t), t.sort_key()))
        frontier = ranked[: config.beam_width]

    pruned = _antichain_minima(sorted(sufficient))
    minimized = {
        minimize_set(run_oracle, instance, class_id, ConceptSet(m), tau, ref).mask
        for m in pruned
    }
    final = _antichain_minima(sorted(minimized))
    explanation = _build_explanation(run_oracle, instance, class_id, final, ref)
    stats = BeamStats(
        collected_sufficient=len(sufficient),
        max_depth=max_depth_reached,
        distinct_queries=len(memo),
    )
    return explanation, stats


def exact_complete_explanation(
    oracle: Oracle,
    instance: Instance,
    class_id: int,
    tau_p: float = 0.95,
    k_limit: int = 15,
) -> CompleteExplanation:
    """Brute-force ground truth: enumerate all non-empty subsets and keep the
    subset-minimal sufficient ones. Costs 2^k oracle calls."""
    objs = instance.objects.ids()
    k = len(objs)
    if k > k_limit:
        raise TooManyObjectsError(f"{k} objects exceeds exact limit {k_limit}")
    ref = reference_score(oracle, instance, class_id)

    # local (dense) bit position -> concept id
    def to_concept_set(local_mask: int) -> ConceptSet:
        return ConceptSet.of(objs[i] for i in range(k) if local_mask >> i & 1)

    n = 1 << k
    suff = [False] * n
    for local in range(1, n):
        s = oracle.score(ScoreQuery(instance.id, class_id, to_concept_set(local)))
        suff[local] = s >= tau_p * ref

    # has_sufficient_strict_subset via subset DP over immediate subsets
    hss = [False] * n
    for local in range(1, n):
        bits = local
        while bits:
            low = bits & -bits
            sub = local ^ low
            if sub and (suff[sub] or hss[sub]):
                hss[local] = True
                break
            bits ^= low
    minimal = [
        to_concept_set(local).mask for local in range(1, n) if suff[local] and not hss[local]
    ]
    return _build_explanation(oracle, instance, class_id, minimal, ref)
