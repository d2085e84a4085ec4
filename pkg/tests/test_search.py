import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptdnf import (
    ConceptSet,
    Instance,
    ScoreQuery,
    SearchConfig,
    SyntheticModel,
    SyntheticOracle,
    beam_add,
    beam_add_with_stats,
    cached,
    exact_complete_explanation,
    is_sufficient,
    minimize_set,
)
from conceptdnf.search import (
    EmptySubsetError,
    NonPositiveReferenceError,
    SearchError,
    TooManyObjectsError,
)

BED, WALL, LAMP = 0, 1, 2


def make_instance(weights, seed_objects=None):
    """Single-class instance over all concepts with the given weights."""
    objects = ConceptSet.of(seed_objects or range(len(weights)))
    model = SyntheticModel((tuple(weights),))
    oracle = cached(SyntheticOracle(model))
    ref = model.class_score(0, objects)
    inst = Instance("x", objects, 0, None, (ref,))
    return oracle, inst


class TestIsSufficient:
    def test_pair_at_threshold(self, bedroom_oracle, bedroom_instance):
        assert is_sufficient(
            bedroom_oracle, bedroom_instance, 0, ConceptSet.of([BED, WALL]), 0.95
        )

    def test_single_below_threshold(self, bedroom_oracle, bedroom_instance):
        assert not is_sufficient(
            bedroom_oracle, bedroom_instance, 0, ConceptSet.of([BED]), 0.95
        )

    def test_full_set_for_any_tau(self, bedroom_oracle, bedroom_instance):
        assert is_sufficient(
            bedroom_oracle, bedroom_instance, 0, bedroom_instance.objects, 1.0
        )

    def test_rejects_empty_set(self, bedroom_oracle, bedroom_instance):
        with pytest.raises(EmptySubsetError):
            is_sufficient(bedroom_oracle, bedroom_instance, 0, ConceptSet.empty(), 0.95)

    def test_rejects_non_positive_reference(self):
        oracle, inst = make_instance([0.0, 0.0])
        with pytest.raises(NonPositiveReferenceError):
            is_sufficient(oracle, inst, 0, ConceptSet.of([0]), 0.95)

    def test_rejects_subset_outside_objects(self, bedroom_oracle, bedroom_instance):
        with pytest.raises(SearchError):
            is_sufficient(bedroom_oracle, bedroom_instance, 0, ConceptSet.of([9]), 0.95)


class TestMinimizeSet:
    def test_drops_redundant_in_ascending_id_order(self, bedroom_oracle, bedroom_instance):
        # wall is tried before lamp, and {bed,lamp} stays sufficient
        got = minimize_set(
            bedroom_oracle, bedroom_instance, 0, ConceptSet.of([BED, WALL, LAMP]), 0.95
        )
        assert got == ConceptSet.of([BED, LAMP])

    def test_already_minimal_is_fixed_point(self, bedroom_oracle, bedroom_instance):
        s = ConceptSet.of([BED, WALL])
        assert minimize_set(bedroom_oracle, bedroom_instance, 0, s, 0.95) == s

    def test_sufficient_singleton(self):
        oracle, inst = make_instance([1.0, 0.0])
        got = minimize_set(oracle, inst, 0, ConceptSet.of([0]), 0.95)
        assert got == ConceptSet.of([0])

    def test_rejects_insufficient_input(self, bedroom_oracle, bedroom_instance):
        with pytest.raises(SearchError):
            minimize_set(bedroom_oracle, bedroom_instance, 0, ConceptSet.of([WALL]), 0.95)


class TestBeamAdd:
    def test_bedroom_fixture(self, bedroom_oracle, bedroom_instance):
        exp = beam_add(
            bedroom_oracle, bedroom_instance, 0,
            SearchConfig(beam_width=3, max_successors=None),
        )
        assert set(exp.concept_sets()) == {
            ConceptSet.of([BED, WALL]),
            ConceptSet.of([BED, LAMP]),
        }

    def test_single_object_instance(self):
        oracle, inst = make_instance([0.7], seed_objects=[0])
        exp = beam_add(oracle, inst, 0)
        assert exp.concept_sets() == (ConceptSet.of([0]),)

    def test_irrelevant_concept_never_needed(self):
        oracle, inst = make_instance([0.5, 0.5, 0.0])
        exp = beam_add(oracle, inst, 0, SearchConfig(max_successors=None))
        assert exp.concept_sets() == (ConceptSet.of([0, 1]),)

    def test_empty_result_when_depth_capped(self, bedroom_oracle, bedroom_instance):
        exp = beam_add(
            bedroom_oracle, bedroom_instance, 0, SearchConfig(max_depth=1)
        )
        assert exp.is_empty

    def test_greedy_hill_climb_still_sound(self, bedroom_oracle, bedroom_instance):
        exp = beam_add(
            bedroom_oracle, bedroom_instance, 0,
            SearchConfig(beam_width=1, max_successors=1),
        )
        assert not exp.is_empty
        for s in exp.concept_sets():
            assert is_sufficient(bedroom_oracle, bedroom_instance, 0, s, 0.95)

    def test_deterministic(self, bedroom_model):
        runs = []
        for _ in range(2):
            oracle = cached(SyntheticOracle(bedroom_model))
            inst = Instance("img1", ConceptSet.of([0, 1, 2]), 0, None, (1.0,))
            runs.append(beam_add(oracle, inst, 0).concept_sets())
        assert runs[0] == runs[1]

    def test_score_ratios_at_least_tau(self, bedroom_oracle, bedroom_instance):
        exp = beam_add(bedroom_oracle, bedroom_instance, 0)
        for m in exp.mscxs:
            assert m.score_ratio >= 0.95


class TestExactEnumeration:
    def test_bedroom_fixture(self, bedroom_oracle, bedroom_instance):
        exp = exact_complete_explanation(bedroom_oracle, bedroom_instance, 0, 0.95)
        assert set(exp.concept_sets()) == {
            ConceptSet.of([BED, WALL]),
            ConceptSet.of([BED, LAMP]),
        }

    def test_tau_one_needs_everything(self):
        oracle, inst = make_instance([0.3, 0.3, 0.4])
        exp = exact_complete_explanation(oracle, inst, 0, 1.0)
        assert exp.concept_sets() == (inst.objects,)

    def test_dominant_singleton(self):
        oracle, inst = make_instance([1.0, 0.0, 0.0])
        exp = exact_complete_explanation(oracle, inst, 0, 0.95)
        assert exp.concept_sets() == (ConceptSet.of([0]),)

    def test_refuses_large_instances(self):
        oracle, inst = make_instance([0.1] * 16)
        with pytest.raises(TooManyObjectsError):
            exact_complete_explanation(oracle, inst, 0, 0.95, k_limit=15)


def random_monotone_instance(seed, k_max=8):
    rng = random.Random(seed)
    k = rng.randint(1, k_max)
    weights = [round(rng.random() * rng.random(), 4) for _ in range(k)]
    if sum(weights) <= 0:
        weights[0] = 1.0
    return make_instance(weights)


class TestSearchProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_beam_equals_exact_with_wide_beam(self, seed):
        oracle, inst = random_monotone_instance(seed)
        k = len(inst.objects)
        cfg = SearchConfig(beam_width=1 << k, max_successors=None)
        got = beam_add(oracle, inst, 0, cfg)
        want = exact_complete_explanation(oracle, inst, 0, 0.95)
        assert got.concept_sets() == want.concept_sets()

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_soundness_and_one_minimality_default_setting(self, seed):
        oracle, inst = random_monotone_instance(seed)
        exp = beam_add(oracle, inst, 0, SearchConfig(beam_width=3, max_successors=5))
        for s in exp.concept_sets():
            assert is_sufficient(oracle, inst, 0, s, 0.95)
            for o in s.ids():
                smaller = s.remove(o)
                if not smaller.is_empty:
                    assert not is_sufficient(oracle, inst, 0, smaller, 0.95)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_supersets_of_sufficient_are_sufficient(self, seed):
        oracle, inst = random_monotone_instance(seed)
        rng = random.Random(seed + 1)
        ids = inst.objects.ids()
        base = ConceptSet.of(rng.sample(ids, rng.randint(1, len(ids))))
        if is_sufficient(oracle, inst, 0, base, 0.95):
            extra = [i for i in ids if i not in base]
            grown = base
            for i in extra:
                grown = grown.add(i)
                assert is_sufficient(oracle, inst, 0, grown, 0.95)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_output_is_antichain(self, seed):
        oracle, inst = random_monotone_instance(seed)
        exp = beam_add(oracle, inst, 0)
        sets = exp.concept_sets()
        for a in sets:
            for b in sets:
                assert a == b or not a.issubset(b)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_query_budget(self, seed):
        oracle, inst = random_monotone_instance(seed)
        exp, stats = beam_add_with_stats(
            oracle, inst, 0, SearchConfig(beam_width=3, max_successors=5)
        )
        if exp.is_empty:
            return
        k = len(inst.objects)
        d_star = max(len(s) for s in exp.concept_sets())
        budget = 3 * d_star * k + stats.collected_sufficient * d_star * d_star
        assert stats.distinct_queries <= budget
