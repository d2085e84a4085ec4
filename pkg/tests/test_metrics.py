import math

import pytest

from conceptdnf import (
    CompleteExplanation,
    ConceptSet,
    Instance,
    Mscx,
    ScoreQuery,
    SyntheticModel,
    SyntheticOracle,
    aggregate_fidelity,
    beam_add,
    cached,
    fidelity_minus,
    fidelity_plus,
    mscx_size_histogram,
)
from conceptdnf.metrics import MetricsError
from conceptdnf.oracle import Oracle

BED, WALL, LAMP = 0, 1, 2


def pmin_of(instance_id, class_id, *sets, ratio=1.0):
    return CompleteExplanation(
        instance_id,
        class_id,
        tuple(Mscx(ConceptSet.of(s), instance_id, class_id, ratio) for s in sets),
    )


class TestFidelityPlus:
    def test_union_removes_everything(self, bedroom_oracle, bedroom_instance):
        pmin = pmin_of("img1", 0, (BED, WALL), (BED, LAMP))
        assert fidelity_plus(bedroom_oracle, bedroom_instance, 0, pmin) == 0.0

    def test_partial_remainder(self):
        model = SyntheticModel(((0.96, 0.04),))
        oracle = cached(SyntheticOracle(model))
        inst = Instance("i", ConceptSet.of([0, 1]), 0, None, (1.0,))
        pmin = pmin_of("i", 0, (0,))
        assert fidelity_plus(oracle, inst, 0, pmin) == pytest.approx(0.04)

    def test_constant_oracle_gives_one(self):
        class Constant(Oracle):
            def score(self, q):
                return 0.7

        inst = Instance("i", ConceptSet.of([0, 1]), 0)
        pmin = pmin_of("i", 0, (0,))
        assert fidelity_plus(Constant(), inst, 0, pmin) == 1.0

    def test_empty_pmin_rejected(self, bedroom_oracle, bedroom_instance):
        with pytest.raises(MetricsError):
            fidelity_plus(
                bedroom_oracle, bedroom_instance, 0, CompleteExplanation("img1", 0, ())
            )


class TestFidelityMinus:
    def test_mean_over_mscxs(self, bedroom_oracle, bedroom_instance):
        pmin = pmin_of("img1", 0, (BED, WALL), (BED, LAMP))
        got = fidelity_minus(bedroom_oracle, bedroom_instance, 0, pmin)
        assert got == pytest.approx(0.95)

    def test_full_set_retained(self, bedroom_oracle, bedroom_instance):
        pmin = pmin_of("img1", 0, (BED, WALL, LAMP))
        assert fidelity_minus(bedroom_oracle, bedroom_instance, 0, pmin) == 1.0

    def test_extracted_terms_at_least_tau(self):
        import random

        for seed in range(20):
            rng = random.Random(seed)
            k = rng.randint(1, 8)
            weights = tuple(round(rng.random(), 4) for _ in range(k))
            if sum(weights) <= 0:
                weights = (1.0,) + weights[1:]
            model = SyntheticModel((weights,))
            oracle = cached(SyntheticOracle(model))
            inst = Instance("i", ConceptSet.of(range(k)), 0,
                            None, (model.class_score(0, ConceptSet.of(range(k))),))
            exp = beam_add(oracle, inst, 0)
            if exp.is_empty:
                continue
            ref = oracle.score(ScoreQuery("i", 0, inst.objects))
            for s in exp.concept_sets():
                assert oracle.score(ScoreQuery("i", 0, s)) / ref >= 0.95


class TestAggregate:
    def two_instance_setup(self):
        # fid- values 0.95 and 0.97 by construction
        model = SyntheticModel(((0.95, 0.05, 0.97, 0.03),))
        oracle = cached(SyntheticOracle(model))
        i1 = Instance("a", ConceptSet.of([0, 1]), 0, None, (1.0,))
        i2 = Instance("b", ConceptSet.of([2, 3]), 0, None, (1.0,))
        pmin = {"a": pmin_of("a", 0, (0,)), "b": pmin_of("b", 0, (2,))}
        return oracle, [i1, i2], pmin

    def test_mean_and_population_std(self):
        oracle, instances, pmin = self.two_instance_setup()
        report = aggregate_fidelity(oracle, instances, pmin)
        assert report.fid_minus_mean == pytest.approx(0.96)
        assert report.fid_minus_std == pytest.approx(0.01)
        assert report.n_instances == 2

    def test_single_instance_std_zero(self):
        oracle, instances, pmin = self.two_instance_setup()
        report = aggregate_fidelity(oracle, instances[:1], pmin)
        assert report.fid_minus_std == 0.0

    def test_empty_dataset_is_error(self):
        oracle, _, pmin = self.two_instance_setup()
        with pytest.raises(MetricsError):
            aggregate_fidelity(oracle, [], pmin)

    def test_skipped_instances_counted(self):
        oracle, instances, pmin = self.two_instance_setup()
        pmin = dict(pmin)
        pmin["b"] = CompleteExplanation("b", 0, ())
        report = aggregate_fidelity(oracle, instances, pmin)
        assert report.n_instances == 1
        assert report.n_skipped == 1


class TestHistogram:
    def test_counts_by_size(self):
        exps = [pmin_of("x", 0, (BED, WALL), (BED, LAMP))]
        assert mscx_size_histogram(exps) == {2: 2}

    def test_empty(self):
        assert mscx_size_histogram([]) == {}

    def test_total_matches_mscx_count(self):
        exps = [
            pmin_of("x", 0, (0,), (1, 2), (3, 4, 5)),
            pmin_of("y", 0, (1,)),
        ]
        hist = mscx_size_histogram(exps)
        assert sum(hist.values()) == 4

    def test_engineered_mode_at_three(self):
        # three near-equal dominant concepts per instance: minimal sets are triples
        model = SyntheticModel(((0.32, 0.32, 0.32, 0.04),))
        oracle = cached(SyntheticOracle(model))
        inst = Instance("i", ConceptSet.of([0, 1, 2, 3]), 0, None, (1.0,))
        exp = beam_add(oracle, inst, 0)
        hist = mscx_size_histogram([exp])
        assert max(hist, key=hist.get) == 3
