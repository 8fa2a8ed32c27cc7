"""Monte Carlo estimator: frozen oracle values, statistics, determinism."""

import math

import numpy as np
import pytest

from origen.backends import (DiscreteBackend, build_synthetic_backend,
                             exact_originality, point_mass, two_point_uniform)
from origen.errors import DomainError, InputError
from origen.estimator import (Conditioning, Reference, originality_estimate,
                              repeated_estimates, standard_error,
                              summary_standard_error, typicality_summary)
from origen.geometry import Embedding, SampleBatch
from origen.synthlab import FAILURE_PROMPTS, scenario_failure_mode

REF = Reference(Embedding(np.array([1.0, 0.0]), id="ref"), label="ref")


def batch_of(*rows):
    return SampleBatch(matrix=np.asarray(rows, dtype=float),
                       ids=[str(i) for i in range(len(rows))])


def cond_for(backend, seed=0, prompt="p"):
    return Conditioning(prompt=prompt, backend_id=backend.id, seed_base=seed)


class TestOriginalityEstimate:
    def test_all_samples_equal_reference(self):
        est = originality_estimate(REF, batch_of([1, 0], [1, 0], [1, 0]),
                                   "cosine-distance")
        assert est.value == pytest.approx(0.0, abs=1e-12)

    def test_mean_of_two_known_distances(self):
        # (0.8, 0.6) and (0.6, 0.8) sit at cosine distances 0.2 and 0.4 from e0
        est = originality_estimate(REF, batch_of([0.8, 0.6], [0.6, 0.8]),
                                   "cosine-distance")
        assert est.value == pytest.approx(0.3, abs=1e-12)
        np.testing.assert_allclose(est.per_sample_distances, [0.2, 0.4], atol=1e-12)

    def test_two_point_oracle_large_n(self):
        config = two_point_uniform()
        backend = DiscreteBackend(config)
        batch = backend.generate("p", seed=99, count=10_000)
        est = originality_estimate(REF, batch, "cosine-distance")
        assert exact_originality(REF, config, "cosine-distance") == 0.5
        assert abs(est.value - 0.5) <= 0.02

    def test_empty_batch(self):
        with pytest.raises(InputError):
            originality_estimate(REF, SampleBatch([]), "cosine-distance")

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            originality_estimate(REF, batch_of([1, 0, 0]), "cosine-distance")

    def test_value_is_mean_of_distances(self):
        rng = np.random.default_rng(3)
        batch = batch_of(*rng.normal(size=(17, 2)))
        est = originality_estimate(REF, batch, "cosine-distance")
        assert abs(est.value - float(np.mean(est.per_sample_distances))) <= 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        rows = rng.normal(size=(25, 2))
        base = originality_estimate(REF, batch_of(*rows), "cosine-distance").value
        perm = rng.permutation(25)
        shuffled = originality_estimate(REF, batch_of(*rows[perm]),
                                        "cosine-distance").value
        assert abs(base - shuffled) <= 1e-12

    def test_linearity_over_partitions(self):
        rng = np.random.default_rng(5)
        rows = rng.normal(size=(30, 2))
        full = originality_estimate(REF, batch_of(*rows), "cosine-distance").value
        parts = [rows[:7], rows[7:19], rows[19:]]
        weighted = sum(len(p) * originality_estimate(REF, batch_of(*p),
                                                     "cosine-distance").value
                       for p in parts) / 30
        assert abs(full - weighted) <= 1e-12


class TestStandardError:
    def test_equal_distances(self):
        est = originality_estimate(REF, batch_of([0, 1], [0, 1]), "cosine-distance")
        assert standard_error(est) == 0.0

    def test_hand_computed(self):
        est = originality_estimate(REF, batch_of([0.8, 0.6], [0.6, 0.8]),
                                   "cosine-distance")
        assert standard_error(est) == pytest.approx(0.1, abs=1e-12)

    def test_single_sample_rejected(self):
        est = originality_estimate(REF, batch_of([0, 1]), "cosine-distance")
        with pytest.raises(DomainError):
            standard_error(est)

    def test_quadrupled_n_halves_se(self):
        backend = DiscreteBackend(two_point_uniform())
        ratios = []
        for trial in range(100):
            small = originality_estimate(
                REF, backend.generate("p", seed=trial, count=100), "cosine-distance")
            large = originality_estimate(
                REF, backend.generate("p", seed=10_000 + trial, count=400),
                "cosine-distance")
            ratios.append(standard_error(large) / standard_error(small))
        assert abs(float(np.mean(ratios)) - 0.5) <= 0.1  # 20% relative


class TestRepeatedEstimates:
    def test_point_mass_all_zero(self):
        backend = DiscreteBackend(point_mass([1.0, 0.0]))
        summary = repeated_estimates(REF, cond_for(backend), 5, 7,
                                     "cosine-distance", backend)
        assert summary.mean == 0.0 and summary.std == 0.0
        assert not summary.degenerate

    def test_two_point_summary_near_oracle(self):
        backend = DiscreteBackend(two_point_uniform())
        summary = repeated_estimates(REF, cond_for(backend, seed=11), 40, 40,
                                     "cosine-distance", backend)
        tolerance = 3 * summary.std / math.sqrt(summary.m)
        assert abs(summary.mean - 0.5) <= tolerance

    def test_m1_degenerate(self):
        backend = DiscreteBackend(two_point_uniform())
        summary = repeated_estimates(REF, cond_for(backend), 8, 1,
                                     "cosine-distance", backend)
        assert summary.std == 0.0
        assert summary.degenerate

    def test_deterministic_bit_identical(self):
        backend = DiscreteBackend(two_point_uniform())
        a = repeated_estimates(REF, cond_for(backend, seed=5), 16, 6,
                               "cosine-distance", backend)
        b = repeated_estimates(REF, cond_for(backend, seed=5), 16, 6,
                               "cosine-distance", backend)
        for ea, eb in zip(a.estimates, b.estimates):
            np.testing.assert_array_equal(ea.per_sample_distances,
                                          eb.per_sample_distances)

    def test_parallelism_is_schedule_independent(self):
        backend = DiscreteBackend(two_point_uniform())
        seq = repeated_estimates(REF, cond_for(backend, seed=5), 16, 8,
                                 "cosine-distance", backend, parallelism=1)
        par = repeated_estimates(REF, cond_for(backend, seed=5), 16, 8,
                                 "cosine-distance", backend, parallelism=4)
        np.testing.assert_array_equal(seq.values(), par.values())

    def test_backend_id_mismatch(self):
        backend = DiscreteBackend(two_point_uniform())
        bad = Conditioning(prompt="p", backend_id="other", seed_base=0)
        with pytest.raises(InputError):
            repeated_estimates(REF, bad, 4, 2, "cosine-distance", backend)

    def test_unbiased_smoke(self):
        backend = DiscreteBackend(two_point_uniform())
        summary = repeated_estimates(REF, cond_for(backend, seed=2), 5, 200,
                                     "cosine-distance", backend)
        se = summary_standard_error(summary)
        assert abs(summary.mean - 0.5) <= 5 * se


class TestTypicality:
    def test_point_mass_probes_zero(self):
        backend = DiscreteBackend(point_mass([0.0, 2.0]))
        summary = typicality_summary(cond_for(backend), 5, 6,
                                     "cosine-distance", backend)
        assert summary.mean == 0.0

    def test_two_point_probes_near_half(self):
        backend = DiscreteBackend(two_point_uniform())
        summary = typicality_summary(cond_for(backend, seed=21), 40, 40,
                                     "cosine-distance", backend)
        tolerance = 3 * summary.std / math.sqrt(summary.m)
        assert abs(summary.mean - 0.5) <= tolerance

    def test_distorted_conditional_inverts_comparison(self):
        # concentrated "abstract" prompt: the planted reference looks ordinary
        scenario = scenario_failure_mode()
        backend = build_synthetic_backend(scenario.backend_config)
        cond = Conditioning(prompt=FAILURE_PROMPTS[0], backend_id=backend.id,
                            seed_base=77)
        ref_summary = repeated_estimates(scenario.planted_reference, cond, 40, 40,
                                         "cosine-distance", backend)
        typ_summary = typicality_summary(cond, 40, 40, "cosine-distance", backend)
        assert ref_summary.mean < typ_summary.mean
