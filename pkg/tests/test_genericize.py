"""Selection math, streaming, and the similarity/suppression reports."""

import numpy as np
import pytest

from origen.backends import DiscreteBackend, build_synthetic_backend, point_mass
from origen.backends.base import GeneratorBackend
from origen.errors import BackendError, DomainError, InputError, StreamInterrupted
from origen.estimator import Conditioning, Reference
from origen.genericize import (cross_mean_distances, genericize_stream,
                               most_generic_reference, select_generic,
                               similarity_report, top_similar)
from origen.geometry import (DistanceMatrix, Embedding, SampleBatch,
                             pairwise_distance_matrix)
from origen.store.manifest import ManifestSlice, RunManifest, load_manifest
from origen.synthlab import PLANTED_PROMPT, scenario_planted_unique

SQ2 = 1.0 / np.sqrt(2.0)


def batch_of(*rows, ids=None):
    rows = np.asarray(rows, dtype=float)
    return SampleBatch(matrix=rows,
                       ids=ids or [f"s{i}" for i in range(len(rows))])


def naive_cross_means(entries):
    n = len(entries)
    return np.array([sum(entries[i][j] for j in range(n) if j != i) / (n - 1)
                     for i in range(n)])


class TestCrossMeans:
    def test_two_samples(self):
        m = DistanceMatrix(np.array([[0.0, 0.8], [0.8, 0.0]]))
        np.testing.assert_allclose(cross_mean_distances(m), [0.8, 0.8], atol=1e-15)

    def test_hand_computed_triple(self):
        batch = batch_of([1, 0], [0, 1], [SQ2, SQ2])
        scores = cross_mean_distances(pairwise_distance_matrix(batch, "cosine-distance"))
        np.testing.assert_allclose(scores, [0.646447, 0.646447, 0.292893], atol=5e-7)
        assert int(np.argmin(scores)) == 2

    def test_identical_batch_all_zero(self):
        batch = batch_of([1, 1], [1, 1], [1, 1])
        scores = cross_mean_distances(pairwise_distance_matrix(batch, "cosine-distance"))
        np.testing.assert_allclose(scores, 0.0, atol=1e-12)

    def test_n1_rejected(self):
        with pytest.raises(DomainError):
            cross_mean_distances(DistanceMatrix(np.zeros((1, 1))))

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n = int(rng.integers(2, 16))
            batch = batch_of(*rng.normal(size=(n, 6)))
            m = pairwise_distance_matrix(batch, "cosine-distance")
            np.testing.assert_allclose(cross_mean_distances(m),
                                       naive_cross_means(m.entries), atol=1e-10)


class TestSelectGeneric:
    def test_midpoint_selected(self):
        sel = select_generic(batch_of([1, 0], [0, 1], [SQ2, SQ2]), "cosine-distance")
        assert sel.selected_index == 2
        np.testing.assert_allclose(sel.selected.values, [SQ2, SQ2])

    def test_tie_breaks_low(self):
        sel = select_generic(batch_of([1, 0], [0, 1]), "cosine-distance")
        assert sel.selected_index == 0

    def test_duplicate_pair_wins(self):
        u, w = [1.0, 0.0], [0.0, 1.0]
        sel = select_generic(batch_of(u, u, w), "cosine-distance")
        assert sel.selected_index == 0

    def test_membership_and_minimality(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            n = int(rng.integers(2, 20))
            batch = batch_of(*rng.normal(size=(n, 5)))
            sel = select_generic(batch, "cosine-distance")
            assert 0 <= sel.selected_index < n
            np.testing.assert_array_equal(sel.selected.values,
                                          batch.matrix[sel.selected_index])
            assert sel.cross_mean_distance <= float(sel.scores.min()) + 1e-12

    def test_scale_invariance(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            batch = batch_of(*rng.normal(size=(12, 4)))
            m = pairwise_distance_matrix(batch, "cosine-distance")
            base = int(np.argmin(cross_mean_distances(m)))
            for alpha in (0.5, 2.0, 10.0):
                scaled = int(np.argmin(cross_mean_distances(m.scaled(alpha))))
                assert scaled == base

    def test_permutation_consistency(self):
        rng = np.random.default_rng(11)
        rows = rng.normal(size=(9, 4))
        sel = select_generic(batch_of(*rows), "cosine-distance")
        perm = rng.permutation(9)
        sel_p = select_generic(batch_of(*rows[perm]), "cosine-distance")
        np.testing.assert_allclose(sel.selected.values, sel_p.selected.values,
                                   atol=1e-12)

    def test_n1_rejected(self):
        with pytest.raises(DomainError):
            select_generic(batch_of([1, 0]), "cosine-distance")


class FailingBackend(GeneratorBackend):
    """Delegates to a real backend, dying on a chosen batch seed index."""

    def __init__(self, inner, fail_at_call: int):
        self.inner = inner
        self.id = inner.id
        self.embedding_dimension = inner.embedding_dimension
        self.fail_at_call = fail_at_call
        self.calls = 0

    def generate(self, prompt, seed, count):
        self.calls += 1
        if self.calls == self.fail_at_call:
            raise BackendError("injected failure", batch_index=self.calls - 1)
        return self.inner.generate(prompt, seed, count)


class TestStream:
    def test_k1_reduces_to_select_generic(self):
        backend = build_synthetic_backend(scenario_planted_unique().backend_config)
        cond = Conditioning(prompt="p", backend_id=backend.id, seed_base=3)
        (only,) = genericize_stream(cond, 1, 6, "cosine-distance", backend)
        direct = select_generic(backend.generate("p", only_seed(cond), 6),
                                "cosine-distance")
        assert only.selected_index == direct.selected_index
        assert only.cross_mean_distance == direct.cross_mean_distance

    def test_counts_recorded(self, tmp_path):
        backend = build_synthetic_backend(scenario_planted_unique().backend_config)
        cond = Conditioning(prompt="p", backend_id=backend.id, seed_base=4)
        with RunManifest(tmp_path / "m.manifest", "r", {}) as manifest:
            sels = genericize_stream(cond, 5, 4, "cosine-distance", backend,
                                     manifest=manifest)
        loaded = load_manifest(tmp_path / "m.manifest")
        sl = loaded.slice(phase="genericize")
        assert len(sels) == 5
        assert len(sl.samples) == 5 * 4
        assert len(sl.selections) == 5
        for sel_rec in sl.selections:  # every selection points at a recorded sample
            assert (int(sel_rec["batch"]), int(sel_rec["selected_index"])) in {
                (int(s["batch"]), int(s["index"])) for s in sl.samples}

    def test_midstream_failure_preserves_prefix(self, tmp_path):
        inner = build_synthetic_backend(scenario_planted_unique().backend_config)
        backend = FailingBackend(inner, fail_at_call=3)
        cond = Conditioning(prompt="p", backend_id=backend.id, seed_base=5)
        manifest = RunManifest(tmp_path / "m.manifest", "r", {})
        with pytest.raises(StreamInterrupted) as err:
            genericize_stream(cond, 6, 4, "cosine-distance", backend,
                              manifest=manifest)
        manifest.close()
        assert err.value.completed_batches == 2
        sl = load_manifest(tmp_path / "m.manifest").slice(phase="genericize")
        assert len(sl.samples) == 2 * 4
        assert len(sl.selections) == 2

    def test_n1_rejected(self):
        backend = DiscreteBackend(point_mass([1.0, 0.0]))
        cond = Conditioning(prompt="p", backend_id=backend.id, seed_base=0)
        with pytest.raises(DomainError):
            genericize_stream(cond, 2, 1, "cosine-distance", backend)

    def test_parallel_matches_sequential(self):
        backend = build_synthetic_backend(scenario_planted_unique().backend_config)
        cond = Conditioning(prompt="p", backend_id=backend.id, seed_base=17)
        seq = genericize_stream(cond, 8, 5, "cosine-distance", backend,
                                parallelism=1)
        par = genericize_stream(cond, 8, 5, "cosine-distance", backend,
                                parallelism=4)
        assert [s.selected_index for s in seq] == [s.selected_index for s in par]
        assert [s.cross_mean_distance for s in seq] == [
            s.cross_mean_distance for s in par]


def only_seed(cond):
    from origen.seeds import derive_seed
    return derive_seed(cond.seed_base, "genericize", 0)


def make_slice(sample_rows, selected_positions, ids=None):
    """Hand-built genericize slice: one batch per row group."""
    samples, selections = [], []
    for b, rows in enumerate(sample_rows):
        for i, row in enumerate(rows):
            rid = ids[b][i] if ids else f"b{b}s{i}"
            samples.append({"type": "sample", "phase": "genericize", "prompt": "p",
                            "batch": b, "index": i, "id": rid,
                            "values": list(map(float, row))})
    for b, idx in selected_positions:
        rid = next(s["id"] for s in samples
                   if s["batch"] == b and s["index"] == idx)
        selections.append({"type": "selection", "prompt": "p", "batch": b,
                           "selected_index": idx, "selected_id": rid,
                           "score": 0.0, "scores": []})
    return ManifestSlice(header={}, samples=samples, selections=selections)


REF = Reference(Embedding(np.array([1.0, 0.0]), id="ref"), label="ref")


class TestSimilarityReport:
    def test_degenerate_single_bin(self):
        sl = make_slice([[[1.0, 0.0], [1.0, 0.0]]], [(0, 0)])
        rep = similarity_report(REF, sl, "cosine-distance", bins=5)
        assert np.all(rep.raw_similarities == 1.0)
        assert (rep.raw_counts > 0).sum() == 1
        assert rep.raw_counts.sum() == 2 and rep.selected_counts.sum() == 1
        assert np.all(np.diff(rep.bin_edges) > 0)

    def test_two_bins_split(self):
        # sims 0.2 and 0.8 against e0; observed span [0.2, 0.8], 2 bins
        v1 = [0.2, np.sqrt(1 - 0.04)]
        v2 = [0.8, 0.6]
        sl = make_slice([[v1, v2]], [(0, 0)])
        rep = similarity_report(REF, sl, "cosine-distance", bins=2)
        np.testing.assert_array_equal(rep.raw_counts, [1, 1])

    def test_full_span(self):
        sl = make_slice([[[1.0, 0.0], [0.0, 1.0]]], [(0, 1)])
        rep = similarity_report(REF, sl, "cosine-distance", bins=4, span="full")
        assert rep.bin_edges[0] == -1.0 and rep.bin_edges[-1] == 1.0

    def test_counts_sum_to_series_lengths(self):
        rng = np.random.default_rng(12)
        rows = [[rng.normal(size=2) for _ in range(6)] for _ in range(3)]
        sl = make_slice(rows, [(0, 1), (1, 0), (2, 5)])
        rep = similarity_report(REF, sl, "cosine-distance", bins=7)
        assert rep.raw_counts.sum() == 18
        assert rep.selected_counts.sum() == 3

    def test_empty_slice_rejected(self):
        sl = make_slice([[[1.0, 0.0]]], [])
        with pytest.raises(InputError):
            similarity_report(REF, sl, "cosine-distance")


class TestTopSimilar:
    def test_reference_itself_tops(self):
        sl = make_slice([[[1.0, 0.0], [0.0, 1.0]]], [(0, 1)])
        res = top_similar(REF, sl, 1, "cosine-distance")
        assert len(res.entries) == 1
        assert res.entries[0].similarity == pytest.approx(1.0, abs=1e-12)
        assert not res.truncated

    def test_k_equal_slice_size_total_order(self):
        rng = np.random.default_rng(13)
        rows = [[rng.normal(size=2) for _ in range(5)]]
        sl = make_slice(rows, [(0, 0)])
        res = top_similar(REF, sl, 5, "cosine-distance")
        sims = [e.similarity for e in res.entries]
        assert sims == sorted(sims, reverse=True)
        assert not res.truncated

    def test_overlong_k_flagged_truncated(self):
        sl = make_slice([[[1.0, 0.0], [0.0, 1.0]]], [(0, 0)])
        res = top_similar(REF, sl, 10, "cosine-distance")
        assert res.truncated and len(res.entries) == 2

    def test_tie_break_by_id(self):
        sl = make_slice([[[1.0, 0.0], [1.0, 0.0]]], [(0, 0)],
                        ids=[["zzz", "aaa"]])
        res = top_similar(REF, sl, 2, "cosine-distance")
        assert [e.sample_id for e in res.entries] == ["aaa", "zzz"]

    def test_selected_flag(self):
        sl = make_slice([[[1.0, 0.0], [0.5, 0.5]]], [(0, 1)])
        res = top_similar(REF, sl, 2, "cosine-distance")
        flags = {e.sample_id: e.selected for e in res.entries}
        assert flags == {"b0s0": False, "b0s1": True}


class TestMostGeneric:
    def _selections(self, backend, cond, k, n):
        return genericize_stream(cond, k, n, "cosine-distance", backend)

    def test_single_selection_returned(self):
        backend = build_synthetic_backend(scenario_planted_unique().backend_config)
        cond = Conditioning(prompt=PLANTED_PROMPT, backend_id=backend.id, seed_base=6)
        sels = self._selections(backend, cond, 1, 5)
        anchor = most_generic_reference(sels, cond, 5, "cosine-distance", backend)
        assert anchor.sample_id == sels[0].selected_id
        assert anchor.selection_index == 0

    def test_mode_sample_wins(self):
        # two candidate "selections": the 0.9-mass mode vs a 0.1-mass outlier;
        # exact expected distances are 0.2 and 1.8, so the mode must win
        from origen.backends import DiscreteConfig
        mode = Embedding(np.array([1.0, 0.0]), id="mode")
        rare = Embedding(np.array([-1.0, 0.0]), id="rare")
        config = DiscreteConfig(support=((0.9, mode), (0.1, rare)))
        backend = DiscreteBackend(config)
        cond = Conditioning(prompt="p", backend_id=backend.id, seed_base=7)
        from origen.genericize import GenericSelection
        sels = [
            GenericSelection(batch_index=0, selected_index=0,
                             cross_mean_distance=0.0, scores=np.zeros(2),
                             selected=rare),
            GenericSelection(batch_index=1, selected_index=0,
                             cross_mean_distance=0.0, scores=np.zeros(2),
                             selected=mode),
        ]
        anchor = most_generic_reference(sels, cond, 50, "cosine-distance", backend)
        assert anchor.sample_id == "mode"

    def test_deterministic(self):
        backend = build_synthetic_backend(scenario_planted_unique().backend_config)
        cond = Conditioning(prompt=PLANTED_PROMPT, backend_id=backend.id, seed_base=8)
        sels = self._selections(backend, cond, 4, 6)
        a = most_generic_reference(sels, cond, 6, "cosine-distance", backend)
        b = most_generic_reference(sels, cond, 6, "cosine-distance", backend)
        assert a.sample_id == b.sample_id

    def test_empty_rejected(self):
        backend = DiscreteBackend(point_mass([1.0, 0.0]))
        cond = Conditioning(prompt="p", backend_id=backend.id, seed_base=0)
        with pytest.raises(InputError):
            most_generic_reference([], cond, 4, "cosine-distance", backend)
