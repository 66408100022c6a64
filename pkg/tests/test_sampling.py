import numpy as np
import pytest
import scipy.stats

from setrlusi.datasets import DomainDataset
from setrlusi.predicates import PredicateKind, PredicateSpec
from setrlusi.sampling import (
    DegenerateSampleError,
    RngStream,
    bootstrap_target,
    draw_predicate,
    proportional_sample_source,
    stream_for,
)


def labeled(rng, n=20, d=2, p1=0.5, name="ds"):
    y = (rng.random(n) < p1).astype(int)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    return DomainDataset(name=name, features=rng.normal(size=(n, d)), labels=y)


class TestRngStream:
    def test_same_stream_same_sequence(self):
        a = RngStream(seed=99, stream_id=5).generator().random(16)
        b = RngStream(seed=99, stream_id=5).generator().random(16)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(seed=99, stream_id=5).generator().random(16)
        b = RngStream(seed=99, stream_id=6).generator().random(16)
        assert not np.array_equal(a, b)

    def test_stream_for_packs_indices(self):
        assert stream_for(7, 1, 2).stream_id == (1 << 20) | 2
        with pytest.raises(ValueError):
            stream_for(7, 2**20)

    def test_negative_seed_rejected(self):
        with pytest.raises(ValueError):
            RngStream(seed=-1)


class TestBootstrap:
    def test_size_and_range(self):
        rng = np.random.default_rng(0)
        target = labeled(rng, n=15)
        boot = bootstrap_target(target, RngStream(1, 0))
        assert boot.n == 15
        # every drawn row exists verbatim in the original
        for row in boot.features:
            assert any(np.array_equal(row, orig) for orig in target.features)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        target = labeled(rng, n=12)
        a = bootstrap_target(target, RngStream(7, 3))
        b = bootstrap_target(target, RngStream(7, 3))
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_single_class_input_fails_after_redraws(self):
        rng = np.random.default_rng(2)
        target = DomainDataset(
            name="mono", features=rng.normal(size=(8, 2)), labels=np.ones(8)
        )
        with pytest.raises(DegenerateSampleError):
            bootstrap_target(target, RngStream(3, 0))

    def test_redraw_recovers_from_degenerate_first_draw(self):
        rng = np.random.default_rng(3)
        target = labeled(rng, n=4, p1=0.25)
        # find a stream whose first draw is single-class; the bootstrap
        # must silently redraw and still return both classes
        for sid in range(200):
            gen = RngStream(11, sid).generator()
            first = target.labels[gen.integers(0, 4, size=4)]
            if np.unique(first).size == 1:
                boot = bootstrap_target(target, RngStream(11, sid))
                assert np.unique(boot.labels).size == 2
                return
        pytest.fail("no degenerate first draw found in 200 streams")

    def test_both_classes_always_present(self):
        rng = np.random.default_rng(4)
        target = labeled(rng, n=10, p1=0.2)
        for sid in range(100):
            boot = bootstrap_target(target, RngStream(5, sid))
            assert np.unique(boot.labels).size == 2


class TestProportionalSample:
    def test_gamma_one_returns_everything(self):
        rng = np.random.default_rng(5)
        src = labeled(rng, n=16)
        sub = proportional_sample_source(src, 1.0, RngStream(1, 0))
        assert sub.n == src.n
        np.testing.assert_array_equal(np.sort(sub.labels), np.sort(src.labels))

    def test_stratified_ceiling_counts(self):
        rng = np.random.default_rng(6)
        y = np.array([0] * 10 + [1] * 6)
        src = DomainDataset(name="s", features=rng.normal(size=(16, 2)), labels=y)
        sub = proportional_sample_source(src, 0.5, RngStream(2, 0))
        assert int((sub.labels == 0).sum()) == 5
        assert int((sub.labels == 1).sum()) == 3

    def test_small_class_keeps_one(self):
        rng = np.random.default_rng(7)
        y = np.array([0] * 4 + [1] * 4)
        src = DomainDataset(name="s", features=rng.normal(size=(8, 2)), labels=y)
        sub = proportional_sample_source(src, 0.1, RngStream(3, 0))
        assert int((sub.labels == 0).sum()) == 1
        assert int((sub.labels == 1).sum()) == 1

    def test_no_replacement(self):
        rng = np.random.default_rng(8)
        src = labeled(rng, n=20)
        sub = proportional_sample_source(src, 0.9, RngStream(4, 0))
        rows = {tuple(r) for r in sub.features}
        assert len(rows) == sub.n

    def test_gamma_out_of_range(self):
        rng = np.random.default_rng(9)
        src = labeled(rng)
        for gamma in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                proportional_sample_source(src, gamma, RngStream(5, 0))

    def test_single_class_source_rejected(self):
        rng = np.random.default_rng(10)
        src = DomainDataset(
            name="mono", features=rng.normal(size=(6, 2)), labels=np.zeros(6)
        )
        with pytest.raises(ValueError):
            proportional_sample_source(src, 0.5, RngStream(6, 0))


class TestDrawPredicate:
    POOL = [
        PredicateSpec(kind=PredicateKind.TARGET_FEATURE, feature_indices=(i,))
        for i in range(24)
    ]

    def test_singleton_pool(self):
        assert draw_predicate(self.POOL[:1], RngStream(1, 0)) is self.POOL[0]

    def test_deterministic_sequence(self):
        gen_a = RngStream(9, 1).generator()
        gen_b = RngStream(9, 1).generator()
        picks_a = [draw_predicate(self.POOL, gen_a) for _ in range(50)]
        picks_b = [draw_predicate(self.POOL, gen_b) for _ in range(50)]
        assert picks_a == picks_b

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError):
            draw_predicate([], RngStream(1, 0))

    def test_uniformity_chi_square(self):
        gen = RngStream(123, 0).generator()
        counts = np.zeros(24)
        n = 100_000
        for _ in range(n):
            spec = draw_predicate(self.POOL, gen)
            counts[spec.feature_indices[0]] += 1
        expected = n / 24
        stat = float(((counts - expected) ** 2 / expected).sum())
        critical = scipy.stats.chi2.ppf(0.99, df=23)
        assert stat <= critical
