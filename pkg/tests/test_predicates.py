import numpy as np
import pytest

from setrlusi.datasets import DomainDataset, TransferTask
from setrlusi.predicates import (
    DegenerateSourceWarning,
    MARGIN_BACKED_KINDS,
    PoolConfig,
    PredicateKind,
    PredicateSpec,
    build_predicate_pool,
    evaluate_predicate,
    pool_size,
    refit_predicate,
    train_linear_margin_classifier,
)


def make_source(rng, n=40, d=3, name="src", informative=None):
    x = rng.normal(size=(n, d))
    if informative is None:
        y = (x[:, 0] > 0).astype(int)
    else:
        y = (x[:, informative] > 0).astype(int)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    return DomainDataset(name=name, features=x, labels=y)


def make_task(rng, n_sources=1, d=3):
    sources = [make_source(rng, d=d, name=f"s{i}") for i in range(n_sources)]
    target = make_source(rng, n=30, d=d, name="t")
    test = make_source(rng, n=20, d=d, name="te")
    return TransferTask(sources=sources, target_train=target, target_test=test)


class TestMarginClassifier:
    def test_separable_one_dimensional(self):
        x = np.linspace(-2, 2, 30).reshape(-1, 1)
        y = (x[:, 0] > 0).astype(int)
        clf = train_linear_margin_classifier(x, y, reg_param=0.1)
        signs = np.sign(x @ clf.w + clf.b)
        np.testing.assert_array_equal(signs > 0, y == 1)

    def test_label_mapping_flips_weights(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, 2))
        y = (x[:, 0] > 0).astype(int)
        clf = train_linear_margin_classifier(x, y, 0.1)
        flipped = train_linear_margin_classifier(x, 1 - y, 0.1)
        # swapping the 0/1 classes negates the separating direction
        assert np.sign(clf.w[0]) == -np.sign(flipped.w[0])

    def test_informative_feature_dominates(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(120, 3))
        y = (x[:, 1] > 0).astype(int)  # only feature 1 carries signal
        clf = train_linear_margin_classifier(x, y, 0.05)
        assert int(np.argmax(np.abs(clf.w))) == 1

    def test_tracked_objective_non_increasing(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(30, 2))
        y = (x @ np.array([1.0, -0.5]) > 0).astype(int)
        clf = train_linear_margin_classifier(x, y, 0.25)
        assert np.all(np.diff(clf.objective_trace) <= 1e-15)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_linear_margin_classifier(np.zeros((5, 2)), np.ones(5), 0.1)

    def test_nonpositive_reg_rejected(self):
        x = np.array([[0.0], [1.0]])
        with pytest.raises(ValueError):
            train_linear_margin_classifier(x, np.array([0, 1]), 0.0)


class TestPoolConstruction:
    def test_documented_size_example(self):
        rng = np.random.default_rng(3)
        task = make_task(rng, n_sources=1, d=3)
        config = PoolConfig(
            fs_reg_grid=(0.25,), gs_reg_grid=(0.25,), kernel_sigma_grid=(1.0,)
        )
        pool = build_predicate_pool(task, config, seed=0)
        assert len(pool) == 24
        assert len(pool) == pool_size(3, 1, config)

    def test_size_formula_random_sweep(self):
        rng = np.random.default_rng(4)
        for _ in range(6):
            d = int(rng.integers(1, 5))
            n_sources = int(rng.integers(1, 4))
            config = PoolConfig(
                fs_reg_grid=tuple(0.1 * (i + 1) for i in range(rng.integers(1, 4))),
                gs_reg_grid=tuple(0.1 * (i + 1) for i in range(rng.integers(1, 4))),
                kernel_sigma_grid=tuple(
                    0.5 * (i + 1) for i in range(rng.integers(1, 4))
                ),
                svm_max_epochs=30,
            )
            task = make_task(rng, n_sources=n_sources, d=d)
            pool = build_predicate_pool(task, config, seed=1)
            assert len(pool) == pool_size(d, n_sources, config)

    def test_ones_predicate_appears_once(self):
        rng = np.random.default_rng(5)
        for n_sources in (1, 3):
            task = make_task(rng, n_sources=n_sources)
            pool = build_predicate_pool(task, PoolConfig(svm_max_epochs=30), seed=2)
            assert sum(sp.kind is PredicateKind.ONES for sp in pool) == 1

    def test_second_source_doubles_source_entries(self):
        rng = np.random.default_rng(6)
        config = PoolConfig(
            fs_reg_grid=(0.25,), gs_reg_grid=(0.25,), kernel_sigma_grid=(1.0,),
            svm_max_epochs=30,
        )
        pool1 = build_predicate_pool(make_task(rng, n_sources=1), config, seed=3)
        pool2 = build_predicate_pool(make_task(rng, n_sources=2), config, seed=3)
        source1 = sum(sp.source_index is not None for sp in pool1)
        source2 = sum(sp.source_index is not None for sp in pool2)
        assert source2 == 2 * source1
        assert len(pool2) - source2 == len(pool1) - source1

    def test_degenerate_source_omits_margin_predicates(self):
        rng = np.random.default_rng(7)
        task = make_task(rng, n_sources=1)
        bad = DomainDataset(
            name="mono", features=rng.normal(size=(10, 3)), labels=np.ones(10)
        )
        task = TransferTask(
            sources=[bad], target_train=task.target_train, target_test=task.target_test
        )
        with pytest.warns(DegenerateSourceWarning):
            pool = build_predicate_pool(task, PoolConfig(svm_max_epochs=30), seed=4)
        assert not any(sp.kind in MARGIN_BACKED_KINDS for sp in pool)
        assert any(sp.kind is PredicateKind.SOURCE_KERNEL_SUM for sp in pool)

    def test_pool_evaluates_finite_on_target_train(self):
        rng = np.random.default_rng(8)
        task = make_task(rng, n_sources=2)
        pool = build_predicate_pool(task, PoolConfig(svm_max_epochs=30), seed=5)
        for sp in pool:
            values = evaluate_predicate(sp, task.target_train.features)
            assert values.shape == (task.target_train.n,)
            assert np.all(np.isfinite(values))

    def test_top_feature_index_is_argmax_of_its_classifier(self):
        rng = np.random.default_rng(9)
        task = make_task(rng, n_sources=2)
        pool = build_predicate_pool(task, PoolConfig(svm_max_epochs=60), seed=6)
        for sp in pool:
            if sp.kind is PredicateKind.SOURCE_TOP_FEATURE:
                assert sp.feature_indices[0] == int(np.argmax(np.abs(sp.weights)))


class TestEvaluate:
    def test_ones(self):
        spec = PredicateSpec(kind=PredicateKind.ONES)
        np.testing.assert_array_equal(
            evaluate_predicate(spec, np.zeros((4, 2))), np.ones(4)
        )

    def test_target_mean(self):
        spec = PredicateSpec(kind=PredicateKind.TARGET_MEAN)
        got = evaluate_predicate(spec, np.array([[1.0, 2.0, 3.0]]))
        assert got[0] == pytest.approx(2.0)

    def test_target_mean_square_is_square_of_mean(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(9, 4))
        mean = evaluate_predicate(PredicateSpec(kind=PredicateKind.TARGET_MEAN), x)
        square = evaluate_predicate(
            PredicateSpec(kind=PredicateKind.TARGET_MEAN_SQUARE), x
        )
        np.testing.assert_allclose(square, mean**2)

    def test_source_sign_thresholds_at_zero(self):
        spec = PredicateSpec(
            kind=PredicateKind.SOURCE_SIGN,
            source_index=0,
            weights=np.array([1.0]),
            intercept=0.0,
        )
        got = evaluate_predicate(spec, np.array([[-0.3], [0.0], [0.2]]))
        np.testing.assert_array_equal(got, [0.0, 0.0, 1.0])

    def test_source_decision_is_affine(self):
        spec = PredicateSpec(
            kind=PredicateKind.SOURCE_DECISION,
            source_index=0,
            weights=np.array([2.0, -1.0]),
            intercept=0.5,
        )
        x = np.array([[1.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(evaluate_predicate(spec, x), [1.5, 0.5])

    def test_feature_pair_product(self):
        spec = PredicateSpec(
            kind=PredicateKind.TARGET_FEATURE_PAIR, feature_indices=(0, 2)
        )
        x = np.array([[2.0, 9.0, 3.0]])
        assert evaluate_predicate(spec, x)[0] == pytest.approx(6.0)

    def test_kernel_sum_value(self):
        centers = np.array([[0.0], [1.0]])
        spec = PredicateSpec(
            kind=PredicateKind.SOURCE_KERNEL_SUM,
            source_index=0,
            centers=centers,
            sigma=1.0,
        )
        got = evaluate_predicate(spec, np.array([[0.0]]))
        assert got[0] == pytest.approx(1.0 + np.exp(-0.5), abs=1e-12)

    def test_index_out_of_range(self):
        spec = PredicateSpec(
            kind=PredicateKind.TARGET_FEATURE, feature_indices=(5,)
        )
        with pytest.raises(ValueError):
            evaluate_predicate(spec, np.zeros((3, 2)))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            PredicateSpec(kind=PredicateKind.SOURCE_DECISION)  # no source_index
        with pytest.raises(ValueError):
            PredicateSpec(kind=PredicateKind.ONES, source_index=0)
        with pytest.raises(ValueError):
            PredicateSpec(kind=PredicateKind.TARGET_FEATURE)  # no index


class TestRefit:
    def test_target_kinds_unchanged(self):
        rng = np.random.default_rng(11)
        src = make_source(rng)
        spec = PredicateSpec(kind=PredicateKind.TARGET_MEAN)
        assert refit_predicate(spec, src) is spec

    def test_kernel_sum_swaps_centers(self):
        rng = np.random.default_rng(12)
        src = make_source(rng)
        spec = PredicateSpec(
            kind=PredicateKind.SOURCE_KERNEL_SUM,
            source_index=0,
            centers=np.zeros((2, 3)),
            sigma=1.0,
        )
        refit = refit_predicate(spec, src)
        assert refit.centers.shape == src.features.shape
        assert refit.sigma == spec.sigma

    def test_margin_kinds_retrain_on_subsample(self):
        rng = np.random.default_rng(13)
        src = make_source(rng, informative=2)
        spec = PredicateSpec(
            kind=PredicateKind.SOURCE_TOP_FEATURE,
            source_index=0,
            weights=np.array([9.0, 0.0, 0.0]),
            intercept=0.0,
            feature_indices=(0,),
            reg_param=0.05,
        )
        refit = refit_predicate(spec, src, max_epochs=120)
        assert refit.feature_indices[0] == 2
        assert refit.reg_param == spec.reg_param
