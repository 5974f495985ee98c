import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

import ranksub.engine as engine_mod
from ranksub import (
    EnumerationTooLarge,
    EstimatorConfig,
    Exhaustive,
    Random,
    RandomBreak,
    RankGrid,
    Reject,
    SampleMatrix,
    ShapeMismatch,
    TiesDetected,
    component_ranks,
    default_subsample_count,
    estimate,
    estimate_exhaustive,
    estimate_random,
    merge_grids,
    pseudo_observations,
    subsample_rank_set,
)


class TestComponentRanks:
    def test_table1_ranks(self, table1_sample):
        ranks = component_ranks(table1_sample)
        expected = np.array([[4, 1], [1, 2], [2, 4], [3, 3]])
        assert (ranks == expected).all()

    def test_single_observation(self):
        sample = SampleMatrix(np.array([[3.2, -1.0, 0.5]]))
        assert (component_ranks(sample) == np.array([[1, 1, 1]])).all()

    def test_each_column_is_permutation(self):
        rng = np.random.default_rng(0)
        sample = SampleMatrix(rng.standard_normal((23, 4)))
        ranks = component_ranks(sample)
        for l in range(4):
            assert sorted(ranks[:, l]) == list(range(1, 24))

    def test_ties_detected(self):
        sample = SampleMatrix(np.array([[1.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))
        with pytest.raises(TiesDetected) as err:
            component_ranks(sample, Reject())
        assert err.value.column == 0
        assert err.value.value == 1.0

    def test_random_break_is_deterministic_permutation(self):
        sample = SampleMatrix(np.array([[1.0], [1.0], [1.0], [2.0]]))
        r1 = component_ranks(sample, RandomBreak(seed=5))
        r2 = component_ranks(sample, RandomBreak(seed=5))
        assert (r1 == r2).all()
        assert sorted(r1[:, 0]) == [1, 2, 3, 4]
        assert r1[3, 0] == 4  # untied maximum keeps its rank


class TestSubsampleRankSet:
    def test_table1_subset_abc(self, table1_sample):
        assert subsample_rank_set(table1_sample, [0, 1, 2]) == {(3, 1), (1, 2), (2, 3)}

    def test_whole_sample(self, table1_sample):
        got = subsample_rank_set(table1_sample, [0, 1, 2, 3])
        assert got == {(4, 1), (1, 2), (2, 4), (3, 3)}

    def test_d1_is_full_range(self):
        sample = SampleMatrix(np.random.default_rng(3).standard_normal((10, 1)))
        assert subsample_rank_set(sample, [1, 4, 7, 9]) == {(1,), (2,), (3,), (4,)}

    def test_duplicate_indices_rejected(self, table1_sample):
        with pytest.raises(ValueError):
            subsample_rank_set(table1_sample, [0, 0, 1])


class TestExhaustive:
    def test_table2_exact(self, table1_sample, table2_expected):
        grid = estimate_exhaustive(table1_sample, 3)
        for cell, expected in table2_expected.items():
            assert grid.fraction(cell) == expected

    def test_exact_normalization(self, table1_sample):
        grid = estimate_exhaustive(table1_sample, 3)
        total = sum(grid.fraction(c) for c in itertools.product((1, 2, 3), repeat=2))
        assert total == 1

    def test_n_equals_m_single_subsample(self, table1_sample):
        grid = estimate_exhaustive(table1_sample, 4)
        for r in [(4, 1), (1, 2), (2, 4), (3, 3)]:
            assert grid.fraction(r) == Fraction(1, 4)

    def test_d1_uniform(self):
        sample = SampleMatrix(np.random.default_rng(1).standard_normal((9, 1)))
        grid = estimate_exhaustive(sample, 4)
        for r in range(1, 5):
            assert grid.fraction((r,)) == Fraction(1, 4)

    def test_enumeration_cap(self):
        sample = SampleMatrix(np.random.default_rng(2).standard_normal((40, 2)))
        with pytest.raises(EnumerationTooLarge) as err:
            estimate_exhaustive(sample, 20, enumeration_cap=10**6)
        assert err.value.n_subsets == math.comb(40, 20)

    def test_equals_average_of_subset_grids(self, table1_sample, table2_expected):
        per_subset = []
        for subset in itertools.combinations(range(4), 3):
            counts = np.zeros((3, 3), dtype=np.int64)
            for r in subsample_rank_set(table1_sample, subset):
                counts[r[0] - 1, r[1] - 1] = 1
            per_subset.append(RankGrid.from_counts(3, 2, counts, 3, total_draws=1))
        merged = merge_grids(per_subset)
        for cell, expected in table2_expected.items():
            assert merged.fraction(cell) == expected


class TestRandom:
    def test_determinism(self, table1_sample):
        g1 = estimate_random(table1_sample, 3, 5000, seed=11)
        g2 = estimate_random(table1_sample, 3, 5000, seed=11)
        assert (g1.weights_dense() == g2.weights_dense()).all()

    def test_worker_count_does_not_change_result(self, table1_sample):
        g1 = estimate_random(table1_sample, 3, 20000, seed=11, threads=1)
        g4 = estimate_random(table1_sample, 3, 20000, seed=11, threads=4)
        assert (g1.weights_dense() == g4.weights_dense()).all()

    def test_binomial_tolerance_against_exhaustive(self, table1_sample, table2_expected):
        b = 10**6
        grid = estimate_random(table1_sample, 3, b, seed=42)
        for cell, expected in table2_expected.items():
            p = float(expected)
            tol = 3.0 * math.sqrt(p * (1 - p) / b)
            assert abs(grid.weight(cell) - p) <= tol + 1e-12

    def test_d1_exactly_uniform(self):
        sample = SampleMatrix(np.random.default_rng(4).standard_normal((12, 1)))
        grid = estimate_random(sample, 5, 777, seed=0)
        for r in range(1, 6):
            assert grid.fraction((r,)) == Fraction(1, 5)

    def test_unbiased_against_exhaustive_cellwise(self):
        # conditional on the sample, the random estimator is unbiased per cell
        rng = np.random.default_rng(9)
        sample = SampleMatrix(rng.standard_normal((12, 2)))
        exact = estimate_exhaustive(sample, 4).weights_dense()
        approx = estimate_random(sample, 4, 200_000, seed=77).weights_dense()
        q = 4 * exact  # per-subset hit probability
        se = np.sqrt(np.maximum(q * (1 - q), 1e-12) / 200_000) / 4
        assert (np.abs(approx - exact) <= 4 * se + 1e-12).all()


class TestMergeGrids:
    def test_idempotent_on_equal_grids(self, table1_sample):
        g = estimate_exhaustive(table1_sample, 3)
        merged = merge_grids([g, g])
        assert (merged.weights_dense() == g.weights_dense()).all()

    def test_order_invariance_float_path(self):
        rng = np.random.default_rng(5)
        grids = []
        for _ in range(6):
            w = rng.random((4, 4))
            grids.append(RankGrid.from_weights(4, 2, w / w.sum(), total_draws=int(rng.integers(1, 50))))
        a = merge_grids(grids).weights_dense()
        b = merge_grids(grids[::-1]).weights_dense()
        assert np.abs(a - b).max() < 1e-12

    def test_shape_mismatch(self, table1_sample):
        g3 = estimate_exhaustive(table1_sample, 3)
        g2 = estimate_exhaustive(table1_sample, 2)
        with pytest.raises(ShapeMismatch):
            merge_grids([g3, g2])

    def test_draw_count_weighting(self, table1_sample):
        g1 = estimate_random(table1_sample, 3, 100, seed=1)
        g2 = estimate_random(table1_sample, 3, 300, seed=2)
        merged = merge_grids([g1, g2])
        assert merged.total_draws == 400
        expected = (100 * g1.weights_dense() + 300 * g2.weights_dense()) / 400
        assert np.abs(merged.weights_dense() - expected).max() < 1e-15


class TestInvariances:
    def test_monotone_transform_bit_invariance(self):
        rng = np.random.default_rng(6)
        values = rng.standard_normal((15, 3))
        transformed = values.copy()
        transformed[:, 0] = np.exp(values[:, 0])
        transformed[:, 1] = 3.0 * values[:, 1] + 10.0
        transformed[:, 2] = np.arctan(values[:, 2])
        for est in (
            lambda s: estimate_exhaustive(s, 4),
            lambda s: estimate_random(s, 4, 3000, seed=8),
        ):
            w1 = est(SampleMatrix(values)).weights_dense()
            w2 = est(SampleMatrix(transformed)).weights_dense()
            assert (w1 == w2).all()

    def test_normalization_and_nonnegativity(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            sample = SampleMatrix(rng.standard_normal((20, 2)))
            grid = estimate_random(sample, 6, 5000, seed=int(rng.integers(1 << 30)))
            w = grid.weights_dense()
            assert (w >= 0).all()
            assert abs(w.sum() - 1.0) < 1e-12

    def test_unbiasedness_monte_carlo(self):
        # mean over independent samples of the exhaustive grid -> m^-d per cell
        m, d, n, reps = 4, 2, 8, 2000
        root = np.random.SeedSequence(123)
        acc = np.zeros((m,) * d)
        acc2 = np.zeros((m,) * d)
        for child in root.spawn(reps):
            sample = SampleMatrix(np.random.default_rng(child).standard_normal((n, d)))
            w = estimate_exhaustive(sample, m).weights_dense()
            acc += w
            acc2 += w * w
        mean = acc / reps
        se = np.sqrt((acc2 / reps - mean**2) / reps)
        assert (np.abs(mean - m ** (-d)) <= 4 * se).all()


class TestSparseRepresentation:
    def test_sparse_and_dense_agree(self, table1_sample, monkeypatch):
        dense = estimate_exhaustive(table1_sample, 3)
        monkeypatch.setattr(engine_mod, "DENSE_CELL_LIMIT", 1)
        sparse = estimate_exhaustive(table1_sample, 3)
        assert not sparse.is_dense and dense.is_dense
        for cell in itertools.product((1, 2, 3), repeat=2):
            assert sparse.fraction(cell) == dense.fraction(cell)
        assert sparse.total_weight == 1.0

    def test_sparse_random_matches_dense(self, table1_sample, monkeypatch):
        dense = estimate_random(table1_sample, 3, 2000, seed=3)
        monkeypatch.setattr(engine_mod, "DENSE_CELL_LIMIT", 1)
        sparse = estimate_random(table1_sample, 3, 2000, seed=3)
        for cell in itertools.product((1, 2, 3), repeat=2):
            assert sparse.fraction(cell) == dense.fraction(cell)


class TestConfigAndPlumbing:
    def test_estimate_dispatch(self, table1_sample, table2_expected):
        grid = estimate(table1_sample, EstimatorConfig(m=3, strategy=Exhaustive()))
        assert grid.fraction((3, 1)) == table2_expected[(3, 1)]
        grid_r = estimate(table1_sample, EstimatorConfig(m=3, strategy=Random(count=500, seed=2)))
        assert grid_r.total_draws == 500

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EstimatorConfig(m=1)
        with pytest.raises(ValueError):
            Random(count=0, seed=1)

    def test_default_subsample_count(self):
        assert default_subsample_count(8, 2) == 10**5
        assert default_subsample_count(15, 5) == 30 * 15**5

    def test_pseudo_observations(self, table1_sample):
        u = pseudo_observations(table1_sample)
        assert u.shape == (4, 2)
        assert ((u > 0) & (u < 1)).all()
        assert u[0, 0] == 4 / 5

    def test_sample_csv_roundtrip(self, tmp_path, table1_sample):
        path = tmp_path / "data.csv"
        table1_sample.to_csv(path)
        back = SampleMatrix.from_csv(path)
        assert (back.values == table1_sample.values).all()

    def test_csv_rejects_empty_cells(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,x2\n1.0,\n")
        with pytest.raises(ValueError):
            SampleMatrix.from_csv(path)

    def test_csv_rejects_nan(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("x1,x2\n1.0,nan\n2.0,3.0\n")
        with pytest.raises(ValueError):
            SampleMatrix.from_csv(path)

    def test_grid_csv_roundtrip(self, tmp_path, table1_sample, table2_expected):
        grid = estimate_exhaustive(table1_sample, 3)
        path = tmp_path / "grid.csv"
        grid.to_csv(path, metadata={"strategy": "exhaustive"})
        assert (tmp_path / "grid.json").exists()
        back = RankGrid.from_csv(path)
        assert (back.m, back.d) == (3, 2)
        for cell, expected in table2_expected.items():
            assert abs(back.weight(cell) - float(expected)) < 1e-15
