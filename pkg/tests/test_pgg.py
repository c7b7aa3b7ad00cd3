"""
Тесты Pose-Guided Grouping
"""
import numpy as np
import pytest

from app.autodiff import Tape, finite_difference_check
from app.core.errors import InvalidInputError
from app.core.grid import GridShape, ScalarField, VectorField2
from app.grouping.pgg import (
    EmbeddingMatrix,
    MaskIndex,
    PggConfig,
    PggTrace,
    affinity_memory_ratio,
    assign_grouping_labels,
    gather_masked,
    gbms_iterate,
    pgg_forward,
    pgg_grouping_loss,
    pgg_refine,
    refine_fields,
    scatter_back,
)
from app.spatial.heatmap import BinaryMask

from conftest import make_pose

TWO_CLUSTERS = np.array([[0.0, 0.1, 10.0, 10.1]])


class TestGather:
    """Тесты сбора эмбеддингов по маске"""

    def test_shape(self):
        """Тест: N=3, KE+SIE → матрица 3×3"""
        shape = GridShape(4, 4)
        bits = np.zeros((4, 4), dtype=bool)
        bits[0, 1] = bits[2, 2] = bits[3, 0] = True
        x, index = gather_masked([ScalarField.zeros(shape), VectorField2.zeros(shape)], BinaryMask(shape, bits))
        assert (x.dims, x.count) == (3, 3)
        assert index.flat.tolist() == [1, 10, 12]

    def test_full_mask_identity(self):
        """Тест: полная маска 2×2, только KE → значения поля"""
        shape = GridShape(2, 2)
        ke = ScalarField(shape, np.array([[1.0, 2.0], [3.0, 4.0]]))
        x, _ = gather_masked([ke], BinaryMask.full(shape))
        np.testing.assert_array_equal(x.values, [[1.0, 2.0, 3.0, 4.0]])

    def test_empty_mask(self):
        """Тест: пустая маска → пустая матрица"""
        shape = GridShape(3, 3)
        x, index = gather_masked([ScalarField.zeros(shape)], BinaryMask.empty(shape))
        assert x.count == 0
        assert len(index) == 0

    def test_channel_scales(self):
        """Тест масштабирования каналов"""
        shape = GridShape(1, 1)
        x, _ = gather_masked([ScalarField(shape, np.array([[2.0]]))], BinaryMask.full(shape), scales=[0.5])
        assert x.values[0, 0] == 1.0


class TestGbms:
    """Тесты одного шага mean-shift"""

    def test_hand_computed_step(self):
        """Тест: [0, 0.1, 10, 10.1], δ=5"""
        out = gbms_iterate(EmbeddingMatrix(TWO_CLUSTERS), delta=5.0)
        np.testing.assert_allclose(out.values[0], [0.046880, 0.053121, 10.046880, 10.053121], atol=1e-6)
        assert out.values[0, 1] - out.values[0, 0] == pytest.approx(0.006241, abs=1e-6)

    def test_fixed_point(self):
        """Тест: одинаковые столбцы не меняются"""
        x = EmbeddingMatrix(np.full((2, 5), 3.0))
        np.testing.assert_allclose(gbms_iterate(x).values, x.values)

    def test_convex_hull(self):
        """Тест: результат лежит в пределах исходных значений"""
        x = np.random.default_rng(2).normal(size=(3, 12))
        out = gbms_iterate(EmbeddingMatrix(x), delta=0.8).values
        assert np.all(out.min(axis=1) >= x.min(axis=1) - 1e-12)
        assert np.all(out.max(axis=1) <= x.max(axis=1) + 1e-12)

    def test_translation_equivariance(self):
        """Тест: сдвиг входа сдвигает выход"""
        x = np.random.default_rng(3).normal(size=(2, 7))
        shift = np.array([[4.0], [-1.5]])
        plain = gbms_iterate(EmbeddingMatrix(x), delta=1.2).values
        moved = gbms_iterate(EmbeddingMatrix(x + shift), delta=1.2).values
        np.testing.assert_allclose(moved, plain + shift, atol=1e-10)

    def test_permutation_equivariance(self):
        """Тест: перестановка столбцов переставляет выход"""
        x = np.random.default_rng(5).normal(size=(2, 6))
        perm = np.array([3, 0, 5, 1, 4, 2])
        plain = gbms_iterate(EmbeddingMatrix(x)).values
        permuted = gbms_iterate(EmbeddingMatrix(x[:, perm])).values
        np.testing.assert_allclose(permuted, plain[:, perm], atol=1e-12)

    def test_inverse_kernel(self):
        """Тест ядра exp(−d²/(2δ²)): при большом δ столбцы стягиваются к среднему"""
        out = gbms_iterate(EmbeddingMatrix(TWO_CLUSTERS), delta=1e3, kernel='inverse')
        np.testing.assert_allclose(out.values, np.full((1, 4), TWO_CLUSTERS.mean()), atol=1e-3)

    def test_dual_matches_numpy(self):
        """Тест: ветка на ленте совпадает с numpy"""
        x = np.random.default_rng(6).normal(size=(3, 5))
        tape = Tape()
        dual = gbms_iterate(tape.leaf(x), delta=2.0)
        np.testing.assert_allclose(dual.value, gbms_iterate(EmbeddingMatrix(x), delta=2.0).values)

    def test_bad_delta(self):
        """Тест: δ ≤ 0 отклоняется"""
        with pytest.raises(InvalidInputError):
            gbms_iterate(EmbeddingMatrix(TWO_CLUSTERS), delta=0.0)
        with pytest.raises(InvalidInputError):
            PggConfig(iterations=0)


class TestPggForward:
    """Тесты рекуррентного прохода и лосса группировки"""

    def test_trace_length(self):
        """Тест: r=1 → два итерата, r=3 на неподвижной точке → четыре равных"""
        assert len(pgg_forward(EmbeddingMatrix(TWO_CLUSTERS), r=1).iterates) == 2
        trace = pgg_forward(EmbeddingMatrix(np.ones((1, 4))), r=3)
        assert len(trace.iterates) == 4
        for it in trace.iterates:
            np.testing.assert_allclose(it.value, np.ones((1, 4)))

    def test_variance_decreases(self):
        """Тест: внутрикластерная дисперсия падает на каждом шаге"""
        trace = pgg_forward(EmbeddingMatrix(TWO_CLUSTERS), r=2)
        spreads = [np.var(it.value[0, :2]) for it in trace.iterates]
        assert spreads[0] > spreads[1] > spreads[2]

    def test_refine_matches_trace(self):
        """Тест: pgg_refine совпадает с последним итератом"""
        cfg = PggConfig(iterations=2)
        trace = pgg_forward(EmbeddingMatrix(TWO_CLUSTERS), cfg.delta, cfg.iterations)
        np.testing.assert_allclose(pgg_refine(EmbeddingMatrix(TWO_CLUSTERS), cfg).values, trace.final().values)

    def test_loss_one_person(self):
        """Тест: один человек, равные столбцы → pull 0, push 1 на итерат"""
        trace = pgg_forward(EmbeddingMatrix(np.full((1, 4), 2.0)), r=1)
        assert pgg_grouping_loss(trace, [0, 0, 0, 0]).item() == pytest.approx(2.0)

    def test_loss_two_far_clusters(self):
        """Тест: два далёких плотных кластера → push ≈ 0.5 на итерат"""
        x = np.array([[0.0, 0.0, 100.0, 100.0]])
        trace = pgg_forward(EmbeddingMatrix(x), r=1)
        assert pgg_grouping_loss(trace, [0, 0, 1, 1]).item() == pytest.approx(1.0, abs=1e-9)

    def test_unlabelled_columns_excluded(self):
        """Тест: столбцы с меткой −1 не входят в лосс"""
        x = np.array([[0.0, 0.0, 55.0]])
        trace = pgg_forward(EmbeddingMatrix(x), r=1)
        assert pgg_grouping_loss(trace, [0, 0, -1]).item() == pytest.approx(2.0)

    def test_empty_trace(self):
        """Тест: пустой след → ошибка"""
        with pytest.raises(InvalidInputError):
            pgg_grouping_loss(PggTrace([], 5.0, 1), [])

    def test_gradient_through_iteration(self):
        """Тест градиента через одну итерацию PGG на шести столбцах"""
        x = np.array([[0.0, 0.3, 0.5, 2.0, 2.2, 2.5], [1.0, 0.8, 1.1, -0.5, -0.2, -0.4]])
        labels = [0, 0, 0, 1, 1, 1]

        def f(tape, leaf):
            return pgg_grouping_loss(pgg_forward(leaf, delta=0.7, r=1), labels)

        report = finite_difference_check(f, x)
        assert report.max_relative_error < 1e-4


class TestScatter:
    """Тесты возврата эмбеддингов на сетку"""

    def test_round_trip(self):
        """Тест: gather → scatter восстанавливает маскированные пиксели"""
        shape = GridShape(5, 4)
        rng = np.random.default_rng(8)
        ke = ScalarField(shape, rng.normal(size=(4, 5)))
        mask = BinaryMask(shape, rng.uniform(size=(4, 5)) > 0.5)
        x, index = gather_masked([ke], mask)
        scattered = scatter_back(x, index, shape)
        np.testing.assert_array_equal(scattered.present, mask.bits)
        np.testing.assert_array_equal(scattered.values[mask.bits, 0], ke.values[mask.bits])

    def test_empty_mask_all_absent(self):
        """Тест: пустая маска → все пиксели отсутствуют"""
        shape = GridShape(3, 3)
        x, index = gather_masked([ScalarField.zeros(shape)], BinaryMask.empty(shape))
        assert not scatter_back(x, index, shape).present.any()

    def test_out_of_bounds(self):
        """Тест: индекс вне сетки → ошибка"""
        with pytest.raises(InvalidInputError):
            scatter_back(EmbeddingMatrix(np.zeros((1, 1))), MaskIndex(GridShape(2, 2), [7]), GridShape(2, 2))

    def test_refined_fields_two_regions(self):
        """Тест: уточнённое поле распадается на две почти постоянные области"""
        shape = GridShape(4, 1)
        ke = ScalarField(shape, TWO_CLUSTERS)
        refined = refine_fields([ke], BinaryMask.full(shape), PggConfig(iterations=3))[0]
        left, right = refined.values[0, :2], refined.values[0, 2:]
        assert np.ptp(left) < 1e-3
        assert np.ptp(right) < 1e-3
        assert right.mean() - left.mean() > 9.0

    def test_unmasked_pixels_untouched(self):
        """Тест: пиксели вне маски сохраняют исходные значения"""
        shape = GridShape(4, 1)
        ke = ScalarField(shape, TWO_CLUSTERS)
        bits = np.array([[True, True, False, False]])
        refined = refine_fields([ke], BinaryMask(shape, bits))[0]
        np.testing.assert_array_equal(refined.values[0, 2:], [10.0, 10.1])


class TestMemoryAndLabels:
    """Тесты отношения памяти и меток группировки"""

    def test_ratio_is_occupancy_squared(self):
        """Тест: ρ = 10% → 0.01, полная маска → 1, пустая → 0"""
        shape = GridShape(10, 10)
        bits = np.zeros((10, 10), dtype=bool)
        bits[0] = True
        assert affinity_memory_ratio(BinaryMask(shape, bits)) == pytest.approx(0.01)
        assert affinity_memory_ratio(BinaryMask.full(shape)) == 1.0
        assert affinity_memory_ratio(BinaryMask.empty(shape)) == 0.0

    def test_labels_nearest_within_two_sigma(self):
        """Тест: метка ближайшего сустава в пределах 2σ, иначе −1"""
        shape = GridShape(20, 1)
        index = MaskIndex(shape, [0, 3, 10, 19])
        poses = [make_pose([(0.0, 0.0)]), make_pose([(18.0, 0.0)])]
        labels = assign_grouping_labels(index, poses, sigma=2.0)
        assert labels.tolist() == [0, 0, -1, 1]
