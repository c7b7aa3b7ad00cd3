import numpy as np
import pytest

from app.autodiff import Tape, finite_difference_check
from app.core.errors import InvalidInputError
from app.core.grid import GridShape, HeatmapStack
from app.spatial.heatmap import detection_loss, extract_peaks, pose_mask, render_confidence

from conftest import make_pose


class TestRenderConfidence:
    """Тесты рендера гауссовых карт уверенности"""

    def test_peak_value_and_decay(self):
        """Тест: 1.0 в точке сустава, exp(−1) на расстоянии σ"""
        stack = render_confidence([make_pose([(5.0, 5.0)])], GridShape(12, 12), sigma=2.0)
        assert stack.channels[0, 5, 5] == pytest.approx(1.0)
        assert stack.channels[0, 5, 7] == pytest.approx(0.367879, abs=1e-6)

    def test_max_over_people(self):
        """Тест: при двух людях берётся максимум"""
        poses = [make_pose([(5.0, 5.0)]), make_pose([(7.0, 5.0)])]
        stack = render_confidence(poses, GridShape(12, 12), sigma=2.0)
        assert stack.channels[0, 5, 5] == pytest.approx(1.0)

    def test_empty_list_with_joint_count(self):
        """Тест: пустой список поз даёт нулевой стек"""
        stack = render_confidence([], GridShape(4, 4), joint_count=3)
        assert stack.joint_count == 3
        assert not stack.channels.any()

    def test_missing_joint_leaves_channel_empty(self):
        """Тест: отсутствующий сустав не рисуется"""
        stack = render_confidence([make_pose([(1.0, 1.0), None])], GridShape(4, 4))
        assert not stack.channels[1].any()


class TestDetectionLoss:
    """Тесты L2 лосса детекции"""

    def test_identical_is_zero(self):
        """Тест: pred = gt → 0"""
        gt = render_confidence([make_pose([(3.0, 3.0)])], GridShape(8, 8))
        assert detection_loss(gt, gt).item() == 0.0

    def test_single_pixel_value_and_gradient(self):
        """Тест: 0.5 против 1.0 → 0.25, градиент −1"""
        shape = GridShape(1, 1)
        gt = HeatmapStack(shape, np.ones((1, 1, 1)))
        tape = Tape()
        pred = tape.leaf(np.full((1, 1, 1), 0.5))
        loss = detection_loss(pred, gt, tape=tape)
        tape.backward(loss)
        assert loss.item() == pytest.approx(0.25)
        assert pred.grad[0, 0, 0] == pytest.approx(-1.0)

    def test_shape_mismatch(self):
        """Тест: разные сетки → ошибка"""
        with pytest.raises(InvalidInputError):
            detection_loss(HeatmapStack.zeros(GridShape(4, 4), 1), HeatmapStack.zeros(GridShape(4, 5), 1))

    def test_gradient_random_8x8(self):
        """Тест градиента на случайном 8×8"""
        rng = np.random.default_rng(4)
        gt = HeatmapStack(GridShape(8, 8), rng.uniform(size=(2, 8, 8)))
        report = finite_difference_check(lambda tape, x: detection_loss(x, gt, tape=tape),
                                         rng.uniform(size=(2, 8, 8)))
        assert report.max_relative_error < 1e-4


class TestPeaks:
    """Тесты извлечения пиков"""

    def test_single_gaussian(self):
        """Тест: один гауссиан → один пик в его центре"""
        stack = render_confidence([make_pose([(10.0, 20.0)])], GridShape(32, 32))
        peaks = extract_peaks(stack)
        assert len(peaks[0]) == 1
        kp = peaks[0][0]
        assert (kp.x, kp.y, kp.confidence) == (10.0, 20.0, pytest.approx(1.0))

    def test_zero_channel(self):
        """Тест: нулевой канал → нет пиков"""
        assert extract_peaks(HeatmapStack.zeros(GridShape(8, 8), 2)) == [[], []]

    def test_two_gaussians(self):
        """Тест: два гауссиана в 20 px → два пика, по убыванию уверенности"""
        poses = [make_pose([(5.0, 10.0)], confidence=1.0), make_pose([(25.0, 10.0)])]
        stack = render_confidence(poses, GridShape(32, 20))
        found = sorted((kp.x, kp.y) for kp in extract_peaks(stack, nms_radius=3)[0])
        assert found == [(5.0, 10.0), (25.0, 10.0)]

    def test_plateau_has_no_peak(self):
        """Тест: плато без строгого максимума пиков не даёт"""
        stack = HeatmapStack(GridShape(4, 4), np.full((1, 4, 4), 0.5))
        assert extract_peaks(stack) == [[]]

    def test_parameter_ranges(self):
        """Тест допустимых параметров"""
        stack = HeatmapStack.zeros(GridShape(4, 4), 1)
        with pytest.raises(InvalidInputError):
            extract_peaks(stack, nms_radius=0)
        with pytest.raises(InvalidInputError):
            extract_peaks(stack, threshold=1.0)


class TestPoseMask:
    """Тесты бинарной маски позы"""

    def test_strict_threshold(self):
        """Тест: 0.25 > 0.2 → 1, ровно 0.2 → 0"""
        stack = HeatmapStack(GridShape(2, 1), np.array([[[0.25, 0.2]]]))
        mask = pose_mask(stack, tau=0.2)
        assert mask.bits.tolist() == [[True, False]]
        assert mask.occupancy == 1

    def test_empty_stack(self):
        """Тест: нулевой стек → N = 0"""
        assert pose_mask(HeatmapStack.zeros(GridShape(5, 5), 3)).occupancy == 0

    def test_monotone_in_tau(self):
        """Тест: рост τ только снимает биты"""
        stack = render_confidence([make_pose([(8.0, 8.0)]), make_pose([(20.0, 12.0)])], GridShape(32, 24))
        previous = None
        for tau in (0.1, 0.2, 0.4, 0.8):
            bits = pose_mask(stack, tau).bits
            if previous is not None:
                assert not (bits & ~previous).any()
            previous = bits

    def test_tau_range(self):
        """Тест: τ вне (0, 1) отклоняется"""
        with pytest.raises(InvalidInputError):
            pose_mask(HeatmapStack.zeros(GridShape(2, 2), 1), tau=0.0)
