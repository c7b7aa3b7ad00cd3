"""
Тесты PCKh-сопоставления, AP и MOTA
"""
import numpy as np
import pytest

from app.core.errors import InvalidInputError
from app.evaluation.metrics import (
    COUNT_ROWS,
    CountTotals,
    average_precision,
    evaluate_frames,
    match_pckh,
    match_sequence,
    mota,
    mota_from_counts,
)

from conftest import make_pose

# голова 10 px → порог PCKh 5 px
PERSON_A = [(10.0, 0.0), (10.0, 10.0), (10.0, 30.0)]
PERSON_B = [(50.0, 0.0), (50.0, 10.0), (50.0, 30.0)]


def _gt(points, person_id):
    return make_pose(points, person_id=person_id)


def _shifted(points, dx, dy=0.0, joint=None):
    return [(x + dx, y + dy) if joint is None or j == joint else (x, y) for j, (x, y) in enumerate(points)]


class TestMatchPckh:
    """Тесты сопоставления одного кадра"""

    def test_perfect(self, tiny_skeleton):
        """Тест: pred = gt → все TP"""
        gt = [_gt(PERSON_A, 0), _gt(PERSON_B, 1)]
        result = match_pckh(gt, gt, skeleton=tiny_skeleton)
        assert result.tp.tolist() == [2, 2, 2]
        assert not result.fp.any() and not result.fn.any()

    def test_displaced_joint(self, tiny_skeleton):
        """Тест: сустав за порогом → 1 FP и 1 FN этого типа"""
        pred = [make_pose(_shifted(PERSON_A, 6.0, joint=2))]
        result = match_pckh(pred, [_gt(PERSON_A, 0)], skeleton=tiny_skeleton)
        assert result.tp.tolist() == [1, 1, 0]
        assert result.fp.tolist() == [0, 0, 1]
        assert result.fn.tolist() == [0, 0, 1]

    def test_threshold_boundary(self, tiny_skeleton):
        """Тест: смещение ровно factor·head_size засчитывается"""
        pred = [make_pose(_shifted(PERSON_A, 3.0, 4.0, joint=2))]
        result = match_pckh(pred, [_gt(PERSON_A, 0)], factor=0.5, skeleton=tiny_skeleton)
        assert result.tp.tolist() == [1, 1, 1]

    def test_tp_plus_fn_is_gt(self, tiny_skeleton):
        """Тест: TP + FN = число gt суставов"""
        gt = [_gt(PERSON_A, 0), _gt([PERSON_B[0], PERSON_B[1], None], 1)]
        pred = [make_pose(_shifted(PERSON_B, 1.0)), make_pose(_shifted(PERSON_A, 9.0, joint=1))]
        result = match_pckh(pred, gt, skeleton=tiny_skeleton)
        assert result.gt.tolist() == [2, 2, 1]

    def test_missing_head_skipped(self, tiny_skeleton):
        """Тест: gt без шеи пропускается и учитывается отдельно"""
        gt = [_gt([PERSON_A[0], None, PERSON_A[2]], 0)]
        result = match_pckh([], gt, skeleton=tiny_skeleton)
        assert result.skipped_gt == 1
        assert not result.gt.any()

    def test_greedy_by_score(self, tiny_skeleton):
        """Тест: более уверенное предсказание забирает gt первым"""
        gt = [_gt(PERSON_A, 0)]
        strong = make_pose(_shifted(PERSON_A, 1.0), confidence=0.9)
        weak = make_pose(PERSON_A, confidence=0.2)
        result = match_pckh([weak, strong], gt, skeleton=tiny_skeleton)
        assert result.tp.tolist() == [1, 1, 1]
        assert result.fp.tolist() == [1, 1, 1]
        assert [hit for _, score, hit in result.scored if score > 0.5] == [True, True, True]

    def test_factor_must_be_positive(self, tiny_skeleton):
        """Тест: factor ≤ 0 → ошибка"""
        with pytest.raises(InvalidInputError):
            match_pckh([], [], factor=0.0, skeleton=tiny_skeleton)


class TestAveragePrecision:
    """Тесты AP по суставам"""

    def test_perfect(self, tiny_skeleton):
        """Тест: идеальные предсказания → AP 1.0"""
        gt = [_gt(PERSON_A, 0), _gt(PERSON_B, 1)]
        ap = average_precision([match_pckh(gt, gt, skeleton=tiny_skeleton)])
        assert ap == {0: 1.0, 1: 1.0, 2: 1.0}

    def test_no_predictions(self, tiny_skeleton):
        """Тест: нет предсказаний → AP 0.0"""
        ap = average_precision([match_pckh([], [_gt(PERSON_A, 0)], skeleton=tiny_skeleton)])
        assert ap == {0: 0.0, 1: 0.0, 2: 0.0}

    def test_half_detected(self, tiny_skeleton):
        """Тест: найдена половина людей при одинаковом score → AP 0.5"""
        gt = [_gt(PERSON_A, 0), _gt(PERSON_B, 1)]
        ap = average_precision([match_pckh([make_pose(PERSON_A)], gt, skeleton=tiny_skeleton)])
        assert ap[0] == pytest.approx(0.5)

    def test_joint_without_gt_excluded(self, tiny_skeleton):
        """Тест: сустав без gt не попадает в AP"""
        gt = [_gt([PERSON_A[0], PERSON_A[1], None], 0)]
        ap = average_precision([match_pckh([make_pose(PERSON_A)], gt, skeleton=tiny_skeleton)])
        assert 2 not in ap

    def test_invariant_to_score_rescaling(self, tiny_skeleton):
        """Тест: AP не меняется при монотонном пересчёте score"""
        gt = [_gt(PERSON_A, 0), _gt(PERSON_B, 1)]
        wrong = _shifted(PERSON_A, 0.0, 60.0)

        def run(scale):
            pred = [make_pose(PERSON_A, confidence=0.9 * scale),
                    make_pose(wrong, confidence=0.6 * scale),
                    make_pose(PERSON_B, confidence=0.3 * scale)]
            return average_precision([match_pckh(pred, gt, skeleton=tiny_skeleton)])

        assert run(1.0) == pytest.approx(run(0.5))
        assert run(1.0)[0] == pytest.approx(0.5 + 0.5 * 2.0 / 3.0)


class TestMota:
    """Тесты MOTA и подмен идентичности"""

    @staticmethod
    def _counts(gt, fn=0, fp=0, idsw=0):
        return CountTotals(np.array([gt]), np.array([gt - fn]), np.array([fp]), np.array([fn]), np.array([idsw]))

    def test_formula(self):
        """Тест: GT=10, FN=1 → 0.9; 1 IDSW на 20 → 0.95"""
        assert mota_from_counts(self._counts(10, fn=1))['total'] == pytest.approx(0.9)
        assert mota_from_counts(self._counts(20, idsw=1))['total'] == pytest.approx(0.95)

    def test_perfect_tracking(self, tiny_skeleton):
        """Тест: идеальный трекинг → 1.0"""
        frames = [[_gt(PERSON_A, 0), _gt(PERSON_B, 1)]] * 3
        result = mota(match_sequence(frames, frames, skeleton=tiny_skeleton))
        assert result['total'] == 1.0
        assert result['per_joint'] == {0: 1.0, 1: 1.0, 2: 1.0}

    def test_negative_with_false_positives(self, tiny_skeleton):
        """Тест: много ложных срабатываний → MOTA < 0"""
        gt = [[_gt(PERSON_A, 0)]]
        junk = [make_pose(_shifted(PERSON_A, 0.0, 40.0 + 10 * i)) for i in range(3)]
        pred = [[make_pose(PERSON_A)] + junk]
        result = mota(match_sequence(pred, gt, skeleton=tiny_skeleton))
        assert result['total'] == pytest.approx(1.0 - 9.0 / 3.0)

    def test_id_switch_counted_per_joint(self, tiny_skeleton):
        """Тест: смена track id у gt-персоны → по одной подмене на сустав"""
        gt = [[_gt(PERSON_A, 0)]] * 3
        pred = [[make_pose(PERSON_A, person_id=5)], [make_pose(PERSON_A, person_id=5)],
                [make_pose(PERSON_A, person_id=6)]]
        results = match_sequence(pred, gt, skeleton=tiny_skeleton)
        assert [r.idsw.tolist() for r in results] == [[0, 0, 0], [0, 0, 0], [1, 1, 1]]
        assert mota(results)['total'] == pytest.approx(1.0 - 3.0 / 9.0)

    def test_frame_count_mismatch(self, tiny_skeleton):
        """Тест: разное число кадров → ошибка"""
        with pytest.raises(InvalidInputError):
            match_sequence([[]], [[], []], skeleton=tiny_skeleton)


class TestEvaluationReport:
    """Тесты сводной таблицы"""

    def test_table_layout(self, skeleton):
        """Тест: строки AP, MOTA и счётчики; колонки групп и Total"""
        gt_pose = make_pose([(20.0 + j, 10.0 + 3 * j) for j in range(skeleton.joint_count)], person_id=0)
        report = evaluate_frames([[gt_pose]], [[gt_pose]], skeleton)
        table = report.table()
        assert list(table.index) == ['AP', 'MOTA', *COUNT_ROWS]
        assert list(table.columns) == ['Head', 'Shou', 'Elb', 'Wri', 'Hip', 'Knee', 'Ankl', 'Total']
        assert table.loc['AP', 'Total'] == 1.0
        assert table.loc['MOTA', 'Total'] == 1.0
        assert table.loc['GT', 'Hip'] == 3.0
        assert report.to_dict()['columns'][-1] == 'Total'
