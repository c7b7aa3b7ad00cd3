"""
Тесты KE, ординальных карт и SVF
"""
import math

import numpy as np
import pytest

from app.autodiff import Tape, finite_difference_check
from app.core.errors import InvalidInputError
from app.core.grid import GridShape, ScalarField, VectorField2
from app.spatial.embedding import (
    OrderRelation,
    aux_ordinal_loss,
    aux_total_loss,
    decode_sie,
    ground_truth_order,
    pull_loss,
    push_loss,
    reference_embeddings,
    svf_loss,
)

from conftest import make_pose


def _field(shape, points):
    """Скалярное поле с заданными значениями в точках"""
    values = np.zeros(shape.array_shape)
    for (x, y), v in points.items():
        values[y, x] = v
    return ScalarField(shape, values)


class TestKeypointEmbedding:
    """Тесты pull/push лоссов"""

    def test_pull_zero_when_constant(self):
        """Тест: одно значение на человека → pull 0"""
        shape = GridShape(10, 10)
        ke = _field(shape, {(1, 1): 2.0, (2, 2): 2.0, (7, 7): 5.0, (8, 8): 5.0})
        poses = [make_pose([(1, 1), (2, 2)]), make_pose([(7, 7), (8, 8)])]
        assert pull_loss(ke, poses).item() == pytest.approx(0.0)

    def test_pull_hand_example(self):
        """Тест: K=1, значения 1 и 3 → референс 2, pull 1.0"""
        shape = GridShape(4, 4)
        ke = _field(shape, {(0, 0): 1.0, (3, 3): 3.0})
        poses = [make_pose([(0, 0), (3, 3)])]
        assert reference_embeddings(ke, poses) == pytest.approx([2.0])
        assert pull_loss(ke, poses).item() == pytest.approx(1.0)

    def test_pull_gradient(self):
        """Тест градиента pull: (1/(J·K))·2·(m − m̄)·(1 − 1/J)"""
        shape = GridShape(4, 4)
        ke = _field(shape, {(0, 0): 1.0, (3, 3): 3.0})
        poses = [make_pose([(0, 0), (3, 3)])]
        tape = Tape()
        leaf = tape.leaf(ke.values)
        tape.backward(pull_loss(leaf, poses, tape))
        assert leaf.grad[0, 0] == pytest.approx(-1.0)
        assert leaf.grad[3, 3] == pytest.approx(1.0)

    def test_push_equal_references(self):
        """Тест: равные референсы, K=2 → 1.0"""
        shape = GridShape(6, 6)
        poses = [make_pose([(1, 1)]), make_pose([(4, 4)])]
        assert push_loss(ScalarField.zeros(shape), poses).item() == pytest.approx(1.0)

    def test_push_far_references(self):
        """Тест: референсы 0 и 1000 → 0.5"""
        shape = GridShape(6, 6)
        ke = _field(shape, {(4, 4): 1000.0})
        poses = [make_pose([(1, 1)]), make_pose([(4, 4)])]
        assert push_loss(ke, poses).item() == pytest.approx(0.5)

    def test_push_single_person(self):
        """Тест: K=1 → 1.0, градиент 0"""
        shape = GridShape(4, 4)
        tape = Tape()
        leaf = tape.leaf(np.arange(16.0).reshape(4, 4))
        loss = push_loss(leaf, [make_pose([(1, 1), (2, 2)])], tape)
        tape.backward(loss)
        assert loss.item() == pytest.approx(1.0)
        assert not np.any(leaf.grad)

    def test_no_people(self):
        """Тест: K=0 → 0"""
        ke = ScalarField.zeros(GridShape(4, 4))
        assert pull_loss(ke, []).item() == 0.0
        assert push_loss(ke, []).item() == 0.0

    def test_keypoint_outside_grid(self):
        """Тест: сустав вне сетки → ошибка"""
        with pytest.raises(InvalidInputError):
            pull_loss(ScalarField.zeros(GridShape(4, 4)), [make_pose([(9, 1)])])


class TestOrdinal:
    """Тесты порядковых отношений и вспомогательного лосса"""

    def test_left_to_right(self, tiny_skeleton):
        """Тест: центры x = 2 и 8 → Ord(1,2)=+1, Ord(2,1)=−1"""
        poses = [make_pose([(2, 0), (2, 4), (2, 8)]), make_pose([(8, 0), (8, 4), (8, 8)])]
        ord_l2r = ground_truth_order(poses, OrderRelation.L2R, tiny_skeleton)
        assert ord_l2r.tolist() == [[0, 1], [-1, 0]]
        ord_r2l = ground_truth_order(poses, OrderRelation.R2L, tiny_skeleton)
        assert ord_r2l.tolist() == [[0, -1], [1, 0]]

    def test_far_to_near(self, tiny_skeleton):
        """Тест: меньшая голова (дальше) идёт первой"""
        near = make_pose([(2, 0), (2, 25), (2, 40)])
        far = make_pose([(8, 10), (8, 14), (8, 20)])
        ord_f2n = ground_truth_order([near, far], OrderRelation.F2N, tiny_skeleton)
        assert ord_f2n[1, 0] == 1
        assert ord_f2n[0, 1] == -1

    def test_ties_by_index(self, tiny_skeleton):
        """Тест: при равенстве ключей первым идёт меньший индекс"""
        poses = [make_pose([(5, 0), (5, 2), (5, 4)]), make_pose([(5, 10), (5, 12), (5, 14)])]
        assert ground_truth_order(poses, OrderRelation.L2R, tiny_skeleton)[0, 1] == 1
        assert ground_truth_order(poses, OrderRelation.R2L, tiny_skeleton)[0, 1] == 1

    def test_equal_references_log2(self):
        """Тест: равные референсы, K=2 → (1/4)·2·log 2"""
        poses = [make_pose([(1, 1)]), make_pose([(4, 4)])]
        ord_matrix = np.array([[0, 1], [-1, 0]])
        loss = aux_ordinal_loss(ScalarField.zeros(GridShape(6, 6)), poses, ord_matrix)
        assert loss.item() == pytest.approx(0.5 * math.log(2.0), abs=1e-6)
        assert loss.item() == pytest.approx(0.346574, abs=1e-6)

    def test_saturates_for_correct_order(self):
        """Тест: правильный порядок с большим отрывом → почти 0"""
        shape = GridShape(6, 6)
        aux = _field(shape, {(1, 1): -50.0, (4, 4): 50.0})
        poses = [make_pose([(1, 1)]), make_pose([(4, 4)])]
        loss = aux_ordinal_loss(aux, poses, np.array([[0, 1], [-1, 0]]))
        assert loss.item() < 1e-20

    def test_single_person_keeps_pull(self):
        """Тест: K=1 → только pull"""
        shape = GridShape(4, 4)
        aux = _field(shape, {(0, 0): 1.0, (3, 3): 3.0})
        loss = aux_ordinal_loss(aux, [make_pose([(0, 0), (3, 3)])], np.zeros((1, 1)))
        assert loss.item() == pytest.approx(1.0)

    def test_total_gradient(self, tiny_skeleton):
        """Тест градиента суммарного лосса по шести картам на 8×8"""
        rng = np.random.default_rng(11)
        poses = [make_pose([(1, 1), (1, 3), (2, 5)]), make_pose([(6, 2), (6, 3), (5, 6)])]

        def f(tape, x):
            return aux_total_loss([x[i] for i in range(6)], poses, tiny_skeleton, tape)

        report = finite_difference_check(f, rng.normal(size=(6, 8, 8)))
        assert report.max_relative_error < 1e-4


class TestSpatialVectorField:
    """Тесты SVF и декодирования SIE"""

    def test_exact_field_is_zero(self):
        """Тест: точное поле → 0"""
        shape = GridShape(4, 4)
        values = np.zeros((4, 4, 2))
        values[0, 0] = (-1, -1)
        values[2, 2] = (1, 1)
        poses = [make_pose([(0, 0), (2, 2)])]
        assert svf_loss(VectorField2(shape, values), poses).item() == 0.0

    def test_one_component_off(self):
        """Тест: одна компонента сдвинута на 1 → 1/2"""
        shape = GridShape(4, 4)
        values = np.zeros((4, 4, 2))
        values[0, 0] = (0, -1)
        values[2, 2] = (1, 1)
        poses = [make_pose([(0, 0), (2, 2)])]
        assert svf_loss(VectorField2(shape, values), poses).item() == pytest.approx(0.5)

    def test_decode_sie(self):
        """Тест: Ŝ(10,20) = (3,−4) → S = (7,24)"""
        svf = VectorField2.zeros(GridShape(16, 32)).with_value(10, 20, (3.0, -4.0))
        sie = decode_sie(svf)
        assert sie.at(10, 20) == (7.0, 24.0)
        assert sie.at(0, 5) == (0.0, 5.0)

    def test_ground_truth_decodes_to_center(self):
        """Тест: точное SVF → SIE равно центру на всех суставах"""
        shape = GridShape(12, 12)
        pose = make_pose([(2, 3), (4, 7), (6, 8)])
        center = pose.center()
        values = np.zeros((12, 12, 2))
        for x, y in ((2, 3), (4, 7), (6, 8)):
            values[y, x] = (x - center[0], y - center[1])
        sie = decode_sie(VectorField2(shape, values))
        for x, y in ((2, 3), (4, 7), (6, 8)):
            assert sie.at(x, y) == pytest.approx(tuple(center))
