import math

import numpy as np
import pytest

from app.autodiff import (
    Tape,
    absolute,
    analytic_gradient,
    exp,
    finite_difference_check,
    matmul,
    reduce_max,
    reduce_sum,
    square,
)
from app.core.errors import InvalidInputError


class TestTape:
    """Тесты записи операций и обратного прохода"""

    def test_exp_at_zero(self):
        """Тест exp(0) = 1 и производной 1"""
        tape = Tape()
        x = tape.leaf(0.0)
        y = exp(x)
        tape.backward(y)
        assert y.item() == 1.0
        assert x.grad == pytest.approx(1.0)

    def test_sum_gradient(self):
        """Тест суммы: значение 6, градиент из единиц"""
        tape = Tape()
        x = tape.leaf([1.0, 2.0, 3.0])
        y = reduce_sum(x)
        tape.backward(y)
        assert y.item() == 6.0
        np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    def test_root_is_leaf(self):
        """Тест корня, совпадающего с листом"""
        tape = Tape()
        x = tape.leaf(2.5)
        tape.backward(x)
        assert x.grad == pytest.approx(1.0)

    def test_composite_gaussian(self):
        """Тест f(x) = exp(−x²/2) в точке 1"""
        tape = Tape()
        x = tape.leaf(1.0)
        tape.backward(exp(square(x) * -0.5))
        assert x.grad == pytest.approx(-math.exp(-0.5), abs=1e-12)

    def test_non_scalar_root_rejected(self):
        """Тест: нескалярный корень отклоняется"""
        tape = Tape()
        x = tape.leaf([1.0, 2.0])
        with pytest.raises(InvalidInputError):
            tape.backward(x * 2.0)

    def test_mixing_tapes_rejected(self):
        """Тест: операнды с разных лент"""
        a = Tape().leaf(1.0)
        b = Tape().leaf(2.0)
        with pytest.raises(InvalidInputError):
            a + b

    def test_max_picks_first_maximum(self):
        """Тест: градиент max уходит в первый максимальный элемент"""
        tape = Tape()
        x = tape.leaf([3.0, 1.0, 3.0])
        tape.backward(reduce_max(x))
        np.testing.assert_array_equal(x.grad, [1.0, 0.0, 0.0])

    def test_backward_is_deterministic(self):
        """Тест: два обратных прохода дают одинаковые градиенты"""
        tape = Tape()
        x = tape.leaf(np.random.default_rng(0).normal(size=(3, 3)))
        root = reduce_sum(exp(x) * x)
        first = dict(tape.backward(root))
        second = dict(tape.backward(root))
        for key in first:
            np.testing.assert_array_equal(first[key], second[key])

    def test_gather_accumulates_repeats(self):
        """Тест: повторные индексы суммируют градиент"""
        tape = Tape()
        x = tape.leaf([1.0, 2.0, 3.0])
        tape.backward(reduce_sum(x[np.array([0, 0, 2])]))
        np.testing.assert_array_equal(x.grad, [2.0, 0.0, 1.0])


class TestFiniteDifferences:
    """Тесты проверки градиентов конечными разностями"""

    def test_matmul_2x2(self):
        """Тест градиента матричного произведения"""
        b = np.array([[1.0, -2.0], [0.5, 3.0]])

        def f(tape, x):
            return reduce_sum(square(matmul(x, b)))

        report = finite_difference_check(f, np.array([[0.3, -1.2], [2.0, 0.7]]))
        assert report.max_relative_error < 1e-6

    def test_linear_function_exact(self):
        """Тест: линейная функция проверяется без ошибки"""
        w = np.array([1.0, -2.0, 3.0])

        def f(tape, x):
            return reduce_sum(x * w)

        report = finite_difference_check(f, np.array([0.1, 0.2, 0.3]))
        assert report.max_relative_error < 1e-8
        assert report.excluded == []

    def test_l1_kink_excluded(self):
        """Тест: излом ℓ1 в нуле исключается из проверки"""

        def f(tape, x):
            return reduce_sum(absolute(x))

        report = finite_difference_check(f, np.array([0.0, 1.5, -2.0]))
        assert report.excluded == [0]
        assert report.passed()
        assert analytic_gradient(f, np.array([0.0]))[0] == 0.0

    def test_linearity_of_gradients(self):
        """Тест: градиент суммы равен сумме градиентов"""
        x = np.random.default_rng(1).normal(size=4)

        def f(tape, v):
            return reduce_sum(exp(v))

        def g(tape, v):
            return reduce_sum(square(v))

        def fg(tape, v):
            return f(tape, v) + g(tape, v)

        np.testing.assert_allclose(analytic_gradient(fg, x),
                                   analytic_gradient(f, x) + analytic_gradient(g, x))

    def test_step_must_be_positive(self):
        """Тест: неположительный шаг отклоняется"""
        with pytest.raises(InvalidInputError):
            finite_difference_check(lambda tape, x: reduce_sum(x), np.zeros(2), step=0.0)
