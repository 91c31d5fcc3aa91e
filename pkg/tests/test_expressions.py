import numpy as np
import pytest

from viscofrac.expressions import Expression, ExpressionError, VectorExpression

P = np.array([[0.0, 0.0], [0.5, 1.0], [1.0, -2.0]])


def test_arithmetic_matches_python():
    e = Expression("2*x - y/4 + -(x*y) + 1")
    want = [2 * x - y / 4 - x * y + 1 for x, y in P]
    np.testing.assert_allclose(e(P), want)


def test_min_max_with_many_arguments():
    e = Expression("max(0, min(x, 0.75, y))")
    np.testing.assert_allclose(e(P), [0.0, 0.5, 0.0])


def test_constant():
    e = Expression(3)
    assert e.constant == 3.0
    np.testing.assert_allclose(e(P), 3.0)
    assert not hasattr(Expression("x"), "constant")


@pytest.mark.parametrize("src", ["x**2", "__import__('os')", "sin(x)", "max(x)", "z", "x if y else 1",
                                 "min(x, y, key=1)", "True", "'a'", "x ="])
def test_rejected(src):
    with pytest.raises(ExpressionError):
        Expression(src)


def test_non_string_rejected():
    with pytest.raises(ExpressionError):
        Expression([1, 2])


def test_vector():
    v = VectorExpression(["0", "2*y - 1"])
    np.testing.assert_allclose(v(P), [[0, -1], [0, 1], [0, -5]])
    with pytest.raises(ExpressionError):
        VectorExpression(["x"])
