import math

import numpy as np
import pytest

from latticewaves.errors import ExpressionError
from latticewaves.expr import compile_expr


def test_power_binds_tighter_than_unary_minus():
    f = compile_expr("exp(-z^2)", var="z")
    assert f(2.0) == pytest.approx(math.exp(-4.0))


def test_vectorised_and_constants():
    f = compile_expr("1 - 0.65*sin(2*pi*x)")
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(f(x), 1 - 0.65 * np.sin(2 * np.pi * x), rtol=0, atol=1e-15)


def test_constant_expression_broadcasts():
    assert compile_expr("2*e")(np.zeros(3)).shape == (3,)


def test_aliases():
    f = compile_expr("xi + 1", var=("x", "xi"))
    assert f(1.0) == 2.0


@pytest.mark.parametrize("bad", ["__import__('os')", "x.real", "foo(x)", "y + 1", "x +", "sin(x, x)"])
def test_rejects_unsafe_or_invalid(bad):
    with pytest.raises(ExpressionError):
        compile_expr(bad)
