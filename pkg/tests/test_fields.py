"""
Tests for cutfem symbolic fields
"""

import numpy as np
import pytest
import sympy
from src.cutfem.fields import Field, FieldError, T, X, Y, as_field


def test_evaluate_with_derivatives():
    """Test values and partial derivatives on arrays."""
    u = Field(X**3 * Y + sympy.sin(Y))
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(u(x, y), x**3 * y + np.sin(y))
    np.testing.assert_allclose(u(x, y, (1, 0)), 3 * x**2 * y)
    np.testing.assert_allclose(u(x, y, (2, 1)), 6 * x)
    np.testing.assert_allclose(u(x, y, (0, 2)), -np.sin(y))


def test_constant_broadcasts():
    """Test that constants expand to the point shape."""
    c = Field.constant(4.0)
    values = c(np.zeros((3, 2)), np.zeros((3, 2)))
    assert values.shape == (3, 2)
    assert np.all(values == 4.0)
    assert np.all(c(np.zeros(3), np.zeros(3), (1, 0)) == 0.0)


def test_polynomial():
    """Test the shifted and scaled polynomial constructor."""
    u = Field.polynomial([[1.0, 0.0], [0.0, 2.0]], center=(1.0, 1.0), scale=0.5)
    # 1 + 2 * ((x - 1)/0.5) * ((y - 1)/0.5)
    assert float(u(2.0, 1.5)) == pytest.approx(1.0 + 2.0 * 2.0 * 1.0)
    assert float(u(2.0, 1.5, (1, 1))) == pytest.approx(8.0)


def test_laplacian_and_time():
    """Test the Laplacian and freezing the time variable."""
    u = Field(sympy.exp(-T) * (X**2 + Y**2))
    assert u.time_dependent
    lap = u.laplacian().at(0.0)
    assert not lap.time_dependent
    assert float(lap(0.3, 0.7)) == pytest.approx(4.0)
    assert float(u(1.0, 0.0, time=1.0)) == pytest.approx(np.exp(-1.0))
    assert float(u.diff(rt=1).at(0.0)(1.0, 1.0)) == pytest.approx(-2.0)


def test_arithmetic():
    """Test sums, differences and products of fields and numbers."""
    u = Field(X)
    v = Field(Y)
    w = 2 * u - v + 1.0
    assert float(w(1.0, 3.0)) == pytest.approx(0.0)
    assert float((-(u * v))(2.0, 3.0)) == pytest.approx(-6.0)
    assert float((1.0 - u)(0.25, 0.0)) == pytest.approx(0.75)


def test_as_field():
    """Test coercion of numbers and None."""
    assert float(as_field(None)(0.0, 0.0)) == 0.0
    assert float(as_field(3)(0.0, 0.0)) == 3.0
    with pytest.raises(FieldError):
        as_field("x")


def test_errors():
    """Test unknown symbols, negative orders and non-finite values."""
    with pytest.raises(FieldError):
        Field(sympy.Symbol('z') * X)
    with pytest.raises(FieldError):
        Field(X)(0.0, 0.0, (-1, 0))
    with pytest.raises(FieldError):
        Field(1 / X)(np.array([0.0]), np.array([1.0]))
