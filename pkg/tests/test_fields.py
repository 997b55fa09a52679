import math

import numpy as np
import pytest

from killspec.core.errors import ConfigError, ModelError
from killspec.entities.fields import ConstantField, ExpressionField, SampledField, make_field

TWO_PI = 2.0 * math.pi


def _points(*axes: np.ndarray) -> np.ndarray:
    return np.stack(np.meshgrid(*axes, indexing='ij'))


def test_number_becomes_constant_field() -> None:
    field = make_field(2.5, [TWO_PI], '/model/lapse')
    assert isinstance(field, ConstantField)
    values = field.value(_points(np.linspace(0.0, 1.0, 5)))
    assert values.shape == (5,)
    assert np.all(values == 2.5)
    assert np.all(field.grad(_points(np.linspace(0.0, 1.0, 5))) == 0.0)


def test_numeric_expression_collapses_to_constant() -> None:
    field = make_field('1 + sqrt(4)', [TWO_PI], '/model/lapse')
    assert isinstance(field, ConstantField)
    assert field.constant_value() == pytest.approx(3.0)


def test_expression_derivatives() -> None:
    field = make_field('1 + 0.2*cos(x1)', [TWO_PI], '/model/lapse')
    assert isinstance(field, ExpressionField)
    x = np.linspace(0.0, TWO_PI, 9, endpoint=False)
    pts = _points(x)
    assert np.allclose(field.value(pts), 1.0 + 0.2 * np.cos(x))
    assert np.allclose(field.grad(pts)[0], -0.2 * np.sin(x))
    assert np.allclose(field.hess(pts)[0, 0], -0.2 * np.cos(x))


def test_expression_on_two_torus_mixes_axes() -> None:
    field = make_field('sin(x1)*cos(x2)', [TWO_PI, TWO_PI], '/model/potential')
    pts = _points(np.array([0.3]), np.array([1.1]))
    hess = field.hess(pts)[:, :, 0, 0]
    assert hess[0, 1] == pytest.approx(-math.cos(0.3) * math.sin(1.1))
    assert hess[0, 1] == pytest.approx(hess[1, 0])


def test_unknown_name_reports_pointer() -> None:
    with pytest.raises(ConfigError) as info:
        make_field('cos(y)', [TWO_PI], '/model/lapse')
    assert info.value.pointer == '/model/lapse'
    assert 'y' in info.value.message


def test_unknown_function_rejected() -> None:
    with pytest.raises(ConfigError):
        make_field('tanh(x1)', [TWO_PI], '/model/lapse')


def test_non_periodic_expression_rejected() -> None:
    with pytest.raises(ModelError):
        make_field('1 + 0.1*x1', [TWO_PI], '/model/lapse')


def test_expression_period_must_match_torus() -> None:
    with pytest.raises(ModelError):
        make_field('cos(x1)', [3.0], '/model/lapse')


def test_booleans_are_not_numbers() -> None:
    with pytest.raises(ConfigError):
        make_field(True, [TWO_PI], '/model/lapse')


def test_sampled_field_interpolates_band_limited_data() -> None:
    x = np.arange(16) * TWO_PI / 16
    field = make_field({'grid': (1.0 + 0.3 * np.sin(2 * x)).tolist()}, [TWO_PI], '/model/lapse')
    assert isinstance(field, SampledField)
    sample = np.array([0.123, 1.7, 4.4])
    pts = _points(sample)
    assert np.allclose(field.value(pts), 1.0 + 0.3 * np.sin(2 * sample))
    assert np.allclose(field.grad(pts)[0], 0.6 * np.cos(2 * sample))
    assert np.allclose(field.hess(pts)[0, 0], -1.2 * np.sin(2 * sample))


def test_sampled_field_accepts_duplicated_endpoint() -> None:
    x = np.arange(17) * TWO_PI / 16
    field = SampledField(np.cos(x), [TWO_PI])
    assert field.shape == (16,)


def test_sampled_field_rejects_mismatched_endpoint() -> None:
    samples = np.cos(np.arange(17) * TWO_PI / 16)
    samples[-1] += 0.5
    with pytest.raises(ModelError):
        SampledField(samples, [TWO_PI])


def test_sampled_field_rejects_wrong_rank() -> None:
    with pytest.raises(ConfigError):
        make_field({'grid': [[1.0, 1.0], [1.0, 1.0]]}, [TWO_PI], '/model/lapse')
