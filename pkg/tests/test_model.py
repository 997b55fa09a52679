import math

import numpy as np
import pytest

from killspec.core import benchmarks
from killspec.core.errors import ConfigError, ModelError
from killspec.core.store import canonical_json
from killspec.entities.grid import build_grid
from killspec.entities.model import build_model

TWO_PI = 2.0 * math.pi


def test_ultrastatic_circle_defaults() -> None:
    model = build_model(benchmarks.ultrastatic_circle())
    assert model.dim == 1
    assert model.dim_spacetime == 2
    assert model.torus_lengths == (TWO_PI,)
    assert model.lapse.constant_value() == 1.0
    assert not model.has_shift
    assert model.is_constant_coefficient


def test_dimension_below_two_rejected() -> None:
    config = benchmarks.ultrastatic_circle()
    config['n'] = 1
    with pytest.raises(ConfigError) as info:
        build_model(config)
    assert info.value.pointer == '/model/n'


def test_unknown_family_and_key() -> None:
    with pytest.raises(ConfigError) as info:
        build_model({'n': 2, 'family': 'kerr'})
    assert info.value.pointer == '/model/family'

    with pytest.raises(ConfigError) as info:
        build_model({'n': 2, 'family': 'ultrastatic', 'lapse': 2.0})
    assert info.value.pointer == '/model/lapse'


def test_lengths_must_match_dimension() -> None:
    with pytest.raises(ConfigError) as info:
        build_model({'n': 3, 'family': 'ultrastatic', 'lengths': [TWO_PI]})
    assert info.value.pointer == '/model/lengths'


def test_spacelike_killing_field_rejected() -> None:
    config = benchmarks.shifted_circle(b=1.2)
    with pytest.raises(ModelError) as info:
        build_model(config)
    assert info.value.pointer == '/model/shift'
    assert info.value.exit_code == 2


def test_lapse_must_stay_positive() -> None:
    config = {'n': 2, 'family': 'generic', 'lapse': '0.5 + cos(x1)'}
    with pytest.raises(ModelError):
        build_model(config)


def test_metric_must_be_symmetric_and_definite() -> None:
    with pytest.raises(ModelError):
        build_model({'n': 3, 'family': 'generic', 'metric': [[1.0, 0.2], [0.3, 1.0]]})
    with pytest.raises(ModelError):
        build_model({'n': 3, 'family': 'generic', 'metric': [[1.0, 2.0], [2.0, 1.0]]})


def test_static_conformal_metric_is_lapse_squared() -> None:
    model = build_model(benchmarks.static_conformal())
    grid = build_grid(model.torus_lengths, [16])
    N = model.lapse.value(grid.mesh)
    assert np.allclose(model.metric(grid.mesh)[0, 0], N ** 2)


def test_ppwave_quotient_coefficients() -> None:
    model = build_model(benchmarks.ppwave(), [16, 16])
    assert model.family == 'ppwave'
    assert model.dim_spacetime == 3
    assert model.torus_lengths == (TWO_PI, TWO_PI)
    pts = np.array([[0.4], [0.0]])
    H = 1.3
    alpha = 1.5
    assert model.lapse.value(pts)[0] == pytest.approx(alpha / math.sqrt(2 * alpha - H))
    assert model.shift_covector(pts)[0, 0] == pytest.approx(alpha - H)
    assert model.metric(pts)[0, 0, 0] == pytest.approx(2 * alpha - H)
    assert model.metric(pts)[1, 1, 0] == pytest.approx(1.0)


def test_ppwave_needs_spacelike_identification() -> None:
    config = benchmarks.ppwave()
    config['alpha'] = 0.6
    with pytest.raises(ModelError) as info:
        build_model(config)
    assert info.value.pointer == '/model/alpha'


def test_ppwave_profile_must_be_positive() -> None:
    config = benchmarks.ppwave()
    config['H'] = 'cos(y1)'
    with pytest.raises(ModelError):
        build_model(config)


@pytest.mark.parametrize('name', sorted(benchmarks.BENCHMARKS))
def test_every_benchmark_builds(name: str) -> None:
    model = build_model(benchmarks.BENCHMARKS[name]())
    assert model.name == name


def test_describe_is_canonical() -> None:
    first = build_model(benchmarks.lapse_well()).describe()
    second = build_model(benchmarks.lapse_well()).describe()
    assert canonical_json(first) == canonical_json(second)
    assert first['lapse'] == '1 + 0.1*cos(x2)'


def test_sampled_lapse_model() -> None:
    x = np.arange(32) * TWO_PI / 32
    config = {'n': 2, 'family': 'generic', 'lapse': {'grid': (1.0 + 0.1 * np.cos(x)).tolist()}}
    model = build_model(config, [32])
    assert model.lapse.value(np.array([[0.0]]))[0] == pytest.approx(1.1)
