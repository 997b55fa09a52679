import math

import numpy as np
import pytest

from killspec.core import benchmarks
from killspec.entities.grid import build_grid
from killspec.entities.model import build_model
from killspec.systems.geometry import (check_factorizability, lambda_cutoff, phase_space_volume, reduce_geometry,
                                       symplectic_residue, weyl_coefficient)

TWO_PI = 2.0 * math.pi


def _model_and_grid(config: dict, points):
    model = build_model(config, points)
    return model, build_grid(model.torus_lengths, points)


def test_ultrastatic_reduction_is_trivial() -> None:
    model, grid = _model_and_grid(benchmarks.ultrastatic_circle(), [16])
    geom = reduce_geometry(model, grid)
    assert np.allclose(geom.tilde_h_inverse, 1.0)
    assert np.allclose(geom.conformal_weight, 1.0)
    assert np.allclose(geom.reduced_potential_W, 0.0)
    assert np.allclose(geom.sqrt_det_tilde_h, 1.0)


def test_two_dimensional_conformal_model_reduces_to_flat() -> None:
    model, grid = _model_and_grid(benchmarks.static_conformal(), [32])
    geom = reduce_geometry(model, grid)
    assert np.allclose(geom.tilde_h_inverse, 1.0)
    assert np.allclose(geom.reduced_potential_W, 0.0, atol=1e-10)


def test_shifted_circle_reduced_metric() -> None:
    model, grid = _model_and_grid(benchmarks.shifted_circle(0.3), [16])
    geom = reduce_geometry(model, grid)
    assert np.allclose(geom.tilde_h_inverse, 1.0 - 0.09)
    assert np.allclose(geom.shift_vector, 0.3)


def test_weyl_coefficients_of_circles() -> None:
    model, grid = _model_and_grid(benchmarks.ultrastatic_circle(), [32])
    assert phase_space_volume(model, grid) == pytest.approx(4.0 * math.pi, rel=1e-12)
    assert weyl_coefficient(model, grid) == pytest.approx(2.0, rel=1e-12)

    model, grid = _model_and_grid(benchmarks.shifted_circle(0.3), [32])
    assert weyl_coefficient(model, grid) == pytest.approx(2.0 / (1.0 - 0.09), rel=1e-12)


def test_flat_two_torus_weyl_coefficient() -> None:
    model, grid = _model_and_grid(benchmarks.ultrastatic_torus(), [16, 16])
    assert weyl_coefficient(model, grid) == pytest.approx(math.pi, rel=1e-12)


@pytest.mark.parametrize('factory', [benchmarks.lapse_well, benchmarks.static_conformal_torus,
                                     benchmarks.non_killing_shift])
def test_residue_is_dimension_times_volume(factory) -> None:
    model, grid = _model_and_grid(factory(), [32])
    expected = (model.dim_spacetime - 1) * phase_space_volume(model, grid)
    assert symplectic_residue(model, grid) == pytest.approx(expected, rel=1e-10)


def test_cutoff_of_ultrastatic_circle() -> None:
    model, grid = _model_and_grid(benchmarks.ultrastatic_circle(), [64])
    assert lambda_cutoff(model, grid) == pytest.approx(32.0 / 3.0)


def test_cutoff_shrinks_with_shift() -> None:
    model, grid = _model_and_grid(benchmarks.shifted_circle(0.3), [64])
    assert lambda_cutoff(model, grid) == pytest.approx(0.7 * 32.0 / 3.0)


def test_factorizability() -> None:
    model, grid = _model_and_grid(benchmarks.shifted_circle(), [32])
    report = check_factorizability(model, grid)
    assert report['is_factorizable']
    assert report['defect'] < 1e-12

    model, grid = _model_and_grid(benchmarks.non_killing_shift(), [32, 32])
    report = check_factorizability(model, grid)
    assert not report['is_factorizable']
    assert report['defect'] > 1e-3
