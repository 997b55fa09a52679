"""Shared benchmark models and small discretizations"""

from typing import Tuple

import pytest

from killspec.core import benchmarks
from killspec.entities.grid import build_grid
from killspec.entities.matrices import OperatorMatrices
from killspec.entities.model import StationaryModel, build_model
from killspec.entities.spectrum import SpectrumResult
from killspec.systems.discretization import assemble_operators
from killspec.systems.geometry import lambda_cutoff, reduce_geometry
from killspec.systems.pencil import SolverOptions, solve_spectrum

Problem = Tuple[StationaryModel, OperatorMatrices, SpectrumResult]


def solve_benchmark(config: dict, points, route: str = 'auto') -> Problem:
    model = build_model(config, points)
    grid = build_grid(model.torus_lengths, points)
    mats = assemble_operators(model, reduce_geometry(model, grid))
    spectrum = solve_spectrum(mats, SolverOptions(cutoff=lambda_cutoff(model, grid), route=route))
    return model, mats, spectrum


@pytest.fixture(scope='session')
def circle_problem() -> Problem:
    return solve_benchmark(benchmarks.ultrastatic_circle(), [64])


@pytest.fixture(scope='session')
def shifted_problem() -> Problem:
    return solve_benchmark(benchmarks.shifted_circle(), [64])


@pytest.fixture(scope='session')
def conformal_problem() -> Problem:
    return solve_benchmark(benchmarks.static_conformal(), [32])


@pytest.fixture(scope='session')
def well_problem() -> Problem:
    return solve_benchmark(benchmarks.lapse_well(), [16, 16])


@pytest.fixture(scope='session')
def lapse_well_model() -> StationaryModel:
    return build_model(benchmarks.lapse_well())


@pytest.fixture(scope='session')
def ppwave_model() -> StationaryModel:
    return build_model(benchmarks.ppwave(), [16, 16])


@pytest.fixture(scope='session')
def solve():
    return solve_benchmark
