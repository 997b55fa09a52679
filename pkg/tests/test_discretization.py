import math

import numpy as np
import pytest

from killspec.core import benchmarks
from killspec.core.errors import ArtifactError, ConfigError
from killspec.entities.grid import build_grid
from killspec.entities.model import build_model
from killspec.systems.discretization import (assemble_operators, dealias, diff_matrices, dump_matrices,
                                             fourier_diff_matrix, high_pass, load_matrices, operator_defects,
                                             spectral_derivative, tail_fraction)
from killspec.systems.geometry import reduce_geometry

TWO_PI = 2.0 * math.pi


def test_diff_matrix_is_exact_on_trigonometric_polynomials() -> None:
    L = 3.0
    M = 16
    x = np.arange(M) * L / M
    D = fourier_diff_matrix(M, L)
    k = 2.0 * math.pi * 5 / L
    assert np.allclose(D @ np.sin(k * x), k * np.cos(k * x), atol=1e-10)
    assert np.allclose(D, -D.T)


def test_diff_matrix_annihilates_nyquist_mode() -> None:
    D = fourier_diff_matrix(16, TWO_PI)
    assert np.allclose(D @ (-1.0) ** np.arange(16), 0.0, atol=1e-12)
    assert np.allclose(D @ np.ones(16), 0.0, atol=1e-12)


@pytest.mark.parametrize('M', [7, 6, 0])
def test_diff_matrix_rejects_bad_sizes(M: int) -> None:
    with pytest.raises(ConfigError):
        fourier_diff_matrix(M, TWO_PI)


def test_grid_sizes_are_validated() -> None:
    with pytest.raises(ConfigError) as info:
        build_grid([TWO_PI, TWO_PI], [16, 15])
    assert info.value.pointer == '/grid/1'
    with pytest.raises(ConfigError):
        build_grid([TWO_PI], [16, 16])
    assert build_grid([TWO_PI, TWO_PI], [8]).shape == (8, 8)


def test_kronecker_derivatives_on_torus() -> None:
    grid = build_grid([TWO_PI, TWO_PI], [8, 12])
    x, y = grid.mesh
    f = np.sin(x) * np.cos(2 * y)
    dx, dy = diff_matrices(grid)
    assert np.allclose(dx @ f.ravel(), (np.cos(x) * np.cos(2 * y)).ravel(), atol=1e-10)
    assert np.allclose(dy @ f.ravel(), (-2 * np.sin(x) * np.sin(2 * y)).ravel(), atol=1e-10)
    assert np.allclose(spectral_derivative(f, grid, 1), -2 * np.sin(x) * np.sin(2 * y), atol=1e-10)


def test_tail_fraction_and_high_pass() -> None:
    grid = build_grid([TWO_PI], [16])
    x = grid.mesh[0]
    assert tail_fraction(np.cos(2 * x), grid) == pytest.approx(0.0, abs=1e-20)
    assert tail_fraction(np.cos(7 * x), grid) == pytest.approx(1.0)
    mixed = np.cos(x) + np.cos(7 * x)
    assert tail_fraction(mixed, grid) == pytest.approx(0.5)
    tail = high_pass(mixed[:, None], grid)[:, 0]
    assert np.allclose(tail, np.cos(7 * x), atol=1e-12)


def test_dealias_truncates_upper_third() -> None:
    grid = build_grid([TWO_PI], [24])
    x = grid.mesh[0]
    assert np.allclose(dealias(np.cos(3 * x) + np.cos(11 * x), grid), np.cos(3 * x), atol=1e-12)


def test_ultrastatic_pencil_blocks() -> None:
    model = build_model(benchmarks.ultrastatic_circle(), [16])
    mats = assemble_operators(model, reduce_geometry(model, build_grid(model.torus_lengths, [16])))
    assert mats.x_vanishes
    D = fourier_diff_matrix(16, TWO_PI)
    assert np.allclose(mats.P, -D @ D)
    defects = operator_defects(mats)
    assert defects['P'] < 1e-12
    assert defects['X'] == 0.0


def test_shifted_blocks_are_adjoint_in_weights(well_problem) -> None:
    _, mats, _ = well_problem
    defects = operator_defects(mats)
    assert defects['P'] < 1e-10
    assert defects['X'] == 0.0


def test_shift_makes_x_skew_adjoint(shifted_problem) -> None:
    _, mats, _ = shifted_problem
    assert not mats.x_vanishes
    assert np.allclose(mats.X, -mats.weighted_adjoint(mats.X), atol=1e-12)
    assert np.allclose(mats.q2, np.diag(np.diag(mats.q2)))


def test_matrix_dump_layout(tmp_path, shifted_problem) -> None:
    _, mats, _ = shifted_problem
    path = tmp_path / 'mats.bin'
    dump_matrices(mats, path)
    raw = path.read_bytes()
    assert raw[:4] == b'KSPM'
    assert len(raw) == 4 + 4 * 4 + 4 * 16 * mats.size ** 2
    blocks = load_matrices(path, (TWO_PI,))
    assert blocks['points_per_axis'] == (64,)
    for name in ('P', 'X', 'q1', 'q2'):
        assert np.array_equal(blocks[name], getattr(mats, name))


def test_load_rejects_foreign_files(tmp_path) -> None:
    with pytest.raises(ArtifactError):
        load_matrices(tmp_path / 'missing.bin')
    bogus = tmp_path / 'bogus.bin'
    bogus.write_bytes(b'NOPE' + bytes(32))
    with pytest.raises(ArtifactError):
        load_matrices(bogus)
