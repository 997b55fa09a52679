import math

import numpy as np
import pytest

from killspec.core import benchmarks
from killspec.core.errors import ConfigError
from killspec.entities.model import build_model
from killspec.systems.ppwave import (base_grid, base_laplacian, constant_mode_family, ppwave_branch_solve,
                                     ppwave_critical_det, ppwave_critical_periods, ppwave_cutoff,
                                     ppwave_mechanical_orbit, ppwave_period_conditions, ppwave_spectrum,
                                     ppwave_xline_periods, reduced_pencil_eigs, reduced_potential)

TWO_PI = 2.0 * math.pi


def test_constant_family_values(ppwave_model) -> None:
    pp = ppwave_model.ppwave
    assert np.allclose(constant_mode_family(pp, [-2, 0, 3]), [2.0, 0.0, -3.0])


def test_reduced_potential_vanishes_on_constant_family(ppwave_model) -> None:
    pp = ppwave_model.ppwave
    H = pp.profile_H.value(base_grid(pp, 16).mesh).ravel()
    for m, lam in zip([-1, 2], constant_mode_family(pp, [-1, 2])):
        assert np.allclose(reduced_potential(pp, H, lam, m), 0.0, atol=1e-12)


@pytest.mark.parametrize('m', [-3, -1, 1, 4])
def test_constant_family_is_a_pencil_root(ppwave_model, m: int) -> None:
    pp = ppwave_model.ppwave
    values, _ = reduced_pencil_eigs(pp, m, 32)
    assert np.min(np.abs(values + TWO_PI * m / pp.period_L)) < 1e-9


def test_branch_roots_confirmed_by_pencil(ppwave_model) -> None:
    pp = ppwave_model.ppwave
    scan = ppwave_branch_solve(pp, 0, (0.25, 4.0), points=32)
    assert scan.roots
    assert scan.sign_changes >= len(scan.roots)
    assert len(scan.confirmation_defects) == len(scan.roots)
    assert max(scan.confirmation_defects) < 1e-6
    assert len(scan.smallest_eigenvalue) == 400


def test_branch_solve_needs_a_bracket(ppwave_model) -> None:
    with pytest.raises(ConfigError):
        ppwave_branch_solve(ppwave_model.ppwave, 0, (2.0, 1.0))


def test_union_spectrum_over_floquet_indices(ppwave_model) -> None:
    pp = ppwave_model.ppwave
    spectrum = ppwave_spectrum(pp, 16)
    cutoff = ppwave_cutoff(pp, 16)
    assert spectrum.route == 'ppwave_reduced'
    assert spectrum.cutoff == pytest.approx(cutoff)
    assert cutoff == pytest.approx(8.0 / 3.0 * math.sqrt(0.7))
    trusted = np.array([m.lam for m in spectrum.trusted_modes])
    for lam in (-2.0, -1.0, 1.0, 2.0):
        assert np.min(np.abs(trusted - lam)) < 1e-9
    assert len(spectrum.diagnostics['floquet_index']) == len(spectrum.modes)
    report = spectrum.symmetry_report
    assert report['reflection_defect'] < 1e-7
    assert report['conjugation_defect'] < 1e-7


def test_small_libration_period(ppwave_model) -> None:
    pp = ppwave_model.ppwave
    orbit = ppwave_mechanical_orbit(pp, math.pi, 0.01)
    assert orbit.kind == 'libration'
    assert orbit.period == pytest.approx(TWO_PI / math.sqrt(0.15), rel=1e-3)
    assert orbit.trajectory.shape == (2, 257)


def test_rotation_completes_a_lap(ppwave_model) -> None:
    pp = ppwave_model.ppwave
    orbit = ppwave_mechanical_orbit(pp, 0.0, 2.0)
    assert orbit.kind == 'rotation'
    assert orbit.trajectory[0, -1] == pytest.approx(TWO_PI, abs=1e-8)
    assert 0.0 < orbit.period < math.pi


def test_degenerate_line_periods(ppwave_model) -> None:
    pp = ppwave_model.ppwave
    assert ppwave_xline_periods(pp, 20.0) == pytest.approx([TWO_PI, 2 * TWO_PI, 3 * TWO_PI])
    assert ppwave_critical_periods(pp, 0.0) == pytest.approx(TWO_PI * (3.0 - 1.3) / 1.3)


def test_critical_det_needs_a_critical_point(ppwave_model) -> None:
    with pytest.raises(ConfigError):
        ppwave_critical_det(ppwave_model.ppwave, 1.0)


def test_flat_profile_critical_lines_are_degenerate() -> None:
    config = benchmarks.ppwave()
    config['H'] = 1.0
    pp = build_model(config, [16, 16]).ppwave
    report = ppwave_critical_det(pp, 0.7)
    assert report['stability'] == 'degenerate'
    assert report['det_I_minus_P'] == pytest.approx(0.0, abs=1e-12)


def test_period_conditions_for_free_motion() -> None:
    config = benchmarks.ppwave()
    config['H'] = 1.0
    pp = build_model(config, [16, 16]).ppwave
    orbit = ppwave_mechanical_orbit(pp, 0.0, 2.0)
    assert orbit.period == pytest.approx(math.pi)
    assert orbit.action_defect == pytest.approx(-1.5 * math.pi)

    rows = ppwave_period_conditions(pp, orbit, max_repeat=4, t_max=30.0)
    forward = sorted(row['T'] for row in rows if row['sign'] > 0)
    assert forward == pytest.approx([4.0 * math.pi, 8.0 * math.pi])
    assert all(2 * row['k'] == row['j'] for row in rows)


def test_zero_is_a_single_jordan_block(ppwave_model) -> None:
    spectrum = ppwave_spectrum(ppwave_model.ppwave, 32)
    assert spectrum.jordan_at_zero['algebraic'] == 2
    assert spectrum.jordan_at_zero['geometric'] == 1
    assert spectrum.jordan_at_zero['ill_conditioned'] == 0
    zero = [label for mode, label in zip(spectrum.modes, spectrum.diagnostics['floquet_index'])
            if mode.trusted and abs(mode.lam) < 1e-6]
    assert zero == [0, 0]


def test_base_laplacian_keeps_only_constants_null(ppwave_model) -> None:
    grid = base_grid(ppwave_model.ppwave, 16)
    values = np.linalg.eigvalsh(base_laplacian(grid))
    assert abs(values[0]) < 1e-10
    assert values[1] == pytest.approx(1.0)
    assert values[-1] == pytest.approx(64.0)
