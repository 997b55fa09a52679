import numpy as np
import pytest

from killspec.core import benchmarks
from killspec.systems.forms import (cauchy_data, cauchy_from_values, conjugate, energy_form_Q, forms_report,
                                    pontryagin_index, q1_inertia, sigma_pairing_matrix, symplectic_form_sigma,
                                    verify_lemma12)


def _nonzero_modes(spectrum, count: int = 6):
    return [m for m in spectrum.real_trusted(1e-7) if abs(m.lam) > 0.5][:count]


def test_energy_identity_pairwise(shifted_problem) -> None:
    _, mats, spectrum = shifted_problem
    modes = _nonzero_modes(spectrum)
    for u in modes:
        for v in modes:
            assert verify_lemma12(u, v, mats) < 1e-7


def test_energy_of_a_mode_is_positive(circle_problem) -> None:
    _, mats, spectrum = circle_problem
    for mode in _nonzero_modes(spectrum):
        u = cauchy_data(mode, mats)
        q = energy_form_Q(u, u, mats)
        assert q.real > 0.0
        assert abs(q.imag) < 1e-10 * q.real


def test_sigma_is_antisymmetric(shifted_problem) -> None:
    _, mats, spectrum = shifted_problem
    u, v = [cauchy_data(m, mats) for m in _nonzero_modes(spectrum, 2)]
    assert abs(symplectic_form_sigma(u, v, mats) + symplectic_form_sigma(v, u, mats)) < 1e-12
    assert abs(symplectic_form_sigma(u, u, mats)) < 1e-12


def test_conjugate_data_flips_frequency(circle_problem) -> None:
    _, mats, spectrum = circle_problem
    u = cauchy_data(_nonzero_modes(spectrum, 1)[0], mats)
    bar = conjugate(u)
    assert bar.lam == -np.conj(u.lam)
    assert np.allclose(bar.g, np.conj(u.g))


def test_evolution_preserves_energy(shifted_problem) -> None:
    _, mats, spectrum = shifted_problem
    u = cauchy_data(_nonzero_modes(spectrum, 1)[0], mats)
    moved = u.evolved(1.7)
    assert energy_form_Q(moved, moved, mats) == pytest.approx(energy_form_Q(u, u, mats))


def test_cauchy_values_must_match_grid(circle_problem) -> None:
    _, mats, _ = circle_problem
    with pytest.raises(ValueError):
        cauchy_from_values(np.ones(7), 1.0, mats)


def test_sigma_pairs_only_opposite_frequencies(shifted_problem) -> None:
    _, mats, spectrum = shifted_problem
    S, violations = sigma_pairing_matrix(spectrum, mats)
    assert S.shape[0] == len(spectrum.real_trusted(1e-7))
    assert violations == []


def test_forms_report(well_problem) -> None:
    _, mats, spectrum = well_problem
    report = forms_report(spectrum, mats)
    assert report['lemma12_max_defect'] < 1e-7
    assert report['pairing_violations'] == []
    assert report['sigma_antisymmetry_defect'] < 1e-10
    assert report['flow_invariance_defect'] < 1e-10
    assert report['modes_used'] > 0


@pytest.mark.parametrize('potential,expected', [(0.0, 0), (-0.5, 1), (-2.0, 3)])
def test_pontryagin_index_of_constant_potential(solve, potential: float, expected: int) -> None:
    _, mats, _ = solve(benchmarks.ultrastatic_circle(potential), [32])
    assert pontryagin_index(mats) == expected
    assert q1_inertia(mats, symmetrized=True)['negative'] == expected


def test_free_circle_has_one_indeterminate_direction(circle_problem) -> None:
    _, mats, _ = circle_problem
    counts = q1_inertia(mats)
    assert counts['negative'] == 0
    assert counts['indeterminate'] == 1
