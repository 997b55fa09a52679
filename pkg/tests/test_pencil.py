import math

import numpy as np
import pytest
import scipy.linalg

from killspec.core import benchmarks
from killspec.core.settings import LabSettings
from killspec.entities.grid import build_grid
from killspec.entities.spectrum import EigenMode
from killspec.systems.discretization import tail_fraction
from killspec.systems.pencil import (SolverOptions, companion_linearize, detect_jordan_zero,
                                     direct_hermitian_spectrum, kernel_dimension, mu_to_lambda,
                                     null_threshold, pencil_residual, residual_filter,
                                     selfadjoint_linearize, separate_tails, solve_spectrum)

TWO_PI = 2.0 * math.pi


def _small_pencil(size: int = 6):
    rng = np.random.default_rng(7)
    A = rng.normal(size=(size, size))
    P = A @ A.T + np.eye(size)
    S = rng.normal(size=(size, size))
    X = 0.3 * (S - S.T)
    return P.astype(complex), X.astype(complex)


def _real_trusted(spectrum) -> np.ndarray:
    return np.sort([m.lam.real for m in spectrum.real_trusted(1e-7)])


def test_companion_eigenpairs_solve_the_pencil() -> None:
    P, X = _small_pencil()
    A, B = companion_linearize(P, X)
    assert A.shape == (12, 12)
    assert np.array_equal(B, np.eye(12))
    values, vectors = scipy.linalg.eig(A)
    for lam, v in zip(values, vectors.T):
        assert pencil_residual(P, X, lam, v[:6]) < 1e-10
        assert np.allclose(v[6:], lam * v[:6])


def test_selfadjoint_form_is_hermitian() -> None:
    P, X = _small_pencil()
    A, B = selfadjoint_linearize(P, X)
    assert np.allclose(A, A.conj().T)
    assert np.allclose(B, B.conj().T)


def test_both_linearizations_agree() -> None:
    P, X = _small_pencil()
    companion = scipy.linalg.eigvals(companion_linearize(P, X)[0])
    A, B = selfadjoint_linearize(P, X)
    recovered = []
    for mu, v in zip(*scipy.linalg.eig(A, B)):
        for lam in mu_to_lambda(mu):
            if pencil_residual(P, X, lam, v[:6]) < 1e-8:
                recovered.append(lam)
    assert len(recovered) >= len(companion)
    for lam in companion:
        assert np.min(np.abs(np.array(recovered) - lam)) < 1e-8


def test_mu_to_lambda_roots() -> None:
    for mu in (0.0, 1.5, -2.0 + 0.5j):
        for lam in mu_to_lambda(mu):
            assert abs(lam ** 2 + mu * lam - 1.0) < 1e-12
    plus, minus = mu_to_lambda(0.0)
    assert {round(plus.real, 12), round(minus.real, 12)} == {1.0, -1.0}


def test_mismatched_blocks_rejected() -> None:
    with pytest.raises(ValueError):
        companion_linearize(np.eye(3), np.eye(4))


def test_separate_tails_splits_degenerate_cluster() -> None:
    grid = build_grid([TWO_PI], [16])
    x = grid.mesh[0]
    vectors = np.column_stack([np.cos(x) + np.cos(7 * x), np.cos(x) - np.cos(7 * x)])
    rotated = separate_tails(np.array([2.0, 2.0]), vectors, grid, 1e-6)
    tails = sorted(tail_fraction(rotated[:, j], grid) for j in range(2))
    assert tails[0] < 1e-20
    assert tails[1] == pytest.approx(1.0)


def test_separate_tails_leaves_isolated_vectors() -> None:
    grid = build_grid([TWO_PI], [16])
    x = grid.mesh[0]
    vectors = np.column_stack([np.cos(x) + np.cos(7 * x), np.sin(x)])
    rotated = separate_tails(np.array([1.0, 5.0]), vectors, grid, 1e-6)
    assert np.allclose(rotated, vectors)


def test_ultrastatic_circle_spectrum(circle_problem) -> None:
    _, _, spectrum = circle_problem
    assert spectrum.route == 'symmetric'
    assert spectrum.cutoff == pytest.approx(32.0 / 3.0)
    ks = np.arange(1, 11, dtype=float)
    expected = np.sort(np.concatenate([[0.0, 0.0], ks, ks, -ks, -ks]))
    found = _real_trusted(spectrum)
    assert found.size == expected.size
    assert np.max(np.abs(found - expected)) < 1e-8
    assert spectrum.jordan_at_zero['algebraic'] == 2
    assert spectrum.jordan_at_zero['geometric'] == 1
    assert not spectrum.complex_modes


def test_ultrastatic_groups_have_multiplicity_two(circle_problem) -> None:
    _, _, spectrum = circle_problem
    groups = {round(g.lambda_rep.real, 6): g.multiplicity for g in spectrum.groups}
    assert groups[0.0] == 2
    assert groups[1.0] == 2
    assert groups[-10.0] == 2


def test_modes_are_weighted_unit_vectors(circle_problem) -> None:
    _, mats, spectrum = circle_problem
    for mode in spectrum.trusted_modes[:10]:
        assert mats.norm(mode.psi) == pytest.approx(1.0)
        assert mode.residual < 1e-7
        assert mode.tail_fraction < 0.01


def test_shifted_circle_spectrum(shifted_problem) -> None:
    _, _, spectrum = shifted_problem
    assert spectrum.route == 'companion'
    found = _real_trusted(spectrum)
    assert found.size > 0
    for lam in found:
        if abs(lam) < 1e-6:
            continue
        nearest = min(abs(lam / 1.3 - round(lam / 1.3)), abs(lam / 0.7 - round(lam / 0.7)))
        assert nearest < 1e-8
    for target in (0.7, -0.7, 1.3, -1.3, 1.4, 2.6):
        assert np.min(np.abs(found - target)) < 1e-8
    report = spectrum.symmetry_report
    assert report['reflection_defect'] < 1e-7
    assert report['conjugation_defect'] < 1e-7


def test_route_cross_check(shifted_problem) -> None:
    model, mats, first = shifted_problem
    again = solve_spectrum(mats, SolverOptions(cutoff=first.cutoff, cross_check=True))
    assert again.route_discrepancy is not None
    assert again.route_discrepancy < 1e-6


def test_forced_companion_route_matches_direct_solve(conformal_problem) -> None:
    _, mats, _ = conformal_problem
    spectrum = solve_spectrum(mats, SolverOptions(cutoff=conformal_problem[2].cutoff, route='companion'))
    direct = direct_hermitian_spectrum(mats.P, mats.volume_weights)
    for lam in _real_trusted(spectrum):
        mu = lam ** 2
        assert np.min(np.abs(direct - mu)) / max(1.0, mu) < 1e-8


def test_jordan_detection_without_modes(circle_problem) -> None:
    _, mats, _ = circle_problem
    jordan = detect_jordan_zero(mats)
    assert jordan['geometric'] == 1
    assert jordan['algebraic'] == 2
    assert jordan['ill_conditioned'] == 0


def test_untrusted_modes_above_cutoff(circle_problem) -> None:
    _, _, spectrum = circle_problem
    above = [m for m in spectrum.modes if abs(m.lam) >= spectrum.cutoff]
    assert above
    assert not any(m.trusted for m in above)


def test_small_potential_lifts_the_zero_mode(solve) -> None:
    _, mats, spectrum = solve(benchmarks.ultrastatic_circle(potential=1e-4), [64])
    found = _real_trusted(spectrum)
    assert np.min(np.abs(found)) == pytest.approx(0.01, rel=1e-6)
    assert np.sum(np.abs(found - 0.01) < 1e-8) == 1
    assert np.sum(np.abs(found + 0.01) < 1e-8) == 1
    assert spectrum.jordan_at_zero['algebraic'] == 0
    assert spectrum.jordan_at_zero['geometric'] == 0
    assert detect_jordan_zero(mats)['geometric'] == 0


def test_kernel_dimension_ignores_the_nyquist_null_vector(circle_problem) -> None:
    _, mats, _ = circle_problem
    dimension, near = kernel_dimension(mats.P, mats.grid)
    assert dimension == 1
    assert near == 0


def test_null_threshold_is_a_roundoff_floor() -> None:
    assert null_threshold(1024.0, 64) < 1e-9
    assert null_threshold(0.0, 8) == null_threshold(1.0, 8)


def test_residual_is_relative_to_psi_only(circle_problem) -> None:
    _, mats, _ = circle_problem
    x = mats.grid.mesh[0].ravel()
    psi = np.exp(5j * x)
    weights = mats.volume_weights
    assert pencil_residual(mats.P, mats.X, 5.0, psi, weights) < 1e-9
    off = pencil_residual(mats.P, mats.X, 5.0 + 1e-6, psi, weights)
    assert off == pytest.approx(1e-5, rel=1e-3)
    mode = EigenMode(lam=5.0 + 1e-6, psi=psi, residual=off, tail_fraction=0.0, trusted=True)
    assert residual_filter([mode], LabSettings.TOL_RESID) == []
