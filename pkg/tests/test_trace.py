import math

import numpy as np
import pytest

from killspec.core import benchmarks
from killspec.core.errors import ConfigError
from killspec.entities.grid import build_grid
from killspec.entities.model import build_model
from killspec.entities.orbit import PeriodicOrbit, PhasePoint
from killspec.entities.trace import CountingFunction, TracePeak
from killspec.systems.geometry import weyl_coefficient
from killspec.systems.orbits import (SearchOptions, constant_coefficient_periods, find_periodic_orbits,
                                     flat_torus_periods)
from killspec.systems.ppwave import ppwave_critical_det, ppwave_critical_periods, ppwave_spectrum
from killspec.systems.trace import (counting_function, default_weyl_window, detect_peaks,
                                    fit_singularity_amplitude, match_report, max_window, predicted_amplitude,
                                    singularity_kernel, smoothed_trace, t0_scaling, trace_sum, trace_times,
                                    weyl_fit, window_robustness)
from killspec.systems.verify import flat_torus_spectrum, manufactured_spectrum

TWO_PI = 2.0 * math.pi


def _orbit(period: float, det: float, stability: str = 'hyperbolic') -> PeriodicOrbit:
    seed = PhasePoint(x=np.zeros(1), xi=np.ones(1), energy=1.0)
    return PeriodicOrbit(seed=seed, period_T=period, primitive_period=period, winding=(1,),
                         closure_defect=0.0, det_I_minus_P=det, stability=stability, orbit_id=f'o{period:g}')


def test_counting_function_of_circle(circle_problem) -> None:
    _, _, spectrum = circle_problem
    counting = counting_function(spectrum)
    assert counting(0.0) == 2
    assert counting(1.0) == 4
    assert counting(10.0) == 22
    assert counting.excluded_complex == 0


def test_integrated_counting_function() -> None:
    counting = CountingFunction(thresholds=np.array([0.0, 1.0, 1.0]))
    assert counting.integrated([0.5, 2.0]) == pytest.approx([0.5, 4.0])


def test_weyl_fit_recovers_staircase_slope() -> None:
    counting = CountingFunction(thresholds=np.repeat(np.arange(0.0, 2000.0), 2))
    fit = weyl_fit(counting, 2, 2.0, (200.0, 800.0))
    assert fit['rel_err'] < 1e-3
    assert fit['c_raw'] == pytest.approx(2.0, rel=1e-2)


def test_weyl_fit_on_resolved_circle(solve) -> None:
    model, _, spectrum = solve(benchmarks.ultrastatic_circle(), [128])
    c_theory = weyl_coefficient(model, build_grid(model.torus_lengths, [128]))
    fit = weyl_fit(counting_function(spectrum), 2, c_theory, default_weyl_window(spectrum.cutoff))
    assert fit['c_theory'] == pytest.approx(2.0)
    assert fit['rel_err'] < 0.02


@pytest.mark.parametrize('config', [benchmarks.ultrastatic_circle(), benchmarks.shifted_circle(0.1)])
def test_weyl_fit_at_64_points(solve, config) -> None:
    model, _, spectrum = solve(config, [64])
    c_theory = weyl_coefficient(model, build_grid(model.torus_lengths, [64]))
    fit = weyl_fit(counting_function(spectrum), 2, c_theory, default_weyl_window(spectrum.cutoff))
    assert fit['rel_err'] < 0.02


def test_weyl_window_must_span_a_factor_two() -> None:
    counting = CountingFunction(thresholds=np.arange(10.0))
    with pytest.raises(ConfigError):
        weyl_fit(counting, 2, 2.0, (3.0, 5.0))


def test_trace_window_limited_by_cutoff(circle_problem) -> None:
    _, _, spectrum = circle_problem
    assert max_window(spectrum.cutoff) == pytest.approx(spectrum.cutoff / 3.0)
    with pytest.raises(ConfigError):
        smoothed_trace(spectrum, trace_times(5.0), spectrum.cutoff)
    with pytest.raises(ConfigError):
        smoothed_trace(spectrum, trace_times(5.0), 0.0)


def test_trace_sum_is_periodic_for_integer_spectrum() -> None:
    lam = np.arange(-40, 41, dtype=float)
    values = trace_sum(lam, np.array([0.0, TWO_PI, 1.0]), 8.0)
    assert values[1] == pytest.approx(values[0])
    assert abs(values[2]) < abs(values[0])


def test_trace_times_grid() -> None:
    times = trace_times(2.0, 10)
    assert times[0] == 0.0
    assert times[-1] == 2.0
    assert times.size == 21


def test_singularity_kernel_at_origin() -> None:
    value = singularity_kernel(np.zeros(1), 4.0)[0]
    assert value.real == pytest.approx(0.0)
    assert value.imag == pytest.approx(-0.5 * math.sqrt(math.pi) * 4.0)


def test_manufactured_amplitude() -> None:
    period = 5.0
    spectrum = manufactured_spectrum(period, 400)
    times = trace_times(2.0 * period)
    profile = smoothed_trace(spectrum, times, 8.0)
    fit = fit_singularity_amplitude(times, profile.half_values, 8.0, period)
    assert not fit['clustered']
    assert abs(fit['a_fit']) == pytest.approx(period / TWO_PI, rel=0.01)


def test_amplitude_fit_flags_clusters() -> None:
    times = trace_times(10.0)
    fit = fit_singularity_amplitude(times, np.zeros(times.size, dtype=complex), 8.0, 5.0, others=[5.0, 5.2])
    assert fit['clustered']
    assert fit['a_fit'] is None


def test_peaks_of_manufactured_trace() -> None:
    spectrum = manufactured_spectrum(5.0, 400)
    profile = smoothed_trace(spectrum, trace_times(12.0), 8.0)
    peaks = detect_peaks(profile, [5.0, 10.0])
    located = sorted(p.matched_period for p in peaks)
    assert located == [5.0, 10.0]
    for peak in peaks:
        assert peak.t_peak == pytest.approx(peak.matched_period, abs=0.05)
    report = match_report(peaks, [5.0, 10.0], 8.0, 12.0)
    assert report == {'missing_periods': [], 'unmatched_peaks': []}


def test_match_report_is_two_sided() -> None:
    peaks = [TracePeak(t_peak=5.0, height=1.0, matched_period=5.0), TracePeak(t_peak=9.0, height=1.0)]
    report = match_report(peaks, [5.0, 7.0], 8.0, 12.0)
    assert report['missing_periods'] == [7.0]
    assert report['unmatched_peaks'] == [9.0]


def test_predicted_amplitude_sums_orbits() -> None:
    orbits = [_orbit(5.0, -4.0), _orbit(5.0, -4.0), _orbit(8.0, 1e-9, 'degenerate')]
    prediction = predicted_amplitude(orbits, 5.0)
    assert prediction['modulus'] == pytest.approx(2 * 5.0 / (TWO_PI * 2.0))
    assert not prediction['degenerate']
    flagged = predicted_amplitude(orbits, 8.0)
    assert flagged['degenerate']
    assert flagged['modulus'] is None


def test_t0_scaling_exponent() -> None:
    spectrum = manufactured_spectrum(TWO_PI, 2000)
    scaling = t0_scaling(spectrum, (8.0, 16.0, 32.0))
    assert scaling['exponent'] == pytest.approx(1.0, abs=1e-3)


def test_peak_locations_stable_under_wider_window() -> None:
    spectrum = manufactured_spectrum(5.0, 400)
    assert window_robustness(spectrum, [5.0, 10.0], 8.0, 12.0) < 1.0


def test_trace_reflection_diagnostic(circle_problem) -> None:
    _, _, spectrum = circle_problem
    profile = smoothed_trace(spectrum, trace_times(10.0), 3.0)
    assert profile.diagnostics['reflection_defect'] < 1e-12
    assert profile.complex_correction_bound == 0.0


def test_lattice_trace_peaks_match_torus_lengths() -> None:
    spectrum = flat_torus_spectrum((TWO_PI, TWO_PI), 48.0)
    periods = flat_torus_periods((TWO_PI, TWO_PI), np.eye(2), 15.0)
    profile = smoothed_trace(spectrum, trace_times(15.0), 16.0)
    peaks = detect_peaks(profile, periods)
    assert match_report(peaks, periods, 16.0, 15.0) == {'missing_periods': [], 'unmatched_peaks': []}
    assert {p.matched_period for p in peaks} == set(periods)


def test_flat_ppwave_trace_peaks_are_classical() -> None:
    config = benchmarks.ppwave()
    config.update(H=1.0, name='ppwave_flat')
    quotient = build_model(config)
    spectrum = ppwave_spectrum(quotient.ppwave, 64)
    window = max_window(spectrum.cutoff)
    periods = constant_coefficient_periods(quotient, 14.0)
    peaks = detect_peaks(smoothed_trace(spectrum, trace_times(14.0), window), periods)
    assert match_report(peaks, periods, window, 14.0)['unmatched_peaks'] == []
    matched = [p.matched_period for p in peaks if p.matched_period is not None]
    assert any(T == pytest.approx(TWO_PI) for T in matched)
    assert any(T == pytest.approx(2.0 * TWO_PI) for T in matched)
    for peak in peaks:
        assert abs(peak.t_peak - peak.matched_period) <= 3.0 / window


def test_ppwave_prediction_from_quotient_orbits(ppwave_model) -> None:
    pp = ppwave_model.ppwave
    orbits = find_periodic_orbits(ppwave_model, SearchOptions(t_max=9.0, windings=[[-1, 0], [1, 0]], scan_seeds=0))
    period = ppwave_critical_periods(pp, 0.0)
    det = ppwave_critical_det(pp, 0.0)['det_I_minus_P']
    prediction = predicted_amplitude(orbits, period)
    assert not prediction['degenerate']
    assert prediction['modulus'] == pytest.approx(period / (TWO_PI * math.sqrt(abs(det))), rel=1e-4)
    family = predicted_amplitude(orbits, TWO_PI)
    assert family['degenerate']
    assert family['modulus'] is None
