import math

import numpy as np
import pytest

from killspec.core.errors import NumericalError
from killspec.systems.verify import CheckResult, VerificationSuite, flat_torus_spectrum, manufactured_spectrum


def test_check_result_serializes() -> None:
    check = CheckResult('weyl_law', True, 0.01, 0.05, 'circle')
    assert check.to_dict() == {'name': 'weyl_law', 'passed': True, 'value': 0.01, 'threshold': 0.05,
                               'detail': 'circle'}


def test_manufactured_spectrum() -> None:
    spectrum = manufactured_spectrum(2.0 * math.pi, 3)
    values = sorted(m.lam.real for m in spectrum.modes)
    np.testing.assert_allclose(values, np.arange(-3.0, 4.0))
    assert all(m.trusted for m in spectrum.modes)
    assert math.isinf(spectrum.cutoff)


def test_flat_torus_spectrum_counts_lattice_points() -> None:
    spectrum = flat_torus_spectrum((2.0 * math.pi, 2.0 * math.pi), 2.0)
    values = sorted(m.lam.real for m in spectrum.modes)
    # 13 lattice points with |k| <= 2, each giving +-|k|
    assert len(values) == 26
    assert values.count(0.0) == 2
    assert values[-1] == pytest.approx(2.0)
    assert sum(1 for v in values if abs(v - math.sqrt(2.0)) < 1e-12) == 4
    assert spectrum.cutoff == 2.0


def test_raising_check_is_recorded_as_failed() -> None:
    suite = VerificationSuite()

    def broken():
        raise NumericalError("no convergence")

    suite.checks = [
        ('fine', lambda: [CheckResult('fine', True, 0.0, 1.0)]),
        ('broken', broken),
        ('after', lambda: [CheckResult('after', False, 2.0, 1.0)]),
    ]
    results = suite.run()
    assert [r.name for r in results] == ['fine', 'broken', 'after']
    assert [r.passed for r in results] == [True, False, False]
    assert results[1].detail == 'no convergence'
    assert results[1].value is None


@pytest.mark.parametrize('group', ['factorizability', 'determinism'])
def test_benchmark_check_groups_pass(group: str) -> None:
    suite = VerificationSuite()
    suite.checks = [entry for entry in suite.checks if entry[0] == group]
    results = suite.run()
    assert results
    failed = [r.to_dict() for r in results if not r.passed]
    assert not failed
