"""
Built-in benchmark models
"""

import math
from typing import Any, Callable, Dict

TWO_PI = 2.0 * math.pi


def ultrastatic_circle(potential: Any = 0.0) -> Dict[str, Any]:
    """-dt^2 + dx^2 on the circle of length 2 pi"""
    return {'n': 2, 'family': 'ultrastatic', 'lengths': [TWO_PI], 'potential': potential,
            'name': 'ultrastatic_circle'}


def ultrastatic_torus() -> Dict[str, Any]:
    return {'n': 3, 'family': 'ultrastatic', 'lengths': [TWO_PI, TWO_PI], 'name': 'ultrastatic_torus'}


def static_conformal() -> Dict[str, Any]:
    """N^2 (-dt^2 + dx^2) with N = 1 + 0.2 cos x"""
    return {'n': 2, 'family': 'static_conformal', 'lengths': [TWO_PI], 'lapse': '1 + 0.2*cos(x1)',
            'name': 'static_conformal'}


def static_conformal_torus() -> Dict[str, Any]:
    """Conformally flat T^2 model, where the reduced potential W is not zero"""
    return {'n': 3, 'family': 'static_conformal', 'lengths': [TWO_PI, TWO_PI], 'lapse': '1 + 0.1*cos(x1)',
            'name': 'static_conformal_torus'}


def shifted_circle(b: float = 0.3) -> Dict[str, Any]:
    """Constant shift: null speeds 1 - b and -(1 + b), periods L / (1 -+ b)"""
    return {'n': 2, 'family': 'generic', 'lengths': [TWO_PI], 'lapse': 1.0, 'shift': [b],
            'name': 'shifted_circle'}


def lapse_well() -> Dict[str, Any]:
    """N = 1 + 0.1 cos x2 on T^2: elliptic orbit along x2 = pi, hyperbolic along x2 = 0"""
    return {'n': 3, 'family': 'generic', 'lengths': [TWO_PI, TWO_PI], 'lapse': '1 + 0.1*cos(x2)',
            'name': 'lapse_well'}


def ppwave() -> Dict[str, Any]:
    return {'n': 3, 'family': 'ppwave', 'lengths': [TWO_PI], 'H': '1 + 0.3*cos(y1)', 'L': TWO_PI,
            'alpha': 1.5, 'name': 'ppwave'}


def ppwave_isolated() -> Dict[str, Any]:
    """Shortest orbit is the hyperbolic backward s-line at y = 0, period 2 pi 0.7 / 2.3"""
    return {'n': 3, 'family': 'ppwave', 'lengths': [TWO_PI], 'H': '2 + 0.3*cos(y1)', 'L': TWO_PI,
            'alpha': 1.5, 'name': 'ppwave_isolated'}


def non_killing_shift() -> Dict[str, Any]:
    """Shear shift whose vector field is not a Killing field of h~"""
    return {'n': 3, 'family': 'generic', 'lengths': [TWO_PI, TWO_PI], 'shift': ['0.2*sin(x2)', 0.0],
            'name': 'non_killing_shift'}


BENCHMARKS: Dict[str, Callable[[], Dict[str, Any]]] = {
    'ultrastatic_circle': ultrastatic_circle,
    'ultrastatic_torus': ultrastatic_torus,
    'static_conformal': static_conformal,
    'static_conformal_torus': static_conformal_torus,
    'shifted_circle': shifted_circle,
    'lapse_well': lapse_well,
    'ppwave': ppwave,
    'ppwave_isolated': ppwave_isolated,
    'non_killing_shift': non_killing_shift,
}
