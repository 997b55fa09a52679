"""
Lab configuration and constants
"""

import math
from typing import Dict, Any, Tuple


class LabSettings:
    """Centralized numerical defaults and tolerances"""

    # Discretization
    DEFAULT_GRID = 64
    MIN_GRID = 8
    DEALIAS_FRACTION = 2.0 / 3.0

    # Pencil solver
    TOL_RESID = 1e-7
    CLUSTER_REL = 1e-6
    TOL_ZERO = 1e-6
    TOL_REAL = 1e-7
    TOL_TAIL = 0.01
    TAIL_FRACTION = 2.0 / 3.0
    CUTOFF_FRACTION = 1.0 / 3.0
    ROUTE_AGREEMENT = 1e-7
    ROUTE_AGREEMENT_MIN = 0.1
    JORDAN_CLUSTER_FACTOR = 100.0
    NULL_EPS_FACTOR = 10.0

    # Model geometry
    TOL_FACTOR = 1e-8
    TOL_PERIODIC = 1e-12
    PERIODIC_PROBES = 7
    EXPRESSION_NAMES = ('pi', 'sin', 'cos', 'exp', 'sqrt')

    # Invariant forms
    PAIRING_TOL = 1e-7
    ENERGY_IDENTITY_TOL = 1e-7

    # Orbit dynamics
    TOL_ORBIT = 1e-9
    NEAR_RETURN = 1e-2
    EPS_XI = 1e-8
    ODE_RTOL = 1e-12
    ODE_ATOL = 1e-12
    ODE_METHOD = 'DOP853'
    NEWTON_MAX_ITER = 30
    NEWTON_DAMPING = 1e-12
    SEEDS_PER_WINDING = 4
    SCAN_SEEDS = 16
    ORBIT_T_MAX = 30.0
    DET_DEGENERATE = 1e-6
    SYMPLECTIC_TOL = 1e-7
    PRIMITIVE_TOL = 1e-6
    DEDUP_TOL = 1e-5
    SCAN_STEP = 0.05
    FINGERPRINT_SAMPLES = 64
    UNIT_CIRCLE_TOL = 1e-6

    # Trace
    DEFAULT_WINDOW = 16.0
    TRACE_T_MAX = 30.0
    SAMPLES_PER_UNIT = 40
    PEAK_MAD_FACTOR = 5.0
    PEAK_T_MIN = 4.0  # units of 1/window
    PEAK_MATCH = 3.0  # units of 1/window
    FIT_HALF_WIDTH = 2.0  # units of 1/window
    CLUSTER_WIDTH = 5.0  # units of 1/window
    WEYL_MIN_RATIO = 2.0

    # Harness
    DEFAULT_STAGES = ('spectrum',)
    OUT_ENV = 'KILLSPEC_OUT'
    DEFAULT_OUT = 'killspec_out'
    MANIFEST_NAME = 'manifest.json'
    DUMP_MAGIC = b'KSPM'
    DUMP_VERSION = 1

    # Export schemas
    CSV_HEADERS = {
        'spectrum': ('re_lambda', 'im_lambda', 'multiplicity', 'residual', 'trusted'),
        'trace': ('t', 're_T', 'im_T', 'abs_T'),
        'counting': ('lambda', 'count'),
    }
    ORBIT_COLUMNS_HEAD = ('period', 'primitive_period')
    ORBIT_COLUMNS_TAIL = ('det_I_minus_P', 'stability', 'closure_defect')

    @classmethod
    def tolerances(cls) -> Dict[str, float]:
        """Named tolerances overridable from a run config"""
        return {
            'tol_resid': cls.TOL_RESID,
            'cluster_rel': cls.CLUSTER_REL,
            'tol_zero': cls.TOL_ZERO,
            'tol_real': cls.TOL_REAL,
            'tol_tail': cls.TOL_TAIL,
            'tol_factor': cls.TOL_FACTOR,
            'tol_orbit': cls.TOL_ORBIT,
            'near_return': cls.NEAR_RETURN,
        }

    @classmethod
    def orbit_columns(cls, dim: int) -> Tuple[str, ...]:
        """Orbit table header for a d-dimensional torus"""
        winding = tuple(f'winding_{i + 1}' for i in range(dim))
        return cls.ORBIT_COLUMNS_HEAD + winding + cls.ORBIT_COLUMNS_TAIL

    @classmethod
    def unit_ball_volume(cls, dim: int) -> float:
        """Volume of the unit ball in R^dim"""
        from scipy.special import gamma
        return math.pi ** (dim / 2.0) / gamma(dim / 2.0 + 1.0)

    @classmethod
    def defaults(cls) -> Dict[str, Any]:
        """Default run parameters, keyed as in the run config"""
        return {
            'grid': cls.DEFAULT_GRID,
            'tolerances': cls.tolerances(),
            'orbits': {
                't_max': cls.ORBIT_T_MAX,
                'seeds_per_winding': cls.SEEDS_PER_WINDING,
                'scan_seeds': cls.SCAN_SEEDS,
            },
            'trace': {
                'window': cls.DEFAULT_WINDOW,
                't_max': cls.TRACE_T_MAX,
                'samples_per_unit': cls.SAMPLES_PER_UNIT,
            },
        }
