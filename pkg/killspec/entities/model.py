"""
Stationary spacetime models on torus Cauchy surfaces
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from ..core.errors import ConfigError, ModelError
from ..core.settings import LabSettings
from .fields import ConstantField, ExpressionField, Field, SampledField, describe_all, make_field
from .grid import build_grid

logger = logging.getLogger(__name__)

FAMILIES = ('generic', 'ultrastatic', 'static_conformal', 'ppwave')

FAMILY_KEYS = {
    'generic': {'n', 'lengths', 'lapse', 'shift', 'metric', 'potential', 'family', 'name'},
    'ultrastatic': {'n', 'lengths', 'metric', 'potential', 'family', 'name'},
    'static_conformal': {'n', 'lengths', 'lapse', 'metric', 'potential', 'family', 'name'},
    'ppwave': {'n', 'lengths', 'H', 'L', 'alpha', 'family', 'name'},
}


@dataclass(frozen=True)
class PPWaveModel:
    """Stationary pp-wave -H(y) dt^2 + 2 dt dx + dy^2 with (t, x, y) ~ (t + L, x + alpha L, y)"""

    base_lengths: Tuple[float, ...]
    profile_H: Field
    period_L: float
    alpha: float

    @property
    def dim_spacetime(self) -> int:
        return len(self.base_lengths) + 2

    def profile_on(self, points: int) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes of S and H sampled there, for a uniform base grid"""
        grid = build_grid(self.base_lengths, [points])
        return grid.mesh, self.profile_H.value(grid.mesh)


@dataclass(frozen=True)
class StationaryModel:
    """Lapse, shift covector, spatial metric and potential on a flat torus"""

    dim_spacetime: int
    torus_lengths: Tuple[float, ...]
    lapse: Field
    shift: Tuple[Field, ...]
    spatial_metric: Tuple[Tuple[Field, ...], ...]
    potential: Field
    family: str = 'generic'
    name: str = ''
    ppwave: Optional[PPWaveModel] = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return len(self.torus_lengths)

    @property
    def has_shift(self) -> bool:
        return not all(f.is_constant and f.constant_value() == 0.0 for f in self.shift)

    @property
    def has_constant_metric(self) -> bool:
        return all(f.is_constant for row in self.spatial_metric for f in row)

    @property
    def is_constant_coefficient(self) -> bool:
        return (self.lapse.is_constant and self.has_constant_metric
                and all(f.is_constant for f in self.shift))

    def metric(self, points: np.ndarray) -> np.ndarray:
        """h_ij at points, shape (d, d, *S)"""
        return np.stack([np.stack([f.value(points) for f in row]) for row in self.spatial_metric])

    def metric_grad(self, points: np.ndarray) -> np.ndarray:
        """d_k h_ij at points, shape (k, i, j, *S)"""
        rows = np.stack([np.stack([f.grad(points) for f in row]) for row in self.spatial_metric])
        return np.moveaxis(rows, 2, 0)

    def metric_hess(self, points: np.ndarray) -> np.ndarray:
        """d_k d_l h_ij at points, shape (k, l, i, j, *S)"""
        rows = np.stack([np.stack([f.hess(points) for f in row]) for row in self.spatial_metric])
        return np.moveaxis(np.moveaxis(rows, 2, 0), 3, 1)

    def shift_covector(self, points: np.ndarray) -> np.ndarray:
        """beta_i at points, shape (d, *S)"""
        return np.stack([f.value(points) for f in self.shift])

    def describe(self) -> Dict[str, Any]:
        """Canonical JSON description, stable across runs"""
        out = {
            'n': self.dim_spacetime,
            'lengths': list(self.torus_lengths),
            'lapse': self.lapse.describe(),
            'shift': describe_all(self.shift),
            'metric': describe_all(self.spatial_metric),
            'potential': self.potential.describe(),
            'family': self.family,
        }
        if self.ppwave is not None:
            out['ppwave'] = {
                'lengths': list(self.ppwave.base_lengths),
                'H': self.ppwave.profile_H.describe(),
                'L': self.ppwave.period_L,
                'alpha': self.ppwave.alpha,
            }
        return out


def _number(config: Dict[str, Any], key: str, pointer: str, positive: bool = True) -> float:
    if key not in config:
        raise ConfigError(f"missing required field '{key}'", f"{pointer}/{key}")
    value = config[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number", f"{pointer}/{key}")
    if positive and not value > 0:
        raise ConfigError(f"'{key}' must be positive", f"{pointer}/{key}")
    return float(value)


def _lengths(config: Dict[str, Any], count: int, pointer: str) -> Tuple[float, ...]:
    raw = config.get('lengths')
    if raw is None:
        return (2.0 * np.pi,) * count
    if not isinstance(raw, list) or len(raw) != count:
        raise ConfigError(f"'lengths' must list {count} torus side lengths", f"{pointer}/lengths")
    for i, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError("torus lengths must be positive numbers", f"{pointer}/lengths/{i}")
    return tuple(float(v) for v in raw)


def _metric(config: Dict[str, Any], lengths: Sequence[float], pointer: str) -> List[List[Field]]:
    d = len(lengths)
    raw = config.get('metric')
    if raw is None:
        return [[ConstantField(1.0 if i == j else 0.0, d) for j in range(d)] for i in range(d)]
    if not isinstance(raw, list) or len(raw) != d or any(not isinstance(r, list) or len(r) != d for r in raw):
        raise ConfigError(f"'metric' must be a {d}x{d} matrix", f"{pointer}/metric")
    rows = [[make_field(raw[i][j], lengths, f"{pointer}/metric/{i}/{j}") for j in range(d)]
            for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            if rows[i][j].describe() != rows[j][i].describe():
                raise ModelError("spatial metric must be symmetric", f"{pointer}/metric/{i}/{j}")
    return rows


def _shift(config: Dict[str, Any], lengths: Sequence[float], pointer: str) -> Tuple[Field, ...]:
    d = len(lengths)
    raw = config.get('shift')
    if raw is None:
        return tuple(ConstantField(0.0, d) for _ in range(d))
    if not isinstance(raw, list) or len(raw) != d:
        raise ConfigError(f"'shift' must list {d} covector components", f"{pointer}/shift")
    return tuple(make_field(v, lengths, f"{pointer}/shift/{i}") for i, v in enumerate(raw))


def ppwave_to_stationary(pp: PPWaveModel, name: str = '') -> StationaryModel:
    """Quotient of the pp-wave in coordinates (tau, s, y) with t = tau + s, x = alpha s"""
    lengths = (pp.period_L,) + tuple(pp.base_lengths)
    d = len(lengths)
    alpha = pp.alpha
    lifted = _lift_profile(pp, lengths)

    # N = alpha / sqrt(2 alpha - H), beta = (alpha - H, 0, ...), h = diag(2 alpha - H, 1, ...)
    lapse = _combine(lifted, lengths, lambda H: alpha / np.sqrt(2.0 * alpha - H),
                     f"{alpha!r}/sqrt(2*{alpha!r} - ({{}}))")
    shift = [_combine(lifted, lengths, lambda H: alpha - H, f"{alpha!r} - ({{}})")]
    shift += [ConstantField(0.0, d) for _ in range(d - 1)]
    metric = [[ConstantField(1.0 if i == j else 0.0, d) for j in range(d)] for i in range(d)]
    metric[0][0] = _combine(lifted, lengths, lambda H: 2.0 * alpha - H, f"2*{alpha!r} - ({{}})")
    return StationaryModel(
        dim_spacetime=pp.dim_spacetime,
        torus_lengths=lengths,
        lapse=lapse,
        shift=tuple(shift),
        spatial_metric=tuple(tuple(r) for r in metric),
        potential=ConstantField(0.0, d),
        family='ppwave',
        name=name,
        ppwave=pp,
    )


def _lift_profile(pp: PPWaveModel, lengths: Sequence[float]) -> Any:
    """H(y) rewritten on the quotient torus, where y_k becomes x_{k+1}"""
    if pp.profile_H.is_constant:
        return pp.profile_H.constant_value()
    if isinstance(pp.profile_H, ExpressionField):
        shifted = sympy.symbols(f'x2:{len(lengths) + 1}')
        return str(pp.profile_H.expr.subs(dict(zip(pp.profile_H.symbols, shifted)), simultaneous=True))
    samples = np.asarray(pp.profile_H.samples)
    return samples[None, ...]


def _combine(lifted: Any, lengths: Sequence[float], numeric, template: str) -> Field:
    d = len(lengths)
    if isinstance(lifted, float):
        return ConstantField(float(numeric(lifted)), d)
    if isinstance(lifted, str):
        return ExpressionField(template.format(lifted), lengths, '/model/H')
    # Sampled profiles are constant in s, two samples along the first axis represent them exactly
    values = np.broadcast_to(numeric(lifted), (2,) + lifted.shape[1:])
    return SampledField(values, lengths, '/model/H')


def build_model(config: Dict[str, Any], points: Optional[Sequence[int]] = None,
                pointer: str = '/model') -> StationaryModel:
    """Validate a model description and build the stationary model"""
    if not isinstance(config, dict):
        raise ConfigError("model description must be an object", pointer)
    family = config.get('family', 'generic')
    if family not in FAMILIES:
        raise ConfigError(f"unknown family '{family}' (expected one of {', '.join(FAMILIES)})",
                          f"{pointer}/family")
    unknown = set(config) - FAMILY_KEYS[family]
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key '{key}' for family '{family}'", f"{pointer}/{key}")

    n = config.get('n')
    if isinstance(n, bool) or not isinstance(n, int):
        raise ConfigError("'n' must be an integer", f"{pointer}/n")
    if n < 2:
        raise ConfigError("spacetime dimension n must be at least 2", f"{pointer}/n")
    name = str(config.get('name', family))

    if family == 'ppwave':
        model = _build_ppwave(config, n, name, pointer)
    else:
        model = _build_stationary(config, family, n, name, pointer)

    validate_model(model, points)
    logger.debug(f"Built {family} model '{name}' with n={n}, lengths={model.torus_lengths}")
    return model


def _build_stationary(config: Dict[str, Any], family: str, n: int, name: str,
                      pointer: str) -> StationaryModel:
    d = n - 1
    lengths = _lengths(config, d, pointer)
    metric = _metric(config, lengths, pointer)
    potential = make_field(config.get('potential', 0.0), lengths, f"{pointer}/potential")
    lapse: Field = ConstantField(1.0, d)
    shift: Tuple[Field, ...] = tuple(ConstantField(0.0, d) for _ in range(d))

    if family == 'generic':
        lapse = make_field(config.get('lapse', 1.0), lengths, f"{pointer}/lapse")
        shift = _shift(config, lengths, pointer)
    elif family == 'static_conformal':
        if 'lapse' not in config:
            raise ConfigError("missing required field 'lapse'", f"{pointer}/lapse")
        lapse = make_field(config['lapse'], lengths, f"{pointer}/lapse")
        metric = _conformal_metric(lapse, metric, lengths, pointer)

    return StationaryModel(
        dim_spacetime=n,
        torus_lengths=lengths,
        lapse=lapse,
        shift=shift,
        spatial_metric=tuple(tuple(r) for r in metric),
        potential=potential,
        family=family,
        name=name,
    )


def _conformal_metric(lapse: Field, flat: List[List[Field]], lengths: Sequence[float],
                      pointer: str) -> List[List[Field]]:
    """Spatial metric N^2 h_flat of the static-conformal family"""
    d = len(lengths)
    if not all(f.is_constant for row in flat for f in row):
        raise ConfigError("static_conformal needs a constant base metric", f"{pointer}/metric")
    if lapse.is_constant:
        c = lapse.constant_value() ** 2
        return [[ConstantField(c * flat[i][j].constant_value(), d) for j in range(d)] for i in range(d)]
    rows: List[List[Field]] = []
    for i in range(d):
        row: List[Field] = []
        for j in range(d):
            h = flat[i][j].constant_value()
            if h == 0.0:
                row.append(ConstantField(0.0, d))
            elif isinstance(lapse, ExpressionField):
                row.append(ExpressionField(f"{h!r}*({lapse.text})**2", lengths, f"{pointer}/lapse"))
            else:
                row.append(SampledField(h * lapse.samples ** 2, lengths, f"{pointer}/lapse"))
        rows.append(row)
    return rows


def _build_ppwave(config: Dict[str, Any], n: int, name: str, pointer: str) -> StationaryModel:
    if n < 3:
        raise ConfigError("the pp-wave family needs n >= 3", f"{pointer}/n")
    base = _lengths(config, n - 2, pointer)
    alpha = _number(config, 'alpha', pointer)
    period = _number(config, 'L', pointer)
    if 'H' not in config:
        raise ConfigError("missing required field 'H'", f"{pointer}/H")
    profile = make_field(config['H'], base, f"{pointer}/H", prefix='y')

    check = build_grid(base, [LabSettings.DEFAULT_GRID])
    H = profile.value(check.mesh)
    if np.min(H) <= 0.0:
        raise ModelError(f"pp-wave profile must be positive (min H = {np.min(H):.6g})", f"{pointer}/H")
    if alpha <= 0.5 * np.max(H):
        raise ModelError(f"alpha = {alpha:g} must exceed max H / 2 = {0.5 * np.max(H):.6g} "
                         "for a spacelike identification", f"{pointer}/alpha")
    pp = PPWaveModel(base_lengths=base, profile_H=profile, period_L=period, alpha=alpha)
    return ppwave_to_stationary(pp, name)


def validate_model(model: StationaryModel, points: Optional[Sequence[int]] = None):
    """Check positivity of N, the timelike condition and metric definiteness on a grid"""
    if points is None:
        points = [LabSettings.DEFAULT_GRID]
    grid = build_grid(model.torus_lengths, points)
    mesh = grid.mesh

    N = model.lapse.value(mesh)
    if not np.all(np.isfinite(N)) or np.min(N) <= 0.0:
        raise ModelError(f"lapse must be positive (min N = {np.nanmin(N):.6g})", '/model/lapse')

    h = np.moveaxis(model.metric(mesh), (0, 1), (-2, -1))
    if not np.all(np.isfinite(h)):
        raise ModelError("spatial metric has non-finite values", '/model/metric')
    eigs = np.linalg.eigvalsh(h)
    if np.min(eigs) <= 0.0:
        raise ModelError("spatial metric must be positive definite", '/model/metric')

    beta = np.moveaxis(model.shift_covector(mesh), 0, -1)
    beta_sq = np.einsum('...i,...i->...', beta, np.linalg.solve(h, beta[..., None])[..., 0])
    gap = N ** 2 - beta_sq
    if np.min(gap) <= 0.0:
        raise ModelError(f"Killing field is not timelike: N^2 - |beta|^2 = {np.min(gap):.6g} <= 0",
                         '/model/shift')

    V = model.potential.value(mesh)
    if not np.all(np.isfinite(V)):
        raise ModelError("potential has non-finite values", '/model/potential')
