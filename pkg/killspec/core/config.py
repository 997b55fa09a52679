"""
Run configuration parsing and validation
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

from ..entities.model import StationaryModel, build_model
from .errors import ConfigError
from .settings import LabSettings
from .state_manager import PipelineStage

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = ('model', 'grid', 'tolerances', 'stages', 'out_dir', 'use_cache', 'seed',
                  'threads', 'dealias', 'route', 'orbits', 'trace', 'weyl')
ROUTES = ('auto', 'companion', 'symmetric')
MAX_SEED = 2 ** 64


@dataclass(frozen=True)
class RunConfig:
    """Validated run description with every default filled in"""

    model: Dict[str, Any]
    grid: Tuple[int, ...]
    stages: Tuple[PipelineStage, ...]
    out_dir: str
    tolerances: Dict[str, float] = field(default_factory=LabSettings.tolerances)
    use_cache: bool = True
    seed: int = 0
    threads: int = 1
    dealias: bool = False
    route: str = 'auto'
    orbits: Dict[str, Any] = field(default_factory=lambda: dict(LabSettings.defaults()['orbits']))
    trace: Dict[str, Any] = field(default_factory=lambda: dict(LabSettings.defaults()['trace']))
    weyl: Dict[str, Any] = field(default_factory=lambda: {'window': None})

    def build_model(self) -> StationaryModel:
        return build_model(self.model, self.grid)

    def describe(self) -> Dict[str, Any]:
        """JSON-ready form, the basis of cache keys and the manifest"""
        return {
            'model': self.model,
            'grid': list(self.grid),
            'tolerances': dict(sorted(self.tolerances.items())),
            'stages': [s.key for s in self.stages],
            'seed': self.seed,
            'dealias': self.dealias,
            'route': self.route,
            'orbits': self.orbits,
            'trace': self.trace,
            'weyl': self.weyl,
        }


def _integer(value: Any, pointer: str, minimum: int = 0, maximum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("must be an integer", pointer)
    if value < minimum or (maximum is not None and value >= maximum):
        bound = f">= {minimum}" if maximum is None else f"in [{minimum}, {maximum})"
        raise ConfigError(f"must be {bound}, got {value}", pointer)
    return value


def _positive(value: Any, pointer: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError("must be a positive number", pointer)
    return float(value)


def _boolean(value: Any, pointer: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError("must be true or false", pointer)
    return value


def _object(raw: Any, pointer: str, allowed: Sequence[str]) -> Dict[str, Any]:
    if not isinstance(raw, dict):
        raise ConfigError("must be an object", pointer)
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'", f"{pointer}/{unknown[0]}")
    return raw


def _grid(raw: Any) -> Tuple[int, ...]:
    if isinstance(raw, list):
        if not raw:
            raise ConfigError("grid needs at least one size", '/grid')
        return tuple(_integer(v, f'/grid/{i}', minimum=1) for i, v in enumerate(raw))
    return (_integer(raw, '/grid', minimum=1),)


def _tolerances(raw: Any) -> Dict[str, float]:
    defaults = LabSettings.tolerances()
    values = _object(raw, '/tolerances', list(defaults))
    merged = dict(defaults)
    for key, value in values.items():
        merged[key] = _positive(value, f'/tolerances/{key}')
    return merged


def _stages(raw: Any) -> Tuple[PipelineStage, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("stages must be a non-empty list", '/stages')
    stages = []
    for i, name in enumerate(raw):
        stage = PipelineStage.from_name(name, f'/stages/{i}')
        if stage not in stages:
            stages.append(stage)
    return tuple(stages)


def _orbits(raw: Any, dim: int) -> Dict[str, Any]:
    defaults = LabSettings.defaults()['orbits']
    values = _object(raw, '/orbits', list(defaults) + ['windings'])
    out = dict(defaults)
    if 't_max' in values:
        out['t_max'] = _positive(values['t_max'], '/orbits/t_max')
    if 'seeds_per_winding' in values:
        out['seeds_per_winding'] = _integer(values['seeds_per_winding'], '/orbits/seeds_per_winding', minimum=1)
    if 'scan_seeds' in values:
        out['scan_seeds'] = _integer(values['scan_seeds'], '/orbits/scan_seeds')
    windings = values.get('windings')
    if windings is not None:
        if not isinstance(windings, list):
            raise ConfigError("windings must be a list of integer vectors", '/orbits/windings')
        checked = []
        for i, w in enumerate(windings):
            pointer = f'/orbits/windings/{i}'
            if not isinstance(w, list) or len(w) != dim:
                raise ConfigError(f"winding must list {dim} integers", pointer)
            vector = [_integer(k, f'{pointer}/{j}', minimum=-MAX_SEED) for j, k in enumerate(w)]
            if not any(vector):
                raise ConfigError("winding must be nonzero", pointer)
            checked.append(vector)
        out['windings'] = checked
    return out


def _trace(raw: Any) -> Dict[str, Any]:
    defaults = LabSettings.defaults()['trace']
    values = _object(raw, '/trace', list(defaults))
    out = dict(defaults)
    for key in ('window', 't_max'):
        if key in values:
            out[key] = _positive(values[key], f'/trace/{key}')
    if 'samples_per_unit' in values:
        out['samples_per_unit'] = _integer(values['samples_per_unit'], '/trace/samples_per_unit', minimum=1)
    return out


def _weyl(raw: Any) -> Dict[str, Any]:
    values = _object(raw, '/weyl', ['window'])
    window = values.get('window')
    if window is None:
        return {'window': None}
    if not isinstance(window, list) or len(window) != 2:
        raise ConfigError("window must be [lambda_lo, lambda_hi]", '/weyl/window')
    lo = _positive(window[0], '/weyl/window/0')
    hi = _positive(window[1], '/weyl/window/1')
    if hi / lo < LabSettings.WEYL_MIN_RATIO:
        raise ConfigError(f"lambda_hi / lambda_lo must be at least {LabSettings.WEYL_MIN_RATIO:g}",
                          '/weyl/window')
    return {'window': [lo, hi]}


def config_from_dict(raw: Any, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Validate a parsed config document, apply CLI overrides and fill defaults"""
    raw = _object(raw, '', TOP_LEVEL_KEYS)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if 'model' not in raw:
        raise ConfigError("missing required section 'model'", '/model')

    grid = _grid(overrides['grid']) if 'grid' in overrides else _grid(raw.get('grid', LabSettings.DEFAULT_GRID))
    model = build_model(raw['model'], grid)

    stages = _stages(overrides['stages']) if 'stages' in overrides else \
        _stages(raw.get('stages', list(LabSettings.DEFAULT_STAGES)))
    out_dir = overrides.get('out_dir') or os.environ.get(LabSettings.OUT_ENV) or \
        raw.get('out_dir', LabSettings.DEFAULT_OUT)
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir must be a non-empty path", '/out_dir')

    route = raw.get('route', 'auto')
    if route not in ROUTES:
        raise ConfigError(f"route must be one of {', '.join(ROUTES)}", '/route')

    config = RunConfig(
        model=raw['model'],
        grid=grid,
        stages=stages,
        out_dir=str(out_dir),
        tolerances=_tolerances(raw.get('tolerances', {})),
        use_cache=_boolean(raw.get('use_cache', True), '/use_cache'),
        seed=_integer(raw.get('seed', 0), '/seed', maximum=MAX_SEED),
        threads=_integer(raw.get('threads', 1), '/threads', minimum=1),
        dealias=_boolean(raw.get('dealias', False), '/dealias'),
        route=route,
        orbits=_orbits(raw.get('orbits', {}), model.dim),
        trace=_trace(raw.get('trace', {})),
        weyl=_weyl(raw.get('weyl', {})),
    )
    if 'seed' in overrides:
        config = replace(config, seed=_integer(overrides['seed'], '--seed', maximum=MAX_SEED))
    if 'threads' in overrides:
        config = replace(config, threads=_integer(overrides['threads'], '--threads', minimum=1))
    if overrides.get('no_cache'):
        config = replace(config, use_cache=False)
    logger.debug(f"Config: stages {[s.key for s in config.stages]}, grid {config.grid}, out {config.out_dir}")
    return config


def parse_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read a JSON run config from disk"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}")
    return config_from_dict(raw, overrides)


def parse_grid_option(text: Optional[str]) -> Optional[list]:
    """--grid M[,M...] into a list of sizes"""
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ConfigError(f"--grid expects comma-separated integers, got '{text}'", '/grid')
