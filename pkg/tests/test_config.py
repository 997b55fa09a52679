import json

import pytest

from killspec.core import benchmarks
from killspec.core.config import config_from_dict, parse_config, parse_grid_option
from killspec.core.errors import ConfigError
from killspec.core.settings import LabSettings
from killspec.core.state_manager import PipelineStage


def _raw(**extra) -> dict:
    raw = {'model': benchmarks.ultrastatic_circle(), 'grid': 16, 'out_dir': 'unused'}
    raw.update(extra)
    return raw


def test_defaults_are_filled(monkeypatch) -> None:
    monkeypatch.delenv(LabSettings.OUT_ENV, raising=False)
    config = config_from_dict({'model': benchmarks.ultrastatic_circle()})
    assert config.grid == (LabSettings.DEFAULT_GRID,)
    assert config.stages == (PipelineStage.SPECTRUM,)
    assert config.out_dir == LabSettings.DEFAULT_OUT
    assert config.tolerances == LabSettings.tolerances()
    assert config.use_cache
    assert config.seed == 0
    assert config.route == 'auto'
    assert config.trace['window'] == LabSettings.DEFAULT_WINDOW


def test_missing_model_section() -> None:
    with pytest.raises(ConfigError) as info:
        config_from_dict({'grid': 16})
    assert info.value.pointer == '/model'
    assert info.value.exit_code == 2


def test_unknown_top_level_key() -> None:
    with pytest.raises(ConfigError) as info:
        config_from_dict(_raw(colour='blue'))
    assert info.value.pointer == '/colour'


@pytest.mark.parametrize('raw,pointer', [
    ({'grid': 15}, '/grid/0'),
    ({'grid': [16, 16]}, '/grid'),
    ({'tolerances': {'tol_resid': -1.0}}, '/tolerances/tol_resid'),
    ({'tolerances': {'tol_bogus': 1.0}}, '/tolerances/tol_bogus'),
    ({'stages': ['spectrum', 'fourier']}, '/stages/1'),
    ({'stages': []}, '/stages'),
    ({'seed': -1}, '/seed'),
    ({'seed': 2 ** 64}, '/seed'),
    ({'threads': 0}, '/threads'),
    ({'route': 'qz'}, '/route'),
    ({'use_cache': 'yes'}, '/use_cache'),
    ({'weyl': {'window': [3.0, 5.0]}}, '/weyl/window'),
    ({'trace': {'window': 0}}, '/trace/window'),
    ({'orbits': {'windings': [[0]]}}, '/orbits/windings/0'),
    ({'orbits': {'windings': [[1, 0]]}}, '/orbits/windings/0'),
])
def test_invalid_fields_report_their_pointer(raw: dict, pointer: str) -> None:
    with pytest.raises(ConfigError) as info:
        config_from_dict(_raw(**raw))
    assert info.value.pointer == pointer


def test_overrides_win_over_file_values() -> None:
    overrides = {'grid': [32], 'stages': ['weyl'], 'out_dir': 'elsewhere', 'seed': 5, 'threads': 2,
                 'no_cache': True}
    config = config_from_dict(_raw(seed=1), overrides)
    assert config.grid == (32,)
    assert config.stages == (PipelineStage.WEYL,)
    assert config.out_dir == 'elsewhere'
    assert config.seed == 5
    assert config.threads == 2
    assert not config.use_cache


def test_none_overrides_are_ignored() -> None:
    config = config_from_dict(_raw(seed=3), {'seed': None, 'grid': None})
    assert config.seed == 3
    assert config.grid == (16,)


def test_environment_sets_output_directory(monkeypatch) -> None:
    monkeypatch.setenv(LabSettings.OUT_ENV, 'from_env')
    raw = _raw()
    del raw['out_dir']
    assert config_from_dict(raw).out_dir == 'from_env'


def test_duplicate_stages_collapse() -> None:
    config = config_from_dict(_raw(stages=['trace', 'spectrum', 'trace']))
    assert config.stages == (PipelineStage.TRACE, PipelineStage.SPECTRUM)


def test_describe_is_json_ready() -> None:
    config = config_from_dict(_raw(weyl={'window': [2.0, 5.0]}))
    described = json.loads(json.dumps(config.describe()))
    assert described['grid'] == [16]
    assert described['weyl'] == {'window': [2.0, 5.0]}
    assert described['stages'] == ['spectrum']


def test_parse_config_from_file(tmp_path) -> None:
    path = tmp_path / 'run.json'
    path.write_text(json.dumps(_raw(stages=['orbits'])), encoding='utf-8')
    config = parse_config(path)
    assert config.stages == (PipelineStage.ORBITS,)
    assert config.build_model().name == 'ultrastatic_circle'


def test_parse_config_errors(tmp_path) -> None:
    with pytest.raises(ConfigError):
        parse_config(tmp_path / 'absent.json')
    broken = tmp_path / 'broken.json'
    broken.write_text('{"model": ', encoding='utf-8')
    with pytest.raises(ConfigError) as info:
        parse_config(broken)
    assert 'not valid JSON' in info.value.message


def test_grid_option() -> None:
    assert parse_grid_option(None) is None
    assert parse_grid_option('32') == [32]
    assert parse_grid_option('16,24') == [16, 24]
    with pytest.raises(ConfigError):
        parse_grid_option('16,x')
