import pytest

from killspec.core.errors import ConfigError
from killspec.core.state_manager import PipelineStage, StageManager, dependency_closure


def test_stage_lookup_by_name() -> None:
    assert PipelineStage.from_name('trace') is PipelineStage.TRACE
    assert PipelineStage.from_name('WEYL') is PipelineStage.WEYL
    assert PipelineStage.TRACE.key == 'trace'
    with pytest.raises(ConfigError) as info:
        PipelineStage.from_name('plot', '/stages/2')
    assert info.value.pointer == '/stages/2'


def test_dependency_closure_orders_stages() -> None:
    assert dependency_closure([PipelineStage.TRACE]) == [
        PipelineStage.SPECTRUM, PipelineStage.ORBITS, PipelineStage.TRACE]
    assert dependency_closure([PipelineStage.FORMS, PipelineStage.WEYL]) == [
        PipelineStage.SPECTRUM, PipelineStage.WEYL, PipelineStage.FORMS]
    assert dependency_closure([PipelineStage.VERIFY]) == [PipelineStage.VERIFY]
    assert dependency_closure([PipelineStage.ORBITS]) == [PipelineStage.ORBITS]


def test_failed_stage_blocks_dependents() -> None:
    manager = StageManager([PipelineStage.TRACE, PipelineStage.WEYL])
    assert manager.plan == [PipelineStage.SPECTRUM, PipelineStage.WEYL, PipelineStage.ORBITS, PipelineStage.TRACE]
    manager.mark_failed(PipelineStage.ORBITS, RuntimeError('no orbits'))
    assert manager.blocked_by(PipelineStage.TRACE) == [PipelineStage.ORBITS]
    assert manager.blocked_by(PipelineStage.WEYL) == []
    assert not manager.succeeded


def test_skipped_stage_blocks_too() -> None:
    manager = StageManager([PipelineStage.FORMS])
    manager.mark_skipped(PipelineStage.SPECTRUM)
    assert manager.blocked_by(PipelineStage.FORMS) == [PipelineStage.SPECTRUM]


def test_stage_transitions_and_data() -> None:
    manager = StageManager([PipelineStage.SPECTRUM])
    manager.change_stage(PipelineStage.SPECTRUM)
    assert manager.is_stage(PipelineStage.SPECTRUM)
    manager.change_stage(PipelineStage.WEYL)
    assert manager.previous_stage is PipelineStage.SPECTRUM
    assert manager.get_data(PipelineStage.SPECTRUM, 'none') == 'none'
    manager.set_data(PipelineStage.SPECTRUM, [1, 2])
    assert manager.get_data(PipelineStage.SPECTRUM) == [1, 2]
    assert manager.succeeded
