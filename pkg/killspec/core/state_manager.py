"""
Pipeline stage management
"""

from enum import Enum, auto
from typing import Any, Dict, Iterable, List, Optional

from .errors import ConfigError


class PipelineStage(Enum):
    SPECTRUM = auto()
    WEYL = auto()
    ORBITS = auto()
    TRACE = auto()
    FORMS = auto()
    VERIFY = auto()

    @property
    def key(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str, pointer: str = '/stages') -> 'PipelineStage':
        """Look up a stage by its config name"""
        try:
            return cls[str(name).upper()]
        except KeyError:
            names = ', '.join(s.key for s in cls)
            raise ConfigError(f"unknown stage '{name}' (expected one of {names})", pointer)


STAGE_DEPENDENCIES = {
    PipelineStage.SPECTRUM: (),
    PipelineStage.WEYL: (PipelineStage.SPECTRUM,),
    PipelineStage.ORBITS: (),
    PipelineStage.TRACE: (PipelineStage.SPECTRUM, PipelineStage.ORBITS),
    PipelineStage.FORMS: (PipelineStage.SPECTRUM,),
    PipelineStage.VERIFY: (),
}


def dependency_closure(stages: Iterable[PipelineStage]) -> List[PipelineStage]:
    """Requested stages plus everything they depend on, in execution order"""
    wanted = set()
    pending = list(stages)
    while pending:
        stage = pending.pop()
        if stage not in wanted:
            wanted.add(stage)
            pending.extend(STAGE_DEPENDENCIES[stage])
    # Enum order is a valid topological order of the stage graph
    return [stage for stage in PipelineStage if stage in wanted]


class StageManager:
    """Tracks the current stage, stage outputs and failures of one pipeline run"""

    def __init__(self, stages: Iterable[PipelineStage]):
        self.requested = list(stages)
        self.plan = dependency_closure(self.requested)
        self.current_stage: Optional[PipelineStage] = None
        self.previous_stage: Optional[PipelineStage] = None
        self.stage_data: Dict[PipelineStage, Any] = {}
        self.failed: Dict[PipelineStage, Exception] = {}
        self.skipped: List[PipelineStage] = []

    def change_stage(self, new_stage: PipelineStage):
        """Enter a new stage"""
        self.previous_stage = self.current_stage
        self.current_stage = new_stage

    def is_stage(self, stage: PipelineStage) -> bool:
        return self.current_stage == stage

    def blocked_by(self, stage: PipelineStage) -> List[PipelineStage]:
        """Dependencies of a stage that failed or were skipped"""
        return [dep for dep in STAGE_DEPENDENCIES[stage] if dep in self.failed or dep in self.skipped]

    def mark_failed(self, stage: PipelineStage, error: Exception):
        self.failed[stage] = error

    def mark_skipped(self, stage: PipelineStage):
        self.skipped.append(stage)

    def get_data(self, stage: PipelineStage, default=None):
        """Output of a finished stage"""
        return self.stage_data.get(stage, default)

    def set_data(self, stage: PipelineStage, value: Any):
        self.stage_data[stage] = value

    @property
    def succeeded(self) -> bool:
        return not self.failed and not self.skipped
