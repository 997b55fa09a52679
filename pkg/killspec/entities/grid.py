"""
Uniform periodic collocation grid
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..core.errors import ConfigError
from ..core.settings import LabSettings


@dataclass(frozen=True)
class SpectralGrid:
    """Tensor grid x_k = k L_i / M_i on the torus, endpoint excluded"""

    lengths: Tuple[float, ...]
    points_per_axis: Tuple[int, ...]
    nodes: List[np.ndarray] = field(init=False, repr=False, compare=False)
    mesh: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = [np.arange(m) * (length / m) for m, length in zip(self.points_per_axis, self.lengths)]
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'mesh', np.stack(np.meshgrid(*nodes, indexing='ij')))

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.points_per_axis)

    @property
    def total_size(self) -> int:
        return int(np.prod(self.points_per_axis))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([L / m for L, m in zip(self.lengths, self.points_per_axis)]))

    def wavenumbers(self, axis: int) -> np.ndarray:
        """Angular wavenumbers in FFT order along one axis"""
        m = self.points_per_axis[axis]
        return 2.0 * np.pi * np.fft.fftfreq(m, d=self.lengths[axis] / m)

    def flat_points(self) -> np.ndarray:
        """Nodes as a (d, total_size) array in row-major order"""
        return self.mesh.reshape(self.dim, -1)


def build_grid(lengths: Sequence[float], points: Sequence[int]) -> SpectralGrid:
    """Validate per-axis sizes and build the grid"""
    lengths = tuple(float(v) for v in lengths)
    points = tuple(int(m) for m in points)
    if len(points) == 1 and len(lengths) > 1:
        points = points * len(lengths)
    if len(points) != len(lengths):
        raise ConfigError(f"grid has {len(points)} axes but the torus has {len(lengths)}", '/grid')
    for axis, m in enumerate(points):
        if m % 2 or m < LabSettings.MIN_GRID:
            raise ConfigError(f"grid size {m} on axis {axis + 1} must be even and >= "
                              f"{LabSettings.MIN_GRID}", f'/grid/{axis}')
    return SpectralGrid(lengths, points)
