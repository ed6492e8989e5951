"""Run trajectories shared by the algorithm drivers and the harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RunRecord:
    """Best-so-far trajectory of one optimization run.

    trajectory[0] is the best of the initial population; trajectory[g] the
    best after generation g. Elitist drivers guarantee it is non-increasing.
    """

    algorithm: str
    problem: str
    seed: int
    trajectory: np.ndarray
    evaluations: int
    best_solution: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "trajectory", np.asarray(self.trajectory, dtype=float))
        if self.trajectory.ndim != 1 or self.trajectory.size < 1:
            raise ValueError("trajectory must be a nonempty vector")

    @property
    def final_best(self) -> float:
        return float(self.trajectory[-1])

    @property
    def generations(self) -> int:
        return self.trajectory.size - 1
