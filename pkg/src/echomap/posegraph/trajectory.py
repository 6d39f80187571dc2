"""Timestamped pose samples with interpolation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .._validation import InvalidShapeError
from .se3 import SE3Transform


@dataclass(frozen=True)
class PoseTrajectory:
    """``positions`` (n, 3) in meters and ``quaternions`` (n, 4) as ``(w, x, y, z)``."""

    timestamps: np.ndarray
    positions: np.ndarray
    quaternions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float).reshape(-1)
        p = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        q = np.asarray(self.quaternions, dtype=float).reshape(-1, 4)
        if not (len(t) == len(p) == len(q)) or len(t) == 0:
            raise InvalidShapeError("timestamps, positions and quaternions must have equal non-zero length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        norms = np.linalg.norm(q, axis=1)
        if np.any(norms < 1e-12):
            raise ValueError("zero quaternion in trajectory")
        q = q / norms[:, None]
        for name, arr in (("timestamps", t), ("positions", p), ("quaternions", q)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_poses(cls, timestamps, poses) -> PoseTrajectory:
        return cls(
            timestamps,
            np.array([T.translation for T in poses]).reshape(-1, 3),
            np.array([T.quaternion() for T in poses]).reshape(-1, 4),
        )

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def t_start(self) -> float:
        return float(self.timestamps[0])

    @property
    def t_end(self) -> float:
        return float(self.timestamps[-1])

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def covers(self, t: float, tolerance: float = 0.0) -> bool:
        return self.t_start - tolerance <= t <= self.t_end + tolerance

    def pose(self, k: int) -> SE3Transform:
        return SE3Transform.from_quaternion(self.positions[k], self.quaternions[k])

    def _rotations(self) -> Rotation:
        w, x, y, z = self.quaternions.T
        return Rotation.from_quat(np.column_stack([x, y, z, w]))

    @cached_property
    def _slerp(self) -> Slerp:
        return Slerp(self.timestamps, self._rotations())

    def position_at(self, times) -> np.ndarray:
        """Linearly interpolated positions; times outside the span are clamped."""
        times = np.clip(np.asarray(times, dtype=float), self.t_start, self.t_end)
        return np.column_stack([np.interp(times, self.timestamps, self.positions[:, k]) for k in range(3)])

    def interpolate(self, t: float) -> SE3Transform:
        """Pose at ``t``: linear in position, slerp in rotation, clamped at the ends."""
        t = float(np.clip(t, self.t_start, self.t_end))
        pos = self.position_at([t])[0]
        if len(self) == 1:
            return SE3Transform.from_quaternion(pos, self.quaternions[0])
        R = self._slerp([t]).as_matrix()[0]
        return SE3Transform(R, pos)
