"""Pairing impacts with robot poses and grouping them by tap location."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..posegraph.se3 import SE3Transform, compose
from ..posegraph.trajectory import PoseTrajectory
from ..signal.spectral import dft, fd
from ..signal.types import SignalOfInterest, Spectrum

GROUP_DISTANCE_M = 0.03
SYNC_TOLERANCE_S = 0.05


@dataclass(frozen=True)
class Measurement:
    acoustic: SignalOfInterest = field(repr=False)
    pose: SE3Transform = field(repr=False)
    fd_value: float
    spectrum: Spectrum = field(repr=False)
    position: np.ndarray
    soi_index: int = 0

    @property
    def t_start(self) -> float:
        return self.acoustic.t_start


@dataclass
class TapGroup:
    measurements: list = field(default_factory=list)

    @property
    def positions(self) -> np.ndarray:
        return np.array([m.position for m in self.measurements]).reshape(-1, 3)

    @property
    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def __len__(self) -> int:
        return len(self.measurements)

    def accepts(self, m: Measurement, max_distance: float) -> bool:
        """True if ``m`` and every member stay within ``max_distance`` of the grown centroid."""
        if not self.measurements:
            return True
        if np.linalg.norm(m.position - self.centroid) >= max_distance:
            return False
        pts = np.vstack([self.positions, m.position])
        return bool(np.all(np.linalg.norm(pts - pts.mean(axis=0), axis=1) < max_distance))


@dataclass
class SyncResult:
    measurements: list
    groups: list
    unmatched: list

    @property
    def centroids(self) -> np.ndarray:
        return np.array([g.centroid for g in self.groups]).reshape(-1, 3)


def sync_measurements(
    sois: list,
    trajectory: PoseTrajectory,
    tolerance: float = SYNC_TOLERANCE_S,
    group_distance: float = GROUP_DISTANCE_M,
    tap_offset: SE3Transform | None = None,
) -> SyncResult:
    """Attach the pose interpolated at each SOI's ``t_start`` and group by location.

    SOIs more than ``tolerance`` seconds outside the trajectory span are
    listed in ``unmatched`` by index. The impact point is the translation of
    ``pose * tap_offset`` (identity offset: the pose translation itself).
    A new group starts when a measurement lies ``group_distance`` or more
    from the running centroid of the current one.
    """
    measurements, unmatched = [], []
    for k, soi in enumerate(sois):
        if not trajectory.covers(soi.t_start, tolerance):
            unmatched.append(k)
            continue
        pose = trajectory.interpolate(soi.t_start)
        point = compose(pose, tap_offset).translation if tap_offset is not None else pose.translation
        spectrum = dft(soi)
        measurements.append(Measurement(soi, pose, fd(spectrum), spectrum, np.array(point), k))

    groups: list[TapGroup] = []
    for m in measurements:
        if not groups or not groups[-1].accepts(m, group_distance):
            groups.append(TapGroup())
        groups[-1].measurements.append(m)
    return SyncResult(measurements, groups, unmatched)
