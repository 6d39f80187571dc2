"""Pinhole projection of homogeneous world points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .se3 import SE3Transform


class BehindCameraError(ValueError):
    pass


@dataclass(frozen=True)
class CameraModel:
    """``intrinsics`` is the 3x3 calibration matrix; ``extrinsics`` maps world to camera."""

    intrinsics: np.ndarray
    extrinsics: SE3Transform = field(default_factory=SE3Transform.identity)

    def __post_init__(self):
        K = np.array(self.intrinsics, dtype=float).reshape(3, 3)
        if not np.allclose(np.tril(K, -1), 0.0) or K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("intrinsics must be upper-triangular with positive focal lengths")
        object.__setattr__(self, "intrinsics", K)

    @classmethod
    def simple(cls, focal: float, cx: float = 0.0, cy: float = 0.0, extrinsics=None) -> CameraModel:
        K = np.array([[focal, 0.0, cx], [0.0, focal, cy], [0.0, 0.0, 1.0]])
        return cls(K, extrinsics or SE3Transform.identity())


def project_pinhole(camera: CameraModel, point) -> np.ndarray:
    """Pixel coordinates ``(x_im, y_im)`` of a 3-D point (homogeneous or not)."""
    p = np.asarray(point, dtype=float).reshape(-1)
    if p.size == 4:
        if p[3] == 0:
            raise BehindCameraError("point at infinity has no finite projection")
        p = p[:3] / p[3]
    cam = camera.extrinsics.apply(p)
    if cam[2] <= 0:
        raise BehindCameraError(f"point has non-positive depth {cam[2]} in the camera frame")
    uvw = camera.intrinsics @ cam
    return uvw[:2] / uvw[2]
