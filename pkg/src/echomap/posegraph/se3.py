"""Rigid transforms in SE(3) and their exponential/log maps.

Twists are ordered ``(rho, phi)``: translational part first, rotation vector
second. Rotation-vector conversions go through ``scipy.spatial.transform``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

ORTHO_TOL = 1e-9
_SMALL_ANGLE = 1e-8


def hat(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _left_jacobian_so3(phi: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(phi)
    K = hat(phi)
    if theta < _SMALL_ANGLE:
        return np.eye(3) + 0.5 * K + K @ K / 6.0
    return (
        np.eye(3)
        + (1 - np.cos(theta)) / theta**2 * K
        + (theta - np.sin(theta)) / theta**3 * K @ K
    )


def _inv_left_jacobian_so3(phi: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(phi)
    K = hat(phi)
    if theta < _SMALL_ANGLE:
        return np.eye(3) - 0.5 * K + K @ K / 12.0
    half = 0.5 * theta
    coeff = (1.0 - half * np.cos(half) / np.sin(half)) / theta**2
    return np.eye(3) - 0.5 * K + coeff * K @ K


def _q_matrix(rho: np.ndarray, phi: np.ndarray) -> np.ndarray:
    P, Rh = hat(phi), hat(rho)
    theta = np.linalg.norm(phi)
    if theta < 1e-4:
        a, b, c = 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0
    else:
        s, co = np.sin(theta), np.cos(theta)
        a = (theta - s) / theta**3
        b = (theta**2 + 2 * co - 2) / (2 * theta**4)
        c = (2 * theta - 3 * s + theta * co) / (2 * theta**5)
    PR, RP, PRP = P @ Rh, Rh @ P, P @ Rh @ P
    return 0.5 * Rh + a * (PR + RP + PRP) + b * (P @ PR + RP @ P - 3 * PRP) + c * (PRP @ P + P @ PRP)


def inv_left_jacobian(xi) -> np.ndarray:
    """Inverse of the SE(3) left Jacobian at twist ``xi``."""
    xi = np.asarray(xi, dtype=float)
    rho, phi = xi[:3], xi[3:]
    Jinv = _inv_left_jacobian_so3(phi)
    out = np.zeros((6, 6))
    out[:3, :3] = Jinv
    out[3:, 3:] = Jinv
    out[:3, 3:] = -Jinv @ _q_matrix(rho, phi) @ Jinv
    return out


def inv_right_jacobian(xi) -> np.ndarray:
    """``log(exp(xi) exp(d)) ~ xi + inv_right_jacobian(xi) @ d`` for small ``d``."""
    return inv_left_jacobian(-np.asarray(xi, dtype=float))


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(R)
    D = np.diag([1.0, 1.0, np.linalg.det(U @ Vt)])
    return U @ D @ Vt


@dataclass(frozen=True)
class SE3Transform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-6) or np.linalg.det(R) <= 0:
            raise ValueError("rotation must be a proper orthonormal matrix")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL or abs(np.linalg.det(R) - 1) > ORTHO_TOL:
            R = orthonormalize(R)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> SE3Transform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, M) -> SE3Transform:
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3])

    @classmethod
    def from_translation(cls, t) -> SE3Transform:
        return cls(np.eye(3), t)

    @classmethod
    def from_quaternion(cls, t, q_wxyz) -> SE3Transform:
        w, x, y, z = q_wxyz
        return cls(Rotation.from_quat([x, y, z, w]).as_matrix(), t)

    @classmethod
    def exp(cls, xi) -> SE3Transform:
        xi = np.asarray(xi, dtype=float)
        rho, phi = xi[:3], xi[3:]
        R = Rotation.from_rotvec(phi).as_matrix()
        return cls(R, _left_jacobian_so3(phi) @ rho)

    def log(self) -> np.ndarray:
        phi = Rotation.from_matrix(self.rotation).as_rotvec()
        rho = _inv_left_jacobian_so3(phi) @ self.translation
        return np.concatenate([rho, phi])

    def quaternion(self) -> np.ndarray:
        """Unit quaternion ``(w, x, y, z)`` with ``w >= 0``."""
        x, y, z, w = Rotation.from_matrix(self.rotation).as_quat()
        q = np.array([w, x, y, z])
        return -q if w < 0 else q

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def adjoint(self) -> np.ndarray:
        """6x6 adjoint for ``(rho, phi)`` twists: ``exp(Ad xi) = T exp(xi) T^-1``."""
        R, t = self.rotation, self.translation
        A = np.zeros((6, 6))
        A[:3, :3] = R
        A[:3, 3:] = hat(t) @ R
        A[3:, 3:] = R
        return A

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def rotation_angle(self) -> float:
        return float(np.linalg.norm(Rotation.from_matrix(self.rotation).as_rotvec()))

    def __matmul__(self, other: SE3Transform) -> SE3Transform:
        return compose(self, other)


def compose(a: SE3Transform, b: SE3Transform) -> SE3Transform:
    """``a * b`` as homogeneous matrices."""
    return SE3Transform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(a: SE3Transform) -> SE3Transform:
    Rt = a.rotation.T
    return SE3Transform(Rt, -Rt @ a.translation)


def chain(transforms) -> SE3Transform:
    """Left-to-right product of a sequence of relative transforms."""
    out = SE3Transform.identity()
    for T in transforms:
        out = compose(out, T)
    return out
