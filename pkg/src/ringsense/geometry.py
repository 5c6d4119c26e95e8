"""Rigid transforms, pinhole projection, pose deltas, and the symmetric
normal-matrix orientation encoding.

Conventions (used package-wide):
  - Lengths in millimeters, angles in radians.
  - A plate pose maps plate-frame points into the camera frame:
    ``p_cam = R @ p_plate + t``. The camera looks along +z; only points
    with z > 0 project.
  - Pose deltas are expressed in the *reference* frame: the translation
    delta is ``R_ref.T @ (t_cur - t_ref)`` and the rotation delta is the
    intrinsic X-Y-Z Euler decomposition of ``R_ref.T @ R_cur``
    (``R_rel = Rx(a) @ Ry(b) @ Rz(c)``). Serialized deltas carry the
    convention tag ``"XYZ-intrinsic"``.
  - Euler deltas are restricted to ``|angle| < pi/2``; the ring's physical
    deformation is far smaller, and the restriction keeps the
    decomposition unique and gimbal-lock free.

All types are immutable values and all operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EulerOutOfRange,
    NonPositiveDepth,
    NotUnitVector,
    ValidationFailure,
)

EULER_CONVENTION = "XYZ-intrinsic"

_ORTHO_TOL = 1e-9
_ANGLE_LIMIT = math.pi / 2


def _frozen_array(values, shape: tuple[int, ...], name: str) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.shape != shape:
        raise ValidationFailure(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationFailure(f"{name} must be finite")
    a = a.copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) pose: 3x3 orthonormal rotation plus translation in mm."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = _frozen_array(self.rotation, (3, 3), "rotation")
        t = _frozen_array(self.translation, (3,), "translation")
        if np.linalg.norm(r.T @ r - np.eye(3)) >= _ORTHO_TOL:
            raise ValidationFailure("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) >= _ORTHO_TOL:
            raise ValidationFailure("rotation determinant is not +1 within 1e-9")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map plate-frame point(s), shape (3,) or (n, 3), into the camera frame."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RigidTransform":
        return cls(np.array(data["rotation"]), np.array(data["translation"]))


@dataclass(frozen=True)
class PinholeCamera:
    """Intrinsics of an ideal pinhole camera (pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    image_width: float
    image_height: float

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationFailure("focal lengths must be positive")
        if not (0 <= self.cx <= self.image_width and 0 <= self.cy <= self.image_height):
            raise ValidationFailure("principal point must lie inside the image")

    def contains(self, uv: np.ndarray) -> bool:
        u, v = float(uv[0]), float(uv[1])
        return 0.0 <= u <= self.image_width and 0.0 <= v <= self.image_height

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "image_width": self.image_width,
            "image_height": self.image_height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PinholeCamera":
        return cls(
            fx=float(data["fx"]),
            fy=float(data["fy"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            image_width=float(data["image_width"]),
            image_height=float(data["image_height"]),
        )


def default_camera(
    horizontal_fov_deg: float = 120.0,
    image_width: int = 256,
    image_height: int = 192,
) -> PinholeCamera:
    """Camera with a 120 deg horizontal field of view at 256 px width.

    fx = (width/2) / tan(fov/2) ~= 73.9 px by default.
    """
    f = (image_width / 2.0) / math.tan(math.radians(horizontal_fov_deg) / 2.0)
    return PinholeCamera(
        fx=f,
        fy=f,
        cx=image_width / 2.0,
        cy=image_height / 2.0,
        image_width=float(image_width),
        image_height=float(image_height),
    )


@dataclass(frozen=True)
class DeformationVector:
    """Pose change relative to the no-contact reference.

    ``dl_*`` are translation deltas in mm expressed in the reference frame;
    ``dtheta_*`` are intrinsic X-Y-Z Euler angle deltas in rad.
    """

    dl_x: float
    dl_y: float
    dl_z: float
    dtheta_x: float
    dtheta_y: float
    dtheta_z: float

    def __post_init__(self) -> None:
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise ValidationFailure("deformation components must be finite")
        if np.any(np.abs(values[3:]) >= _ANGLE_LIMIT):
            raise EulerOutOfRange(
                "euler deltas must satisfy |angle| < pi/2 (operating regime)"
            )

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.dl_x, self.dl_y, self.dl_z, self.dtheta_x, self.dtheta_y, self.dtheta_z]
        )

    @classmethod
    def from_array(cls, values) -> "DeformationVector":
        v = np.asarray(values, dtype=np.float64)
        if v.shape != (6,):
            raise ValidationFailure(f"deformation vector must have 6 components, got {v.shape}")
        return cls(*(float(x) for x in v))

    @classmethod
    def zero(cls) -> "DeformationVector":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class NormalMatrix6:
    """Upper-triangular entries of M = n n^T for a unit normal n.

    The encoding is invariant to the sign of n and has unit trace; the
    reconstructed matrix is symmetric, idempotent, and rank 1.
    """

    m00: float
    m01: float
    m02: float
    m11: float
    m12: float
    m22: float

    def __post_init__(self) -> None:
        m = self.as_matrix()
        if abs(np.trace(m) - 1.0) >= 1e-9:
            raise ValidationFailure("normal matrix trace must be 1 within 1e-9")
        if np.max(np.abs(m @ m - m)) >= 1e-9:
            raise ValidationFailure("normal matrix must be idempotent within 1e-9")

    def as_array(self) -> np.ndarray:
        return np.array([self.m00, self.m01, self.m02, self.m11, self.m12, self.m22])

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.m00, self.m01, self.m02],
                [self.m01, self.m11, self.m12],
                [self.m02, self.m12, self.m22],
            ]
        )


def project(camera: PinholeCamera, point_cam: np.ndarray) -> np.ndarray:
    """Project one camera-frame point (mm) to pixel coordinates.

    Raises:
        NonPositiveDepth: if the point is at or behind the camera (z <= 0).
    """
    p = np.asarray(point_cam, dtype=np.float64)
    z = p[2]
    if z <= 0:
        raise NonPositiveDepth(f"point depth must be positive, got z={z}")
    return np.array([camera.fx * p[0] / z + camera.cx, camera.fy * p[1] / z + camera.cy])


def project_points(camera: PinholeCamera, points_cam: np.ndarray) -> np.ndarray:
    """Vectorized projection of (n, 3) camera-frame points to (n, 2) pixels."""
    p = np.asarray(points_cam, dtype=np.float64)
    z = p[:, 2]
    if np.any(z <= 0):
        raise NonPositiveDepth("all point depths must be positive")
    uv = np.empty((p.shape[0], 2))
    uv[:, 0] = camera.fx * p[:, 0] / z + camera.cx
    uv[:, 1] = camera.fy * p[:, 1] / z + camera.cy
    return uv


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Composition a after b: (R_a R_b, R_a t_b + t_a)."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def rotation_from_euler_xyz(rx: float, ry: float, rz: float) -> np.ndarray:
    """Rotation matrix Rx(rx) @ Ry(ry) @ Rz(rz) (intrinsic X-Y-Z)."""
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    rot_x = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    rot_y = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rot_z = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    return rot_x @ rot_y @ rot_z


def euler_xyz_from_rotation(rotation: np.ndarray) -> tuple[float, float, float]:
    """Recover (rx, ry, rz) with R = Rx Ry Rz, valid for |angles| < pi/2.

    Raises:
        EulerOutOfRange: if any extracted angle magnitude reaches pi/2.
    """
    r = np.asarray(rotation, dtype=np.float64)
    ry = math.asin(max(-1.0, min(1.0, r[0, 2])))
    rx = math.atan2(-r[1, 2], r[2, 2])
    rz = math.atan2(-r[0, 1], r[0, 0])
    if max(abs(rx), abs(ry), abs(rz)) >= _ANGLE_LIMIT:
        raise EulerOutOfRange("relative rotation outside the +-pi/2 operating range")
    return rx, ry, rz


def delta_from_poses(reference: RigidTransform, current: RigidTransform) -> DeformationVector:
    """Pose change of ``current`` relative to ``reference``.

    Translation delta in the reference frame; rotation delta as intrinsic
    X-Y-Z Euler angles of ``R_ref.T @ R_cur``.
    """
    dl = reference.rotation.T @ (current.translation - reference.translation)
    rel = reference.rotation.T @ current.rotation
    rx, ry, rz = euler_xyz_from_rotation(rel)
    return DeformationVector(dl[0], dl[1], dl[2], rx, ry, rz)


def apply_delta(reference: RigidTransform, delta: DeformationVector) -> RigidTransform:
    """Inverse of :func:`delta_from_poses`: the pose at ``delta`` from reference."""
    rel = rotation_from_euler_xyz(delta.dtheta_x, delta.dtheta_y, delta.dtheta_z)
    rotation = reference.rotation @ rel
    translation = reference.translation + reference.rotation @ np.array(
        [delta.dl_x, delta.dl_y, delta.dl_z]
    )
    return RigidTransform(rotation, translation)


def normal_matrix_from_unit_vector(n: np.ndarray) -> NormalMatrix6:
    """Six-entry encoding of M = n n^T; identical for n and -n.

    Raises:
        NotUnitVector: if ||n|| differs from 1 by more than 1e-6.
    """
    v = np.asarray(n, dtype=np.float64)
    if v.shape != (3,):
        raise ValidationFailure(f"normal must be a 3-vector, got shape {v.shape}")
    norm = math.sqrt(float(v[0]) ** 2 + float(v[1]) ** 2 + float(v[2]) ** 2)
    if abs(norm - 1.0) > 1e-6:
        raise NotUnitVector(f"normal must be unit length within 1e-6, got |n|={norm}")
    # Normalizing first keeps the unit-trace invariant tight; all entries are
    # products of two components, so negating n leaves them bit-identical.
    x, y, z = float(v[0]) / norm, float(v[1]) / norm, float(v[2]) / norm
    return NormalMatrix6(x * x, x * y, x * z, y * y, y * z, z * z)


def l1_object_loss(
    pred_pos: np.ndarray,
    true_pos: np.ndarray,
    pred_m6: NormalMatrix6,
    true_m6: NormalMatrix6,
) -> float:
    """L1 pose loss: position error plus normal-matrix entry error."""
    p = np.asarray(pred_pos, dtype=np.float64)
    q = np.asarray(true_pos, dtype=np.float64)
    if p.shape != (3,) or q.shape != (3,):
        raise ValidationFailure("positions must be 3-vectors")
    return float(
        np.sum(np.abs(p - q)) + np.sum(np.abs(pred_m6.as_array() - true_m6.as_array()))
    )
