"""Rotations and rigid transforms.

Conventions:
    - A rotation ``R`` (``Rot3``) is a 3x3 ndarray with ``R @ R.T = I`` and
      ``det(R) = 1``. ``R_A_B`` maps coordinates expressed in frame B into
      frame A.
    - Euler angles use the intrinsic Z-Y'-X'' order: ``R = Rz(yaw) Ry(pitch)
      Rx(roll)``.
    - Axis-angle vectors are ``u * phi`` with ``phi`` in [0, pi].
    - ``Pose3(rot, p)`` maps ``x_B`` to ``rot @ x_B + p``; likewise Pose2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GimbalLockError

GIMBAL_EPS = 1e-9


def wrap_angle(a):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w <= -np.pi, w + 2.0 * np.pi, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


def _canon(a: float) -> float:
    # atan2 may return exactly -pi
    return math.pi if a <= -math.pi else a


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def is_rotation(m, tol: float = 1e-9) -> bool:
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    return bool(
        np.all(np.abs(m @ m.T - np.eye(3)) <= tol) and abs(np.linalg.det(m) - 1.0) <= tol
    )


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot2(theta: float) -> np.ndarray:
    """2-D rotation matrix."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class EulerYPR:
    yaw: float
    pitch: float
    roll: float

    def as_array(self) -> np.ndarray:
        return np.array([self.yaw, self.pitch, self.roll])

    def degrees(self) -> tuple[float, float, float]:
        return (math.degrees(self.yaw), math.degrees(self.pitch), math.degrees(self.roll))

    @classmethod
    def from_degrees(cls, yaw: float, pitch: float, roll: float) -> "EulerYPR":
        return cls(math.radians(yaw), math.radians(pitch), math.radians(roll))


def rot_from_ypr(e: EulerYPR) -> np.ndarray:
    return rot_z(e.yaw) @ rot_y(e.pitch) @ rot_x(e.roll)


def ypr_from_rot(r) -> EulerYPR:
    """Inverse of :func:`rot_from_ypr` away from pitch = +-pi/2.

    Raises:
        GimbalLockError: if ``|r[2, 0]| > 1 - 1e-9``.
    """
    r = np.asarray(r, dtype=float)
    if abs(r[2, 0]) > 1.0 - GIMBAL_EPS:
        raise GimbalLockError(f"pitch at +-90 deg (r31 = {r[2, 0]:.12f})")
    yaw = math.atan2(r[1, 0], r[0, 0])
    cy, sy = math.cos(yaw), math.sin(yaw)
    pitch = math.atan2(-r[2, 0], r[0, 0] * cy + r[1, 0] * sy)
    roll = math.atan2(r[0, 2] * sy - r[1, 2] * cy, -r[0, 1] * sy + r[1, 1] * cy)
    return EulerYPR(_canon(yaw), pitch, _canon(roll))


def rot_from_axis_angle(theta) -> np.ndarray:
    """Rodrigues' formula; the zero vector maps to the identity."""
    theta = np.asarray(theta, dtype=float)
    phi = float(np.linalg.norm(theta))
    if phi < 1e-12:
        # second-order series keeps tiny rotations orthonormal to machine precision
        k = skew(theta)
        return np.eye(3) + k + 0.5 * (k @ k)
    k = skew(theta / phi)
    return np.eye(3) + math.sin(phi) * k + (1.0 - math.cos(phi)) * (k @ k)


def axis_angle_from_rot(r) -> np.ndarray:
    """Canonical axis-angle vector with angle in [0, pi]."""
    r = np.asarray(r, dtype=float)
    w = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    sin_phi = float(np.linalg.norm(w))
    cos_phi = 0.5 * (float(np.trace(r)) - 1.0)
    phi = math.atan2(sin_phi, cos_phi)
    if phi < 1e-12:
        return w.copy()
    if math.pi - phi > 1e-3:
        return w * (phi / sin_phi)
    # near pi the antisymmetric part vanishes; read the axis off the
    # symmetric part (1 - cos phi) u u^T instead
    b = 0.5 * (r + r.T) - cos_phi * np.eye(3)
    j = int(np.argmax(np.diag(b)))
    u = b[:, j] / np.linalg.norm(b[:, j])
    if sin_phi > 0.0 and float(u @ w) < 0.0:
        u = -u
    elif sin_phi == 0.0:
        # phi == pi: +u and -u are the same rotation, fix the sign
        nz = np.flatnonzero(np.abs(u) > 1e-12)
        if nz.size and u[nz[0]] < 0.0:
            u = -u
    return u * phi


@dataclass(frozen=True)
class Pose3:
    rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rot", np.asarray(self.rot, dtype=float).reshape(3, 3))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(3))

    @classmethod
    def identity(cls) -> "Pose3":
        return cls()

    def matrix(self) -> np.ndarray:
        t = np.eye(4)
        t[:3, :3] = self.rot
        t[:3, 3] = self.p
        return t

    @classmethod
    def from_matrix(cls, t) -> "Pose3":
        t = np.asarray(t, dtype=float)
        return cls(t[:3, :3], t[:3, 3])

    def apply(self, x) -> np.ndarray:
        return self.rot @ np.asarray(x, dtype=float) + self.p


@dataclass(frozen=True)
class Pose2:
    theta: float = 0.0
    p: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(2))

    @classmethod
    def identity(cls) -> "Pose2":
        return cls()

    @property
    def rot(self) -> np.ndarray:
        return rot2(self.theta)

    def apply(self, x) -> np.ndarray:
        return self.rot @ np.asarray(x, dtype=float) + self.p


def compose(a, b):
    """``a * b`` for two Pose3 or two Pose2."""
    if isinstance(a, Pose2):
        return Pose2(a.theta + b.theta, a.rot @ b.p + a.p)
    return Pose3(a.rot @ b.rot, a.rot @ b.p + a.p)


def inverse(a):
    if isinstance(a, Pose2):
        return Pose2(-a.theta, -(a.rot.T @ a.p))
    rt = a.rot.T
    return Pose3(rt, -(rt @ a.p))


@dataclass
class Path2:
    """Planar pose stream: times ``t`` (N,), positions ``xy`` (N, 2), headings ``yaw`` (N,)."""

    t: np.ndarray
    xy: np.ndarray
    yaw: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        self.yaw = np.asarray(self.yaw, dtype=float).reshape(-1)
        if not (len(self.t) == len(self.xy) == len(self.yaw)):
            raise ValueError("Path2 arrays must have equal length")

    def __len__(self) -> int:
        return len(self.t)

    def pose(self, i: int) -> Pose2:
        return Pose2(self.yaw[i], self.xy[i])


@dataclass
class Path3:
    """Spatial pose stream: times ``t`` (N,), positions ``p`` (N, 3), rotations ``rot`` (N, 3, 3)."""

    t: np.ndarray
    p: np.ndarray
    rot: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.p = np.asarray(self.p, dtype=float).reshape(-1, 3)
        self.rot = np.asarray(self.rot, dtype=float).reshape(-1, 3, 3)
        if not (len(self.t) == len(self.p) == len(self.rot)):
            raise ValueError("Path3 arrays must have equal length")

    def __len__(self) -> int:
        return len(self.t)

    def pose(self, i: int) -> Pose3:
        return Pose3(self.rot[i], self.p[i])


def yaw_of(rot) -> np.ndarray:
    """Heading of one (3, 3) or many (N, 3, 3) rotations: angle of the rotated x axis in the xy plane."""
    rot = np.asarray(rot, dtype=float)
    return np.arctan2(rot[..., 1, 0], rot[..., 0, 0])


def rot_z_batch(yaw) -> np.ndarray:
    yaw = np.asarray(yaw, dtype=float)
    c, s = np.cos(yaw), np.sin(yaw)
    out = np.zeros(yaw.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out
