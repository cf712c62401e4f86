"""IMU pitch/roll relative to the chassis from the dominant gyroscope rotation axis.

Planar driving only rotates the chassis about its own z axis, so every
angular-rate sample in the IMU frame lies (up to noise) on one line. The
principal axis of the symmetrized sample set is that line; the rotation that
takes it onto ``e_z`` with zero heading gives pitch and roll.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousSignError,
    AntiparallelAxisError,
    DegenerateCovarianceError,
    InsufficientRotationError,
)
from .geometry import EulerYPR, rot_from_axis_angle, rot_from_ypr, ypr_from_rot

E_Z = np.array([0.0, 0.0, 1.0])
MIN_ADMITTED = 100


@dataclass(frozen=True)
class TiltConfig:
    min_rate: float = 0.2
    prior_R_B_O: np.ndarray = field(default_factory=lambda: np.eye(3))
    # leading stationary interval used to estimate the gyro zero offset; 0 disables
    still_duration: float = 1.0

    def __post_init__(self):
        if self.min_rate < 0.0:
            raise ValueError("min_rate must be non-negative")
        object.__setattr__(self, "prior_R_B_O", np.asarray(self.prior_R_B_O, dtype=float).reshape(3, 3))


@dataclass(frozen=True)
class TiltResult:
    pitch: float
    roll: float
    v_max: np.ndarray
    eigenvalues: np.ndarray
    n_samples: int
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def rotation(self) -> np.ndarray:
        """``R_B_F``: zero heading, estimated pitch and roll."""
        return rot_from_ypr(EulerYPR(0.0, self.pitch, self.roll))

    def to_dict(self) -> dict:
        return {
            "pitch_deg": math.degrees(self.pitch),
            "roll_deg": math.degrees(self.roll),
            "pitch_rad": self.pitch,
            "roll_rad": self.roll,
            "v_max": [float(x) for x in self.v_max],
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "n_samples": int(self.n_samples),
            "gyro_bias": [float(x) for x in self.gyro_bias],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TiltResult":
        return cls(
            pitch=float(d["pitch_rad"]),
            roll=float(d["roll_rad"]),
            v_max=np.asarray(d["v_max"], dtype=float),
            eigenvalues=np.asarray(d["eigenvalues"], dtype=float),
            n_samples=int(d["n_samples"]),
            gyro_bias=np.asarray(d.get("gyro_bias", [0.0, 0.0, 0.0]), dtype=float),
        )

    @classmethod
    def zero(cls) -> "TiltResult":
        return cls(0.0, 0.0, E_Z.copy(), np.zeros(3), 0)


def build_dataset(gyro, cfg: TiltConfig) -> np.ndarray:
    """Stack ``w`` and ``-w`` for every sample with ``|w| >= min_rate``; shape (2K, 3), mean exactly zero."""
    w = np.asarray(gyro, dtype=float).reshape(-1, 3)
    keep = w[np.linalg.norm(w, axis=1) >= cfg.min_rate]
    if len(keep) < MIN_ADMITTED:
        raise InsufficientRotationError(
            f"only {len(keep)} samples rotate faster than {cfg.min_rate} rad/s (need {MIN_ADMITTED})")
    x = np.empty((2 * len(keep), 3))
    x[0::2] = keep
    x[1::2] = -keep
    return x


def principal_axis(x) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and unit principal direction of ``x.T x / (n - 1)``.

    The returned direction has its largest-magnitude component positive.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3 or x.shape[0] < 6:
        raise ValueError("need an (n >= 6, 3) data matrix")
    cov = x.T @ x / (x.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = np.clip(vals[order], 0.0, None), vecs[:, order]
    if vals[0] < 1e-12:
        raise DegenerateCovarianceError("no rotation in the data")
    if vals[0] - vals[1] < 1e-9 * vals[0]:
        raise DegenerateCovarianceError("leading eigenvalues tie; rotation axis is not unique")
    v = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    if v[int(np.argmax(np.abs(v)))] < 0.0:
        v = -v
    return vals, v


def disambiguate_sign(v, prior) -> np.ndarray:
    """Return ``v`` or ``-v``, whichever the prior mounting maps onto the upper half space."""
    v = np.asarray(v, dtype=float)
    d = float((np.asarray(prior, dtype=float) @ v)[2])
    if abs(d) < 1e-3:
        raise AmbiguousSignError(f"prior mounting is orthogonal to the rotation axis (dot = {d:.2e})")
    return v if d > 0.0 else -v


def alignment_rotation(v) -> np.ndarray:
    """The minimal rotation ``R`` with ``R v = e_z``."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    c = float(v @ E_Z)
    if c < -1.0 + 1e-9:
        raise AntiparallelAxisError("axis points along -z; alignment rotation is not unique")
    cross = np.cross(v, E_Z)
    s = float(np.linalg.norm(cross))
    if s == 0.0:
        return np.eye(3)
    return rot_from_axis_angle(cross / s * math.atan2(s, c))


def tilt_from_axis(v) -> tuple[float, float]:
    """Pitch and roll of the zero-heading rotation that takes ``v`` onto ``e_z``."""
    e = ypr_from_rot(alignment_rotation(v))
    return e.pitch, e.roll


def estimate_gyro_bias(t, gyro, still_duration: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    gyro = np.asarray(gyro, dtype=float).reshape(-1, 3)
    if still_duration <= 0.0 or len(t) == 0:
        return np.zeros(3)
    mask = t < t[0] + still_duration
    return gyro[mask].mean(axis=0)


def calibrate_tilt(t, gyro, cfg: TiltConfig = TiltConfig()) -> TiltResult:
    """Full pipeline: remove the stationary bias estimate, symmetrize, PCA, fix the sign, read pitch/roll."""
    gyro = np.asarray(gyro, dtype=float).reshape(-1, 3)
    bias = estimate_gyro_bias(t, gyro, cfg.still_duration)
    x = build_dataset(gyro - bias, cfg)
    vals, v = principal_axis(x)
    v = disambiguate_sign(v, cfg.prior_R_B_O)
    pitch, roll = tilt_from_axis(v)
    return TiltResult(pitch, roll, v, vals, len(x) // 2, bias)

