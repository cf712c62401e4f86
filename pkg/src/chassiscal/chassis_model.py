"""Mecanum chassis velocity model, wheel kinematics and dead reckoning."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonMonotoneTimeError
from .geometry import Path2


@dataclass(frozen=True)
class ChassisScale:
    """Measured/true ratios for X velocity, Y velocity and yaw rate."""

    s_x: float = 1.0
    s_y: float = 1.0
    s_z: float = 1.0

    def __post_init__(self):
        if min(self.s_x, self.s_y, self.s_z) <= 0.0:
            raise ValueError("chassis scales must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.s_x, self.s_y, self.s_z])

    def inverse(self) -> "ChassisScale":
        return ChassisScale(1.0 / self.s_x, 1.0 / self.s_y, 1.0 / self.s_z)


@dataclass(frozen=True)
class BodyVelocity:
    vx: float
    vy: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.omega])


@dataclass(frozen=True)
class MecanumGeometry:
    wheel_radius: float = 0.05
    half_length: float = 0.2
    half_width: float = 0.2

    def __post_init__(self):
        if min(self.wheel_radius, self.half_length, self.half_width) <= 0.0:
            raise ValueError("chassis dimensions must be positive")

    def wheel_matrix(self) -> np.ndarray:
        """Maps (vx, vy, omega) to wheel rates (FL, FR, RL, RR), X configuration, 45 deg rollers."""
        L = self.half_length + self.half_width
        return np.array([
            [1.0, -1.0, -L],
            [1.0, 1.0, L],
            [1.0, 1.0, -L],
            [1.0, -1.0, L],
        ]) / self.wheel_radius


def measure_velocity(v, k: ChassisScale, noise_std=(0.0, 0.0, 0.0),
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """``K v + eta``. ``v`` is a BodyVelocity, a 3-vector or an (N, 3) array."""
    if isinstance(v, BodyVelocity):
        v = v.as_array()
    v = np.asarray(v, dtype=float)
    out = v * k.as_array()
    noise_std = np.asarray(noise_std, dtype=float)
    if np.any(noise_std > 0.0):
        if rng is None:
            raise ValueError("an rng is required when noise is enabled")
        out = out + rng.standard_normal(out.shape) * noise_std
    return out


def wheel_speeds_from_body(v, g: MecanumGeometry) -> np.ndarray:
    if isinstance(v, BodyVelocity):
        v = v.as_array()
    return np.asarray(v, dtype=float) @ g.wheel_matrix().T


def body_from_wheel_speeds(w, g: MecanumGeometry) -> BodyVelocity:
    # least-squares inverse of the 4x3 wheel matrix
    vx, vy, om = np.linalg.pinv(g.wheel_matrix()) @ np.asarray(w, dtype=float).reshape(4)
    return BodyVelocity(float(vx), float(vy), float(om))


def dead_reckon(t, measured, k_inv: ChassisScale = ChassisScale(), x0=None) -> Path2:
    """Integrate body velocities into a planar path.

    Sample ``i`` is held over ``[t[i], t[i+1])``. Each step advances the
    heading by ``omega dt`` and the position by the body displacement
    ``(vx, vy) dt`` rotated by the mid-step heading. ``k_inv`` multiplies the
    measured velocities before integration. The path starts at ``x0``
    (``(x, y, yaw)``, default identity).
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    v = np.asarray(measured, dtype=float).reshape(-1, 3) * k_inv.as_array()
    if len(v) != len(t):
        raise ValueError("need one velocity per timestamp")
    dt = np.diff(t)
    if np.any(dt <= 0.0):
        raise NonMonotoneTimeError("timestamps must be strictly increasing")
    x0 = np.zeros(3) if x0 is None else np.asarray(x0, dtype=float)
    n = len(t)
    # heading is cumulative; positions follow in closed form from the headings
    dyaw = v[:-1, 2] * dt
    yaw = np.empty(n)
    yaw[0] = x0[2]
    yaw[1:] = x0[2] + np.cumsum(dyaw)
    mid = yaw[:-1] + 0.5 * dyaw
    c, s = np.cos(mid), np.sin(mid)
    dx = (c * v[:-1, 0] - s * v[:-1, 1]) * dt
    dy = (s * v[:-1, 0] + c * v[:-1, 1]) * dt
    xy = np.empty((n, 2))
    xy[0] = x0[:2]
    xy[1:, 0] = x0[0] + np.cumsum(dx)
    xy[1:, 1] = x0[1] + np.cumsum(dy)
    return Path2(t, xy, yaw)
