"""Systematic and stochastic IMU error model.

A raw sensor reading ``x_raw`` maps to the corrected orthogonal-frame value
via ``x = T K (x_raw + b)``. Simulation runs the same map backwards and
injects white noise and a random-walk bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularIntrinsicsError


def _vec3(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(3)


def _mat3(m) -> np.ndarray:
    return np.asarray(m, dtype=float).reshape(3, 3)


@dataclass(frozen=True)
class ImuIntrinsics:
    """Axis deviation ``T_*``, diagonal scale ``K_*`` and zero offset ``b_*`` for both sensors.

    ``K_a``/``K_g`` are stored as their 3 diagonal entries.
    """

    T_a: np.ndarray = field(default_factory=lambda: np.eye(3))
    K_a: np.ndarray = field(default_factory=lambda: np.ones(3))
    b_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    T_g: np.ndarray = field(default_factory=lambda: np.eye(3))
    K_g: np.ndarray = field(default_factory=lambda: np.ones(3))
    b_g: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("T_a", "T_g"):
            object.__setattr__(self, name, _mat3(getattr(self, name)))
        for name in ("K_a", "b_a", "K_g", "b_g"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape == (3, 3):
                v = np.diag(v).copy()
            object.__setattr__(self, name, v.reshape(3))
        if not np.allclose(np.diag(self.T_a), 1.0) or not np.allclose(np.diag(self.T_g), 1.0):
            raise ValueError("axis-deviation matrices must have a unit diagonal")
        if np.any(np.tril(self.T_a, -1) != 0.0):
            raise ValueError("T_a must be upper triangular")

    @classmethod
    def identity(cls) -> "ImuIntrinsics":
        return cls()


@dataclass(frozen=True)
class ImuNoiseParams:
    """Noise densities per axis.

    White noise in units/sqrt(Hz); bias random walk in units*sqrt(Hz)
    (i.e. units/s/sqrt(Hz)).
    """

    accel_white: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_white: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_bias_instability: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias_instability: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("accel_white", "gyro_white", "accel_bias_instability", "gyro_bias_instability"):
            v = _vec3(getattr(self, name))
            if np.any(v < 0.0) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, v)

    @classmethod
    def zero(cls) -> "ImuNoiseParams":
        return cls()


@dataclass(frozen=True)
class ImuSample:
    t: float
    gyro: np.ndarray
    accel: np.ndarray


# BMI055 fixture: zero offsets and scales from the reference calibration table,
# axis-deviation matrices from the accompanying text.
BMI055_INTRINSICS = ImuIntrinsics(
    T_a=[[1.0, -0.0388, -0.0025], [0.0, 1.0, 0.0223], [0.0, 0.0, 1.0]],
    K_a=[1.01807, 1.01469, 1.00625],
    b_a=[0.080551, 0.119632, -0.340042],
    T_g=[[1.0, -0.0573, 0.00110], [0.0647, 1.0, 0.01660], [0.0038, -0.0150, 1.0]],
    K_g=[0.99514, 1.00125, 0.99586],
    b_g=[-0.0032665, -0.0044932, 0.0010749],
)

# Table rows are assigned by unit family: the rad/s rows belong to the
# gyroscope, the m/s^2 rows to the accelerometer.
BMI055_NOISE = ImuNoiseParams(
    accel_white=[1.103e-1, 2.980e-2, 3.271e-2],
    gyro_white=[2.938e-3, 4.813e-3, 6.184e-3],
    accel_bias_instability=[1.194e-3, 1.996e-4, 2.904e-4],
    gyro_bias_instability=[1.352e-5, 1.085e-5, 1.920e-5],
)


def _correct(x_raw, T, K, b) -> np.ndarray:
    x = np.asarray(x_raw, dtype=float)
    # row-vector form works for a single sample and for (N, 3) batches
    return ((x + b) * K) @ T.T


def correct_accel(a_raw, intr: ImuIntrinsics) -> np.ndarray:
    """``T_a K_a (a_raw + b_a)``; accepts a 3-vector or an (N, 3) array."""
    return _correct(a_raw, intr.T_a, intr.K_a, intr.b_a)


def correct_gyro(w_raw, intr: ImuIntrinsics) -> np.ndarray:
    """``T_g K_g (w_raw + b_g)``; accepts a 3-vector or an (N, 3) array."""
    return _correct(w_raw, intr.T_g, intr.K_g, intr.b_g)


def _simulate(x_true, T, K, b, white, dt, rng, bias_offset=None) -> np.ndarray:
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if np.any(K <= 0.0):
        raise SingularIntrinsicsError(f"scale factors must be positive, got {K}")
    x = np.asarray(x_true, dtype=float)
    raw = np.linalg.solve(T, x.reshape(-1, 3).T).T / K
    raw = raw.reshape(x.shape) - b
    if bias_offset is not None:
        raw = raw - bias_offset
    if np.any(white > 0.0):
        if rng is None:
            raise ValueError("an rng is required when noise is enabled")
        raw = raw - rng.standard_normal(raw.shape) * (white / np.sqrt(dt))
    return raw


def simulate_accel(a_true, intr: ImuIntrinsics, noise: ImuNoiseParams, dt: float,
                   rng: np.random.Generator | None = None, bias_offset=None) -> np.ndarray:
    """Raw accelerometer reading for a true orthogonal-frame specific force.

    ``bias_offset`` is an extra (time-varying) zero offset, e.g. from
    :func:`evolve_bias`.
    """
    return _simulate(a_true, intr.T_a, intr.K_a, intr.b_a, noise.accel_white, dt, rng, bias_offset)


def simulate_gyro(w_true, intr: ImuIntrinsics, noise: ImuNoiseParams, dt: float,
                  rng: np.random.Generator | None = None, bias_offset=None) -> np.ndarray:
    """Raw gyroscope reading for a true orthogonal-frame angular rate."""
    return _simulate(w_true, intr.T_g, intr.K_g, intr.b_g, noise.gyro_white, dt, rng, bias_offset)


def evolve_bias(b, instability, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One random-walk step ``b + w sqrt(dt)``, ``w ~ N(0, instability^2)`` per axis."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    b = np.asarray(b, dtype=float)
    return b + rng.standard_normal(b.shape) * np.asarray(instability, dtype=float) * np.sqrt(dt)


def bias_walk(n: int, instability, dt: float, rng: np.random.Generator, b0=None) -> np.ndarray:
    """``n`` consecutive :func:`evolve_bias` states starting from ``b0`` (default zero), shape (n, 3)."""
    instability = np.asarray(instability, dtype=float).reshape(3)
    b0 = np.zeros(3) if b0 is None else np.asarray(b0, dtype=float)
    if n == 0:
        return np.zeros((0, 3))
    steps = rng.standard_normal((n, 3)) * (instability * np.sqrt(dt))
    steps[0] = 0.0
    return b0 + np.cumsum(steps, axis=0)
