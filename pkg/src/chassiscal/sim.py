"""Synthetic ground truth and corrupted sensor streams for a planar Mecanum robot.

The chassis follows a motion script of segments whose body-frame velocity is
known in closed form (trapezoidal ramps, or a smooth figure-eight at fixed
heading). From it the simulator derives:

- the true chassis path (integrated with the same scheme the odometry uses,
  so the two agree exactly when scales are undone),
- wheel odometry from scaled, optionally noisy body velocities,
- IMU angular rate and specific force at the offset, tilted IMU, including
  the lever-arm terms, corrupted through the IMU error model,
- a VIO-like IMU pose stream with drift and white noise, expressed in a world
  frame anchored at the first IMU pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .chassis_model import ChassisScale, dead_reckon, measure_velocity
from .errors import InvalidScriptError
from .extrinsic_opt import ExtrinsicParams
from .geometry import EulerYPR, Path2, Path3, rot_from_ypr, rot_z_batch, yaw_of
from .imu_model import (
    BMI055_INTRINSICS,
    BMI055_NOISE,
    ImuIntrinsics,
    ImuNoiseParams,
    bias_walk,
    simulate_accel,
    simulate_gyro,
)

GRAVITY = 9.8
SEGMENT_KINDS = ("pause", "line", "arc", "spin", "eight")

# Reference extrinsics: mean of the three reported hardware runs.
REFERENCE_EXTRINSICS = ExtrinsicParams(
    p_F_O=[0.1008, 0.064], theta_F_O=math.radians(-89.29), q_x=0.99733, q_y=1.0374)


@dataclass(frozen=True)
class MotionSegment:
    """One piece of the motion script.

    ``line``: body velocity (vx, vy); ``spin``: yaw rate omega; ``arc``:
    (vx, vy, omega) together; all three ramp up and down linearly over
    ``ramp`` seconds. ``eight``: a figure-eight ``x = ax sin(phi)``,
    ``y = ay sin(2 phi) / 2`` traced once at constant heading, starting and
    ending at rest.
    """

    kind: str
    duration: float
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0
    ramp: float = 0.5
    ax: float = 0.0
    ay: float = 0.0

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "duration": self.duration}
        defaults = MotionSegment("pause", 1.0)
        for name in ("vx", "vy", "omega", "ramp", "ax", "ay"):
            if getattr(self, name) != getattr(defaults, name):
                d[name] = getattr(self, name)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MotionSegment":
        allowed = {"kind", "duration", "vx", "vy", "omega", "ramp", "ax", "ay"}
        unknown = set(d) - allowed
        if unknown:
            raise InvalidScriptError(f"unknown segment keys {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class VioNoise:
    position_std: float = 0.0  # m, white, per pose and axis
    yaw_std: float = 0.0  # rad, white, per pose
    drift_rate: float = 0.0  # m/sqrt(s), position random walk density


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    duration: float
    motion_script: tuple
    sample_rate_imu: float = 200.0
    sample_rate_odom: float = 100.0
    extrinsics: ExtrinsicParams = REFERENCE_EXTRINSICS
    pitch: float = math.radians(3.0)
    roll: float = math.radians(-91.0)
    p_Bz_O: float = 0.25
    s_z: float = 1.0
    imu_intrinsics: ImuIntrinsics = field(default_factory=ImuIntrinsics)
    imu_noise: ImuNoiseParams = field(default_factory=ImuNoiseParams)
    velocity_noise_std: tuple = (0.0, 0.0, 0.0)
    vio_noise: VioNoise = field(default_factory=VioNoise)
    seed: int = 0

    @property
    def chassis_scale(self) -> ChassisScale:
        return ChassisScale(1.0 / self.extrinsics.q_x, 1.0 / self.extrinsics.q_y, self.s_z)

    @property
    def R_B_O(self) -> np.ndarray:
        return rot_from_ypr(EulerYPR(self.extrinsics.theta_F_O, self.pitch, self.roll))

    @property
    def p_B_O(self) -> np.ndarray:
        return np.array([self.extrinsics.p_F_O[0], self.extrinsics.p_F_O[1], self.p_Bz_O])

    def noiseless(self) -> "ScenarioSpec":
        """Same scenario with every stochastic term switched off."""
        return replace(self, imu_noise=ImuNoiseParams(), velocity_noise_std=(0.0, 0.0, 0.0),
                       vio_noise=VioNoise())

    def validate(self) -> None:
        if not (self.duration > 0.0 and self.sample_rate_imu > 0.0 and self.sample_rate_odom > 0.0):
            raise InvalidScriptError("duration and sample rates must be positive")
        if not self.motion_script:
            raise InvalidScriptError("motion script is empty")
        for seg in self.motion_script:
            if seg.kind not in SEGMENT_KINDS:
                raise InvalidScriptError(f"unknown segment kind {seg.kind!r}")
            if not seg.duration > 0.0:
                raise InvalidScriptError("segment durations must be positive")
            if seg.ramp < 0.0:
                raise InvalidScriptError("ramp must be non-negative")
        total = sum(seg.duration for seg in self.motion_script)
        if abs(total - self.duration) > 1e-9 * max(1.0, self.duration):
            raise InvalidScriptError(
                f"segment durations sum to {total:g} s but the scenario lasts {self.duration:g} s")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "duration": self.duration,
            "sample_rate_imu": self.sample_rate_imu,
            "sample_rate_odom": self.sample_rate_odom,
            "motion_script": [s.to_dict() for s in self.motion_script],
            "extrinsics": self.extrinsics.to_dict(),
            "pitch_deg": math.degrees(self.pitch),
            "roll_deg": math.degrees(self.roll),
            "p_Bz_O": self.p_Bz_O,
            "s_z": self.s_z,
            "imu_intrinsics": intrinsics_to_dict(self.imu_intrinsics),
            "imu_noise": noise_to_dict(self.imu_noise),
            "velocity_noise_std": list(self.velocity_noise_std),
            "vio_noise": {
                "position_std": self.vio_noise.position_std,
                "yaw_std_deg": math.degrees(self.vio_noise.yaw_std),
                "drift_rate": self.vio_noise.drift_rate,
            },
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        allowed = {
            "name", "duration", "sample_rate_imu", "sample_rate_odom", "motion_script",
            "extrinsics", "pitch_deg", "roll_deg", "p_Bz_O", "s_z", "imu_intrinsics",
            "imu_noise", "velocity_noise_std", "vio_noise", "seed",
        }
        unknown = set(d) - allowed
        if unknown:
            raise InvalidScriptError(f"unknown scenario keys {sorted(unknown)}")
        try:
            kw = {
                "name": str(d.get("name", "custom")),
                "duration": float(d["duration"]),
                "motion_script": tuple(MotionSegment.from_dict(s) for s in d["motion_script"]),
            }
            for key in ("sample_rate_imu", "sample_rate_odom", "p_Bz_O", "s_z"):
                if key in d:
                    kw[key] = float(d[key])
            if "seed" in d:
                kw["seed"] = int(d["seed"])
            if "extrinsics" in d:
                kw["extrinsics"] = ExtrinsicParams.from_dict(d["extrinsics"])
            if "pitch_deg" in d:
                kw["pitch"] = math.radians(d["pitch_deg"])
            if "roll_deg" in d:
                kw["roll"] = math.radians(d["roll_deg"])
            if "imu_intrinsics" in d:
                kw["imu_intrinsics"] = intrinsics_from_dict(d["imu_intrinsics"])
            if "imu_noise" in d:
                kw["imu_noise"] = noise_from_dict(d["imu_noise"])
            if "velocity_noise_std" in d:
                kw["velocity_noise_std"] = tuple(float(v) for v in d["velocity_noise_std"])
            if "vio_noise" in d:
                v = d["vio_noise"]
                kw["vio_noise"] = VioNoise(
                    float(v.get("position_std", 0.0)),
                    math.radians(float(v.get("yaw_std_deg", 0.0))),
                    float(v.get("drift_rate", 0.0)),
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScriptError(f"bad scenario description: {exc}") from exc
        spec = cls(**kw)
        spec.validate()
        return spec


def intrinsics_to_dict(intr: ImuIntrinsics) -> dict:
    return {
        "T_a": [float(v) for v in intr.T_a.reshape(-1)],
        "K_a": [float(v) for v in intr.K_a],
        "b_a": [float(v) for v in intr.b_a],
        "T_g": [float(v) for v in intr.T_g.reshape(-1)],
        "K_g": [float(v) for v in intr.K_g],
        "b_g": [float(v) for v in intr.b_g],
    }


def intrinsics_from_dict(d: dict) -> ImuIntrinsics:
    return ImuIntrinsics(
        T_a=np.reshape(d["T_a"], (3, 3)), K_a=d["K_a"], b_a=d["b_a"],
        T_g=np.reshape(d["T_g"], (3, 3)), K_g=d["K_g"], b_g=d["b_g"],
    )


def noise_to_dict(n: ImuNoiseParams) -> dict:
    return {
        "accel_white": [float(v) for v in n.accel_white],
        "gyro_white": [float(v) for v in n.gyro_white],
        "accel_bias_instability": [float(v) for v in n.accel_bias_instability],
        "gyro_bias_instability": [float(v) for v in n.gyro_bias_instability],
    }


def noise_from_dict(d: dict) -> ImuNoiseParams:
    return ImuNoiseParams(
        accel_white=d["accel_white"], gyro_white=d["gyro_white"],
        accel_bias_instability=d["accel_bias_instability"],
        gyro_bias_instability=d["gyro_bias_instability"],
    )


@dataclass
class ImuStream:
    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class Dataset:
    imu: ImuStream
    odom_path: Path2
    vio_path: Path3
    truth: dict


# ---------------------------------------------------------------------------
# motion script evaluation


def _trapezoid(tau: np.ndarray, duration: float, ramp: float):
    r = min(ramp, 0.5 * duration)
    if r <= 0.0:
        return np.ones_like(tau), np.zeros_like(tau)
    f = np.minimum(1.0, np.minimum(tau, duration - tau) / r)
    f = np.clip(f, 0.0, 1.0)
    df = np.where(tau < r, 1.0 / r, np.where(tau > duration - r, -1.0 / r, 0.0))
    return f, df


def _segment_kinematics(seg: MotionSegment, tau: np.ndarray):
    """Body velocity (vx, vy, omega) and its time derivative at local times ``tau``."""
    n = len(tau)
    v = np.zeros((n, 3))
    dv = np.zeros((n, 3))
    if seg.kind == "pause":
        return v, dv
    if seg.kind == "eight":
        w = 2.0 * math.pi / seg.duration
        phi = w * tau - np.sin(w * tau)
        dphi = w * (1.0 - np.cos(w * tau))
        ddphi = w * w * np.sin(w * tau)
        v[:, 0] = seg.ax * np.cos(phi) * dphi
        v[:, 1] = seg.ay * np.cos(2.0 * phi) * dphi
        dv[:, 0] = seg.ax * (-np.sin(phi) * dphi ** 2 + np.cos(phi) * ddphi)
        dv[:, 1] = seg.ay * (-2.0 * np.sin(2.0 * phi) * dphi ** 2 + np.cos(2.0 * phi) * ddphi)
        return v, dv
    target = np.array([seg.vx, seg.vy, seg.omega])
    if seg.kind == "line":
        target[2] = 0.0
    elif seg.kind == "spin":
        target[:2] = 0.0
    f, df = _trapezoid(tau, seg.duration, seg.ramp)
    return f[:, None] * target, df[:, None] * target


def script_kinematics(script, t: np.ndarray):
    """Evaluate the script at times ``t``; returns body velocity and its derivative, (N, 3) each."""
    durations = np.array([s.duration for s in script])
    starts = np.concatenate(([0.0], np.cumsum(durations)[:-1]))
    idx = np.searchsorted(starts, t, side="right") - 1
    idx = np.clip(idx, 0, len(script) - 1)
    v = np.zeros((len(t), 3))
    dv = np.zeros((len(t), 3))
    for j, seg in enumerate(script):
        mask = idx == j
        if np.any(mask):
            tau = np.clip(t[mask] - starts[j], 0.0, seg.duration)
            v[mask], dv[mask] = _segment_kinematics(seg, tau)
    return v, dv


def _sample_times(duration: float, rate: float, include_end: bool) -> np.ndarray:
    n = int(round(duration * rate))
    return np.arange(n + 1 if include_end else n) / rate


def imu_truth(spec: ScenarioSpec, t: np.ndarray):
    """Noise-free angular rate and specific force in the IMU frame."""
    v, dv = script_kinematics(spec.motion_script, t)
    omega, domega = v[:, 2], dv[:, 2]
    r = spec.p_B_O
    # acceleration of the chassis center in chassis axes: dv/dt + omega x v
    a = np.zeros((len(t), 3))
    a[:, 0] = dv[:, 0] - omega * v[:, 1]
    a[:, 1] = dv[:, 1] + omega * v[:, 0]
    # lever arm: alpha x r + omega x (omega x r), both about z
    a[:, 0] += -domega * r[1] - omega ** 2 * r[0]
    a[:, 1] += domega * r[0] - omega ** 2 * r[1]
    a[:, 2] += GRAVITY
    w = np.zeros((len(t), 3))
    w[:, 2] = omega
    R_O_B = spec.R_B_O.T
    return w @ R_O_B.T, a @ R_O_B.T


def generate(spec: ScenarioSpec) -> Dataset:
    """Simulate every stream of ``spec``; bit-identical for equal seeds.

    Raises:
        InvalidScriptError: inconsistent or malformed motion script.
    """
    spec.validate()
    ss = np.random.SeedSequence(spec.seed)
    rng_gyro, rng_accel, rng_odom, rng_vio = (np.random.default_rng(s) for s in ss.spawn(4))

    # IMU
    t_imu = _sample_times(spec.duration, spec.sample_rate_imu, include_end=False)
    dt_imu = 1.0 / spec.sample_rate_imu
    w_true, f_true = imu_truth(spec, t_imu)
    noise = spec.imu_noise
    gyro_walk = bias_walk(len(t_imu), noise.gyro_bias_instability, dt_imu, rng_gyro) \
        if np.any(noise.gyro_bias_instability > 0.0) else None
    accel_walk = bias_walk(len(t_imu), noise.accel_bias_instability, dt_imu, rng_accel) \
        if np.any(noise.accel_bias_instability > 0.0) else None
    gyro = simulate_gyro(w_true, spec.imu_intrinsics, noise, dt_imu, rng_gyro, gyro_walk)
    accel = simulate_accel(f_true, spec.imu_intrinsics, noise, dt_imu, rng_accel, accel_walk)

    # chassis
    t_o = _sample_times(spec.duration, spec.sample_rate_odom, include_end=True)
    v_true, _ = script_kinematics(spec.motion_script, t_o)
    o_path = dead_reckon(t_o, v_true)
    v_meas = measure_velocity(v_true, spec.chassis_scale, spec.velocity_noise_std, rng_odom)
    odom_path = dead_reckon(t_o, v_meas)

    # fake-body and IMU truth in the odometry world
    ex = spec.extrinsics
    c, s = np.cos(o_path.yaw), np.sin(o_path.yaw)
    px, py = ex.p_F_O
    f_xy = o_path.xy + np.stack([c * px - s * py, s * px + c * py], axis=1)
    f_path = Path2(t_o, f_xy, o_path.yaw + ex.theta_F_O)
    R_W_B = rot_z_batch(o_path.yaw) @ spec.R_B_O
    p_W_B = np.concatenate([f_xy, np.full((len(t_o), 1), spec.p_Bz_O)], axis=1)
    b_path = Path3(t_o, p_W_B, R_W_B)

    # VIO: world frame at the first IMU pose, gravity aligned
    yaw0 = float(yaw_of(R_W_B[0]))
    R_V_W = rot_z_batch(np.array(-yaw0))
    vio_p = (p_W_B - p_W_B[0]) @ R_V_W.T
    vio_R = R_V_W @ R_W_B
    vn = spec.vio_noise
    dt_o = 1.0 / spec.sample_rate_odom
    if vn.drift_rate > 0.0:
        steps = rng_vio.standard_normal(vio_p.shape) * (vn.drift_rate * math.sqrt(dt_o))
        steps[0] = 0.0
        vio_p = vio_p + np.cumsum(steps, axis=0)
    if vn.position_std > 0.0:
        vio_p = vio_p + rng_vio.standard_normal(vio_p.shape) * vn.position_std
    if vn.yaw_std > 0.0:
        vio_R = rot_z_batch(rng_vio.standard_normal(len(t_o)) * vn.yaw_std) @ vio_R
    vio_path = Path3(t_o, vio_p, vio_R)

    truth = {
        "o_path": o_path,
        "f_path": f_path,
        "b_path": b_path,
        "gyro": w_true,
        "accel": f_true,
        "velocity": v_true,
        "velocity_measured": v_meas,
        "params": truth_params(spec),
    }
    return Dataset(ImuStream(t_imu, gyro, accel), odom_path, vio_path, truth)


def truth_params(spec: ScenarioSpec) -> dict:
    k = spec.chassis_scale
    return {
        "scenario": spec.name,
        "seed": spec.seed,
        "extrinsics": spec.extrinsics.to_dict(),
        "extrinsics_display_units": spec.extrinsics.display_units(),
        "pitch_deg": math.degrees(spec.pitch),
        "roll_deg": math.degrees(spec.roll),
        "pitch_rad": spec.pitch,
        "roll_rad": spec.roll,
        "p_Bz_O": spec.p_Bz_O,
        "chassis_scale": {"s_x": k.s_x, "s_y": k.s_y, "s_z": k.s_z},
        "imu_intrinsics": intrinsics_to_dict(spec.imu_intrinsics),
        "imu_noise": noise_to_dict(spec.imu_noise),
        "R_B_O": [[float(v) for v in row] for row in spec.R_B_O],
    }


# ---------------------------------------------------------------------------
# shipped scenarios


def _tilt_script() -> tuple:
    # spins and arcs come in mirrored pairs so a residual gyro offset cancels
    return (
        MotionSegment("pause", 2.0),
        MotionSegment("spin", 8.0, omega=0.6),
        MotionSegment("pause", 1.0),
        MotionSegment("spin", 8.0, omega=-0.6),
        MotionSegment("pause", 1.0),
        MotionSegment("arc", 8.0, vx=0.3, omega=0.5),
        MotionSegment("pause", 1.0),
        MotionSegment("arc", 8.0, vx=0.3, omega=-0.5),
        MotionSegment("pause", 1.0),
        MotionSegment("spin", 8.0, omega=1.0),
        MotionSegment("pause", 1.0),
        MotionSegment("spin", 8.0, omega=-1.0),
        MotionSegment("pause", 1.0),
    )


def _extrinsics_script() -> tuple:
    # Heading stays fixed while translating and the chassis center stays put
    # while spinning, and every boundary sits on the 0.5 s pair grid, so each
    # pair interval is either a pure translation or a pure rotation.
    block = (
        MotionSegment("eight", 10.0, ax=0.6, ay=0.4),
        MotionSegment("pause", 0.5),
        MotionSegment("spin", 4.0, omega=0.8),
        MotionSegment("pause", 0.5),
        MotionSegment("line", 3.0, vx=0.0, vy=0.3),
        MotionSegment("pause", 0.5),
        MotionSegment("spin", 3.0, omega=-1.0),
        MotionSegment("pause", 0.5),
        MotionSegment("line", 3.0, vx=-0.3, vy=0.0),
        MotionSegment("pause", 0.5),
    )
    return (MotionSegment("pause", 1.0),) + block * 4 + (MotionSegment("pause", 1.0),)


def standard_scenarios() -> dict[str, ScenarioSpec]:
    tilt_script = _tilt_script()
    ext_script = _extrinsics_script()
    return {
        "tilt-cal": ScenarioSpec(
            name="tilt-cal",
            duration=sum(s.duration for s in tilt_script),
            motion_script=tilt_script,
            imu_intrinsics=BMI055_INTRINSICS,
            imu_noise=BMI055_NOISE,
            vio_noise=VioNoise(0.002, math.radians(0.05), 1e-4),
            seed=1,
        ),
        "extrinsics-cal": ScenarioSpec(
            name="extrinsics-cal",
            duration=sum(s.duration for s in ext_script),
            motion_script=ext_script,
            imu_intrinsics=BMI055_INTRINSICS,
            imu_noise=BMI055_NOISE,
            vio_noise=VioNoise(0.002, math.radians(0.05), 1e-4),
            seed=2,
        ),
        "still-10h": ScenarioSpec(
            name="still-10h",
            duration=36000.0,
            motion_script=(MotionSegment("pause", 36000.0),),
            sample_rate_odom=1.0,
            imu_intrinsics=BMI055_INTRINSICS,
            imu_noise=BMI055_NOISE,
            seed=3,
        ),
    }
