"""JSON configuration and calibration report documents.

Angles are degrees in files and radians in memory. Unknown keys are rejected
so a typo cannot silently fall back to a default.

Config layout (every block optional; subcommands check what they need)::

    {
      "imu": {"T_a": [9], "K_a": [3], "b_a": [3], "T_g": [9], "K_g": [3], "b_g": [3],
              "noise": {"accel_white": [3], "gyro_white": [3],
                        "accel_bias_instability": [3], "gyro_bias_instability": [3]}},
      "cameras": {"<name>": {"model": "pinhole" | "unified", "intrinsics": [fx, fy, cx, cy(, alpha)],
                             "distortion": [k1, k2, p1, p2(, k3)], "zeta": 0.0, "T_C_B": [16]}},
      "chassis": {"wheel_radius": m, "half_length": m, "half_width": m,
                  "scales": [s_x, s_y, s_z], "velocity_noise_std": [3]},
      "mounting": {"prior_R_B_O_ypr_deg": [yaw, pitch, roll], "p_Bz_O": m},
      "tilt": {"min_rate_deg_s": deg/s, "still_duration": s},
      "solver": {"loss": "huber" | "none", "delta": m, "max_iterations": n,
                 "gradient_tol": x, "step_tol": x, "interval": s,
                 "x0": {"p_F_O": [2], "theta_F_O_deg": deg, "s_x_inv": x, "s_y_inv": x}}
    }
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .camera_model import DistortionParams, PinholeIntrinsics, UnifiedModel, ZR300_FISHEYE, ZR300_RGB
from .chassis_model import ChassisScale, MecanumGeometry
from .errors import ConfigError
from .extrinsic_opt import ExtrinsicParams, SolveReport, SolverConfig
from .geometry import EulerYPR, rot_from_ypr
from .imu_model import BMI055_INTRINSICS, BMI055_NOISE, ImuIntrinsics, ImuNoiseParams
from .pca_calib import TiltConfig, TiltResult
from .sim import intrinsics_from_dict, intrinsics_to_dict, noise_from_dict, noise_to_dict

BLOCKS = ("imu", "cameras", "chassis", "mounting", "tilt", "solver")


def _check_keys(d, allowed, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _floats(v, n: int, where: str) -> list[float]:
    try:
        out = [float(x) for x in v]
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a list of {n} numbers") from None
    if len(out) != n or not all(math.isfinite(x) for x in out):
        raise ConfigError(f"{where} must be a list of {n} finite numbers")
    return out


def _float(v, where: str) -> float:
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a number") from None
    if not math.isfinite(out):
        raise ConfigError(f"{where} must be finite")
    return out


@dataclass(frozen=True)
class CameraConfig:
    model: UnifiedModel
    kind: str = "pinhole"
    T_C_B: np.ndarray = field(default_factory=lambda: np.eye(4))

    def to_dict(self) -> dict:
        ph, d = self.model.pinhole, self.model.dist
        return {
            "model": self.kind,
            "intrinsics": [ph.fx, ph.fy, ph.cx, ph.cy, ph.alpha],
            "distortion": [d.k1, d.k2, d.p1, d.p2, d.k3],
            "zeta": self.model.zeta,
            "T_C_B": [float(v) for v in np.asarray(self.T_C_B).reshape(-1)],
        }

    @classmethod
    def from_dict(cls, d: dict, where: str) -> "CameraConfig":
        _check_keys(d, ("model", "intrinsics", "distortion", "zeta", "T_C_B"), where)
        kind = d.get("model", "pinhole")
        if kind not in ("pinhole", "unified"):
            raise ConfigError(f"{where}.model must be 'pinhole' or 'unified'")
        intr = d.get("intrinsics")
        if intr is None or len(intr) not in (4, 5):
            raise ConfigError(f"{where}.intrinsics must hold fx, fy, cx, cy and optionally alpha")
        intr = _floats(intr, len(intr), f"{where}.intrinsics")
        dist = d.get("distortion", [0.0, 0.0, 0.0, 0.0])
        if len(dist) not in (4, 5):
            raise ConfigError(f"{where}.distortion must hold k1, k2, p1, p2 and optionally k3")
        dist = _floats(dist, len(dist), f"{where}.distortion")
        zeta = _float(d.get("zeta", 0.0), f"{where}.zeta")
        if kind == "pinhole" and zeta != 0.0:
            raise ConfigError(f"{where}: a pinhole camera must have zeta = 0")
        T = np.reshape(_floats(d.get("T_C_B", np.eye(4).reshape(-1)), 16, f"{where}.T_C_B"), (4, 4))
        try:
            model = UnifiedModel(PinholeIntrinsics(*intr), DistortionParams(*dist), zeta)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        return cls(model, kind, T)


@dataclass(frozen=True)
class Config:
    imu: ImuIntrinsics | None = None
    imu_noise: ImuNoiseParams | None = None
    cameras: dict = field(default_factory=dict)
    chassis: MecanumGeometry | None = None
    chassis_scale: ChassisScale = field(default_factory=ChassisScale)
    velocity_noise_std: tuple = (0.0, 0.0, 0.0)
    prior_ypr: EulerYPR | None = None
    p_Bz_O: float | None = None
    tilt: TiltConfig | None = None
    solver: SolverConfig | None = None
    interval: float = 0.5
    present: frozenset = frozenset()

    def require(self, *blocks: str) -> None:
        missing = [b for b in blocks if b not in self.present]
        if missing:
            raise ConfigError(f"config is missing required block(s): {', '.join(missing)}")

    @property
    def prior_R_B_O(self) -> np.ndarray:
        return rot_from_ypr(self.prior_ypr or EulerYPR(0.0, 0.0, 0.0))

    def tilt_config(self) -> TiltConfig:
        base = self.tilt or TiltConfig()
        return TiltConfig(base.min_rate, self.prior_R_B_O, base.still_duration)

    def solver_config(self) -> SolverConfig:
        return self.solver or SolverConfig()

    # -- serialization ------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "Config":
        _check_keys(d, BLOCKS, "config")
        kw: dict = {"present": frozenset(d)}
        if "imu" in d:
            imu = d["imu"]
            _check_keys(imu, ("T_a", "K_a", "b_a", "T_g", "K_g", "b_g", "noise"), "imu")
            try:
                kw["imu"] = intrinsics_from_dict({
                    "T_a": _floats(imu.get("T_a", np.eye(3).reshape(-1)), 9, "imu.T_a"),
                    "K_a": _floats(imu.get("K_a", [1, 1, 1]), 3, "imu.K_a"),
                    "b_a": _floats(imu.get("b_a", [0, 0, 0]), 3, "imu.b_a"),
                    "T_g": _floats(imu.get("T_g", np.eye(3).reshape(-1)), 9, "imu.T_g"),
                    "K_g": _floats(imu.get("K_g", [1, 1, 1]), 3, "imu.K_g"),
                    "b_g": _floats(imu.get("b_g", [0, 0, 0]), 3, "imu.b_g"),
                })
                if "noise" in imu:
                    n = imu["noise"]
                    names = ("accel_white", "gyro_white", "accel_bias_instability", "gyro_bias_instability")
                    _check_keys(n, names, "imu.noise")
                    kw["imu_noise"] = noise_from_dict(
                        {k: _floats(n.get(k, [0, 0, 0]), 3, f"imu.noise.{k}") for k in names})
            except ValueError as exc:
                raise ConfigError(f"imu: {exc}") from None
        if "cameras" in d:
            cams = d["cameras"]
            if not isinstance(cams, dict):
                raise ConfigError("cameras must map names to camera blocks")
            kw["cameras"] = {name: CameraConfig.from_dict(c, f"cameras.{name}") for name, c in cams.items()}
        if "chassis" in d:
            c = d["chassis"]
            _check_keys(c, ("wheel_radius", "half_length", "half_width", "scales", "velocity_noise_std"), "chassis")
            try:
                kw["chassis"] = MecanumGeometry(
                    _float(c.get("wheel_radius", 0.05), "chassis.wheel_radius"),
                    _float(c.get("half_length", 0.2), "chassis.half_length"),
                    _float(c.get("half_width", 0.2), "chassis.half_width"),
                )
                kw["chassis_scale"] = ChassisScale(*_floats(c.get("scales", [1, 1, 1]), 3, "chassis.scales"))
            except ValueError as exc:
                raise ConfigError(f"chassis: {exc}") from None
            kw["velocity_noise_std"] = tuple(
                _floats(c.get("velocity_noise_std", [0, 0, 0]), 3, "chassis.velocity_noise_std"))
        if "mounting" in d:
            m = d["mounting"]
            _check_keys(m, ("prior_R_B_O_ypr_deg", "p_Bz_O"), "mounting")
            kw["prior_ypr"] = EulerYPR.from_degrees(
                *_floats(m.get("prior_R_B_O_ypr_deg", [0, 0, 0]), 3, "mounting.prior_R_B_O_ypr_deg"))
            kw["p_Bz_O"] = _float(m.get("p_Bz_O", 0.0), "mounting.p_Bz_O")
        if "tilt" in d:
            t = d["tilt"]
            _check_keys(t, ("min_rate_deg_s", "still_duration"), "tilt")
            try:
                kw["tilt"] = TiltConfig(
                    min_rate=math.radians(_float(t.get("min_rate_deg_s", math.degrees(0.2)), "tilt.min_rate_deg_s")),
                    still_duration=_float(t.get("still_duration", 1.0), "tilt.still_duration"),
                )
            except ValueError as exc:
                raise ConfigError(f"tilt: {exc}") from None
        if "solver" in d:
            s = d["solver"]
            _check_keys(s, ("loss", "delta", "max_iterations", "gradient_tol", "step_tol", "interval", "x0"), "solver")
            defaults = SolverConfig()
            x0 = defaults.x0
            if "x0" in s:
                x = s["x0"]
                _check_keys(x, ("p_F_O", "theta_F_O_deg", "s_x_inv", "s_y_inv"), "solver.x0")
                try:
                    x0 = ExtrinsicParams(
                        _floats(x.get("p_F_O", [0, 0]), 2, "solver.x0.p_F_O"),
                        math.radians(_float(x.get("theta_F_O_deg", 0.0), "solver.x0.theta_F_O_deg")),
                        _float(x.get("s_x_inv", 1.0), "solver.x0.s_x_inv"),
                        _float(x.get("s_y_inv", 1.0), "solver.x0.s_y_inv"),
                    )
                except ValueError as exc:
                    raise ConfigError(f"solver.x0: {exc}") from None
            try:
                kw["solver"] = SolverConfig(
                    loss=str(s.get("loss", defaults.loss)),
                    delta=_float(s.get("delta", defaults.delta), "solver.delta"),
                    max_iterations=int(s.get("max_iterations", defaults.max_iterations)),
                    gradient_tol=_float(s.get("gradient_tol", defaults.gradient_tol), "solver.gradient_tol"),
                    step_tol=_float(s.get("step_tol", defaults.step_tol), "solver.step_tol"),
                    x0=x0,
                )
            except ValueError as exc:
                raise ConfigError(f"solver: {exc}") from None
            kw["interval"] = _float(s.get("interval", 0.5), "solver.interval")
            if kw["interval"] <= 0.0:
                raise ConfigError("solver.interval must be positive")
        return cls(**kw)

    def to_dict(self) -> dict:
        """Canonical form: every present block with all of its fields spelled out."""
        out: dict = {}
        if "imu" in self.present:
            imu = intrinsics_to_dict(self.imu or ImuIntrinsics())
            if self.imu_noise is not None:
                imu["noise"] = noise_to_dict(self.imu_noise)
            out["imu"] = imu
        if "cameras" in self.present:
            out["cameras"] = {name: c.to_dict() for name, c in sorted(self.cameras.items())}
        if "chassis" in self.present:
            g = self.chassis or MecanumGeometry()
            out["chassis"] = {
                "wheel_radius": g.wheel_radius,
                "half_length": g.half_length,
                "half_width": g.half_width,
                "scales": [float(v) for v in self.chassis_scale.as_array()],
                "velocity_noise_std": [float(v) for v in self.velocity_noise_std],
            }
        if "mounting" in self.present:
            out["mounting"] = {
                "prior_R_B_O_ypr_deg": list((self.prior_ypr or EulerYPR(0, 0, 0)).degrees()),
                "p_Bz_O": self.p_Bz_O or 0.0,
            }
        if "tilt" in self.present:
            t = self.tilt or TiltConfig()
            out["tilt"] = {"min_rate_deg_s": math.degrees(t.min_rate), "still_duration": t.still_duration}
        if "solver" in self.present:
            s = self.solver_config()
            out["solver"] = {
                "loss": s.loss,
                "delta": s.delta,
                "max_iterations": s.max_iterations,
                "gradient_tol": s.gradient_tol,
                "step_tol": s.step_tol,
                "interval": self.interval,
                "x0": {
                    "p_F_O": [float(v) for v in s.x0.p_F_O],
                    "theta_F_O_deg": math.degrees(s.x0.theta_F_O),
                    "s_x_inv": s.x0.q_x,
                    "s_y_inv": s.x0.q_y,
                },
            }
        return out


def bmi055_config() -> dict:
    """Example configuration built from the reference BMI055 / ZR300 calibration."""
    imu = intrinsics_to_dict(BMI055_INTRINSICS)
    imu["noise"] = noise_to_dict(BMI055_NOISE)
    rgb = CameraConfig(ZR300_RGB, "pinhole")
    # reference camera-to-IMU transform, stored as given
    T_C_B = [0.9991, -0.0395, 0.0124, 0.097,
             0.0393, 0.9992, 0.0098, 0.0084,
             -0.0128, -0.0093, 0.9999, -0.0002,
             0.0, 0.0, 0.0, 1.0]
    fisheye = CameraConfig(ZR300_FISHEYE, "unified", np.reshape(T_C_B, (4, 4)))
    return {
        "imu": imu,
        "cameras": {"rgb": rgb.to_dict(), "fisheye": fisheye.to_dict()},
        "chassis": {"wheel_radius": 0.05, "half_length": 0.2, "half_width": 0.2,
                    "scales": [1.0, 1.0, 1.0], "velocity_noise_std": [0.0, 0.0, 0.0]},
        "mounting": {"prior_R_B_O_ypr_deg": [-90.0, 0.0, -90.0], "p_Bz_O": 0.25},
        "tilt": {"min_rate_deg_s": math.degrees(0.2), "still_duration": 1.0},
        "solver": {"loss": "huber", "delta": 0.05, "max_iterations": 100, "gradient_tol": 1e-12,
                   "step_tol": 1e-12, "interval": 0.5,
                   "x0": {"p_F_O": [0.0, 0.0], "theta_F_O_deg": 0.0, "s_x_inv": 1.0, "s_y_inv": 1.0}},
    }


NAMED_CONFIGS = {"bmi055": bmi055_config}


@dataclass
class CalibrationReport:
    tilt: TiltResult
    extrinsics: SolveReport
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tilt": self.tilt.to_dict(),
            "extrinsics": self.extrinsics.to_dict(),
            "provenance": {"tool_version": __version__, **self.provenance},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationReport":
        _check_keys(d, ("tilt", "extrinsics", "provenance"), "report")
        return cls(TiltResult.from_dict(d["tilt"]), SolveReport.from_dict(d["extrinsics"]),
                   dict(d.get("provenance", {})))
