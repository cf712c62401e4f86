"""Heading, planar lever arm and chassis scale calibration by nonlinear least squares.

For consecutive times ``i, i+1`` the chassis displacement seen through the
visual-inertial path (re-expressed at the IMU's ground projection F) must
match the scale-corrected wheel-odometry displacement::

    r_i(x) = p + R(theta) dp_F - R(dtheta) p - diag(q_x, q_y) dp_O

with ``x = (p_x, p_y, theta, q_x, q_y)``, ``p`` the position of F in the
chassis frame O, ``theta`` the heading of F in O and ``q = 1/s`` the inverse
chassis velocity scales. ``dtheta`` is the chassis yaw change over the
interval, taken from the wheel odometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyOverlapError,
    MaxIterationsError,
    RankDeficientError,
    TimeMisalignmentError,
    UnobservableError,
)
from .geometry import EulerYPR, Path2, Path3, rot2, rot_from_ypr, wrap_angle, yaw_of
from .pca_calib import TiltResult

MIN_PAIRS = 20
MIN_EXCITATION = 0.05  # rad
MAX_CONDITION = 1e12
Q_BOUNDS = (0.5, 2.0)


@dataclass(frozen=True)
class ExtrinsicParams:
    p_F_O: np.ndarray = field(default_factory=lambda: np.zeros(2))
    theta_F_O: float = 0.0
    q_x: float = 1.0
    q_y: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p_F_O", np.asarray(self.p_F_O, dtype=float).reshape(2))
        object.__setattr__(self, "theta_F_O", float(self.theta_F_O))
        lo, hi = Q_BOUNDS
        if not (lo < self.q_x < hi and lo < self.q_y < hi):
            raise ValueError(f"inverse scales must lie in ({lo}, {hi}), got ({self.q_x}, {self.q_y})")

    def as_vector(self) -> np.ndarray:
        return np.array([self.p_F_O[0], self.p_F_O[1], self.theta_F_O, self.q_x, self.q_y])

    @classmethod
    def from_vector(cls, x) -> "ExtrinsicParams":
        x = np.asarray(x, dtype=float)
        return cls(x[:2], float(x[2]), float(x[3]), float(x[4]))

    def to_dict(self) -> dict:
        return {
            "p_F_O": [float(v) for v in self.p_F_O],
            "theta_F_O_rad": self.theta_F_O,
            "q_x": self.q_x,
            "q_y": self.q_y,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExtrinsicParams":
        return cls(d["p_F_O"], d["theta_F_O_rad"], d["q_x"], d["q_y"])

    def display_units(self) -> dict:
        """Meters, degrees and percent."""
        return {
            "p_Fx_O_m": float(self.p_F_O[0]),
            "p_Fy_O_m": float(self.p_F_O[1]),
            "theta_F_O_deg": math.degrees(self.theta_F_O),
            "s_x_inv_percent": 100.0 * self.q_x,
            "s_y_inv_percent": 100.0 * self.q_y,
        }


@dataclass(frozen=True)
class RelativePosePair:
    dp_F: np.ndarray
    dp_O: np.ndarray
    dtheta: float
    t_start: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dp_F", np.asarray(self.dp_F, dtype=float).reshape(2))
        object.__setattr__(self, "dp_O", np.asarray(self.dp_O, dtype=float).reshape(2))
        object.__setattr__(self, "dtheta", float(self.dtheta))
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")


@dataclass(frozen=True)
class SolverConfig:
    loss: str = "huber"
    delta: float = 0.05
    max_iterations: int = 100
    gradient_tol: float = 1e-12
    step_tol: float = 1e-12
    x0: ExtrinsicParams = field(default_factory=ExtrinsicParams)

    def __post_init__(self):
        if self.loss not in ("none", "huber"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.delta <= 0.0 or self.gradient_tol <= 0.0 or self.step_tol <= 0.0:
            raise ValueError("delta and tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass
class SolveReport:
    x_star: ExtrinsicParams
    final_cost: float
    iterations: int
    converged: bool
    residual_rms: float
    covariance_estimate: np.ndarray
    residuals: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    cost_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.to_dict(),
            "display_units": self.x_star.display_units(),
            "final_cost": self.final_cost,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual_rms": self.residual_rms,
            "covariance_estimate": [[float(v) for v in row] for row in self.covariance_estimate],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReport":
        return cls(
            x_star=ExtrinsicParams.from_dict(d["x_star"]),
            final_cost=float(d["final_cost"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            residual_rms=float(d["residual_rms"]),
            covariance_estimate=np.asarray(d["covariance_estimate"], dtype=float),
        )


# ---------------------------------------------------------------------------
# path conversion and pair extraction


def vio_path_to_F(body_poses: Path3, tilt: TiltResult, p_Bz_O: float) -> Path2:
    """Re-express an IMU pose stream at the fake-body frame F and drop to the plane.

    ``T_W_F = T_W_B * inverse(T_B_F)`` with ``T_B_F = (R_B_F, (0, 0, p_Bz_O))``,
    where ``R_B_F`` has zero heading and the tilt's pitch and roll.
    """
    R_B_F = rot_from_ypr(EulerYPR(0.0, tilt.pitch, tilt.roll))
    p_B_F = np.array([0.0, 0.0, float(p_Bz_O)])
    R_F_B = R_B_F.T
    p_F_B = -R_F_B @ p_B_F
    rot = body_poses.rot @ R_F_B
    p = body_poses.p + body_poses.rot @ p_F_B
    return Path2(body_poses.t, p[:, :2], np.unwrap(yaw_of(rot)))


def _sample(path: Path2, grid: np.ndarray, max_skew: float) -> np.ndarray:
    idx = np.searchsorted(path.t, grid)
    idx = np.clip(idx, 1, len(path.t) - 1)
    left, right = path.t[idx - 1], path.t[idx]
    idx = np.where(np.abs(grid - left) <= np.abs(right - grid), idx - 1, idx)
    skew = np.abs(path.t[idx] - grid)
    if np.any(skew > max_skew):
        k = int(np.argmax(skew))
        raise TimeMisalignmentError(
            f"no pose within {max_skew:g} s of t = {grid[k]:.6f} (nearest {skew[k]:.6f} s away)")
    return idx


def _relative(path: Path2, idx: np.ndarray):
    i0, i1 = idx[:-1], idx[1:]
    d = path.xy[i1] - path.xy[i0]
    yaw0 = path.yaw[i0]
    c, s = np.cos(yaw0), np.sin(yaw0)
    # R(-yaw0) d
    local = np.stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]], axis=1)
    return local, wrap_angle(path.yaw[i1] - yaw0)


def build_pose_pairs(path_F: Path2, path_O: Path2, interval: float = 0.5) -> list[RelativePosePair]:
    """Consecutive relative motions of both paths on a shared time grid of step ``interval``.

    Raises:
        EmptyOverlapError: the common window is shorter than ten intervals.
        TimeMisalignmentError: a grid time has no pose within ``interval / 10`` in either path.
    """
    if interval <= 0.0:
        raise ValueError("interval must be positive")
    if len(path_F) < 2 or len(path_O) < 2:
        raise EmptyOverlapError("paths need at least two poses")
    t0 = max(path_F.t[0], path_O.t[0])
    t1 = min(path_F.t[-1], path_O.t[-1])
    if t1 - t0 < 10.0 * interval - 1e-9:
        raise EmptyOverlapError(
            f"common window {max(t1 - t0, 0.0):.3f} s is shorter than 10 intervals of {interval:g} s")
    n = int(math.floor((t1 - t0) / interval + 1e-9))
    grid = t0 + interval * np.arange(n + 1)
    max_skew = interval / 10.0
    iF = _sample(path_F, grid, max_skew)
    iO = _sample(path_O, grid, max_skew)
    dpF, _ = _relative(path_F, iF)
    dpO, dth = _relative(path_O, iO)
    return [
        RelativePosePair(dpF[k], dpO[k], float(dth[k]), float(grid[k]), float(grid[k + 1]))
        for k in range(n)
    ]


# ---------------------------------------------------------------------------
# residual and Jacobian


def residual(x: ExtrinsicParams, pair: RelativePosePair) -> np.ndarray:
    p = x.p_F_O
    return (p + rot2(x.theta_F_O) @ pair.dp_F - rot2(pair.dtheta) @ p
            - np.array([x.q_x, x.q_y]) * pair.dp_O)


def jacobian(x: ExtrinsicParams, pair: RelativePosePair) -> np.ndarray:
    """2x5 derivative of :func:`residual`, columns ``(p_x, p_y, theta, q_x, q_y)``."""
    J = np.zeros((2, 5))
    J[:, :2] = np.eye(2) - rot2(pair.dtheta)
    # d/dtheta R(theta) d = |d| (cos, sin)(theta + angle(d) + pi/2)
    norm = float(np.linalg.norm(pair.dp_F))
    ang = x.theta_F_O + math.atan2(pair.dp_F[1], pair.dp_F[0]) + 0.5 * math.pi
    J[:, 2] = norm * math.cos(ang), norm * math.sin(ang)
    J[0, 3] = -pair.dp_O[0]
    J[1, 4] = -pair.dp_O[1]
    return J


@dataclass
class _PairArrays:
    dp_F: np.ndarray
    dp_O: np.ndarray
    dtheta: np.ndarray

    @classmethod
    def of(cls, pairs) -> "_PairArrays":
        return cls(
            np.array([p.dp_F for p in pairs], dtype=float).reshape(-1, 2),
            np.array([p.dp_O for p in pairs], dtype=float).reshape(-1, 2),
            np.array([p.dtheta for p in pairs], dtype=float),
        )


def _residuals(x: np.ndarray, a: _PairArrays) -> np.ndarray:
    px, py, th, qx, qy = x
    c, s = math.cos(th), math.sin(th)
    cd, sd = np.cos(a.dtheta), np.sin(a.dtheta)
    rx = px + c * a.dp_F[:, 0] - s * a.dp_F[:, 1] - (cd * px - sd * py) - qx * a.dp_O[:, 0]
    ry = py + s * a.dp_F[:, 0] + c * a.dp_F[:, 1] - (sd * px + cd * py) - qy * a.dp_O[:, 1]
    return np.stack([rx, ry], axis=1)


def _jacobians(x: np.ndarray, a: _PairArrays) -> np.ndarray:
    th = x[2]
    c, s = math.cos(th), math.sin(th)
    cd, sd = np.cos(a.dtheta), np.sin(a.dtheta)
    J = np.zeros((len(a.dtheta), 2, 5))
    J[:, 0, 0] = 1.0 - cd
    J[:, 0, 1] = sd
    J[:, 1, 0] = -sd
    J[:, 1, 1] = 1.0 - cd
    J[:, 0, 2] = -s * a.dp_F[:, 0] - c * a.dp_F[:, 1]
    J[:, 1, 2] = c * a.dp_F[:, 0] - s * a.dp_F[:, 1]
    J[:, 0, 3] = -a.dp_O[:, 0]
    J[:, 1, 4] = -a.dp_O[:, 1]
    return J


def _robust(sq: np.ndarray, cfg: SolverConfig):
    """Per-pair loss rho(|r|^2) and IRLS weight rho'(|r|^2)."""
    if cfg.loss == "none":
        return sq, np.ones_like(sq)
    d2 = cfg.delta * cfg.delta
    inlier = sq <= d2
    root = np.sqrt(sq)
    rho = np.where(inlier, sq, 2.0 * cfg.delta * root - d2)
    w = np.where(inlier, 1.0, cfg.delta / np.where(inlier, 1.0, root))
    return rho, w


def _cost(x: np.ndarray, a: _PairArrays, cfg: SolverConfig) -> float:
    r = _residuals(x, a)
    rho, _ = _robust(np.einsum("ij,ij->i", r, r), cfg)
    return float(np.sum(rho))


def _normal_equations(x: np.ndarray, a: _PairArrays, cfg: SolverConfig):
    r = _residuals(x, a)
    J = _jacobians(x, a)
    sq = np.einsum("ij,ij->i", r, r)
    rho, w = _robust(sq, cfg)
    H = np.einsum("n,nki,nkj->ij", w, J, J)
    g = np.einsum("n,nki,nk->i", w, J, r)
    return float(np.sum(rho)), g, H, r, J


def check_observability(pairs) -> None:
    if len(pairs) < MIN_PAIRS:
        raise UnobservableError(f"{len(pairs)} pairs given, at least {MIN_PAIRS} required")
    if max(abs(p.dtheta) for p in pairs) <= MIN_EXCITATION:
        raise UnobservableError(
            "no pair rotates more than %.2f rad; the lever arm cannot be observed" % MIN_EXCITATION)


def _condition(H: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(H)
    if ev[0] <= 0.0:
        return math.inf
    return float(ev[-1] / ev[0])


def solve(pairs, cfg: SolverConfig = SolverConfig()) -> SolveReport:
    """Levenberg-Marquardt on the five-parameter problem.

    Robust losses enter through iteratively reweighted normal equations; a
    step is accepted only if it lowers the robust cost.

    Raises:
        UnobservableError: fewer than 20 pairs, or no pair with ``|dtheta| > 0.05``.
        RankDeficientError: ``J^T J`` condition number above 1e12.
        MaxIterationsError: no convergence within ``cfg.max_iterations``.
    """
    pairs = list(pairs)
    check_observability(pairs)
    a = _PairArrays.of(pairs)
    x = cfg.x0.as_vector()

    J0 = _jacobians(x, a).reshape(-1, 5)
    if _condition(J0.T @ J0) > MAX_CONDITION:
        raise RankDeficientError("normal equations are rank deficient at the initial guess")

    cost, g, H, _, _ = _normal_equations(x, a, cfg)
    history = [cost]
    lam = 1e-4 * float(np.max(np.diag(H)))
    nu = 2.0
    converged = False
    iterations = 0
    while iterations < cfg.max_iterations:
        if float(np.max(np.abs(g))) < cfg.gradient_tol:
            converged = True
            break
        iterations += 1
        A = H + lam * np.diag(np.diag(H))
        dx = np.linalg.solve(A, -g)
        if np.linalg.norm(dx) < cfg.step_tol * (np.linalg.norm(x) + cfg.step_tol):
            converged = True
            break
        x_new = x + dx
        x_new[2] = wrap_angle(x_new[2])
        cost_new = _cost(x_new, a, cfg)
        predicted = -(g @ dx) - 0.5 * dx @ H @ dx
        if cost_new < cost:
            rho = (cost - cost_new) / predicted if predicted > 0.0 else 1.0
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            x = x_new
            cost, g, H, _, _ = _normal_equations(x, a, cfg)
            history.append(cost)
        else:
            lam *= nu
            nu *= 2.0

    r = _residuals(x, a)
    J = _jacobians(x, a).reshape(-1, 5)
    JtJ = J.T @ J
    if _condition(JtJ) > MAX_CONDITION:
        raise RankDeficientError("normal equations are rank deficient at the solution")
    sq_sum = float(np.sum(r * r))
    dof = max(2 * len(pairs) - 5, 1)
    cov = np.linalg.inv(JtJ) * (sq_sum / dof)
    lo, hi = Q_BOUNDS
    if not (lo < x[3] < hi and lo < x[4] < hi):
        raise UnobservableError(f"solution left the sane scale range: q = ({x[3]:.4f}, {x[4]:.4f})")
    report = SolveReport(
        x_star=ExtrinsicParams.from_vector(x),
        final_cost=cost,
        iterations=iterations,
        converged=converged,
        residual_rms=math.sqrt(sq_sum / len(pairs)),
        covariance_estimate=cov,
        residuals=r,
        cost_history=history,
    )
    if not converged:
        raise MaxIterationsError(f"no convergence after {cfg.max_iterations} iterations", report)
    return report
