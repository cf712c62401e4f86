"""Pinhole and unified (mirror) camera projection with radial-tangential distortion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, InvalidRayError, NoConvergenceError


@dataclass(frozen=True)
class PinholeIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    alpha: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError("focal lengths must be positive")

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, self.fx * self.alpha, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True)
class DistortionParams:
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    k3: float = 0.0


@dataclass(frozen=True)
class UnifiedModel:
    pinhole: PinholeIntrinsics
    dist: DistortionParams = field(default_factory=DistortionParams)
    zeta: float = 0.0

    def __post_init__(self):
        if self.zeta < 0.0:
            raise ValueError("zeta must be non-negative")


# Intel RealSense ZR300 reference calibration
ZR300_RGB = UnifiedModel(
    PinholeIntrinsics(fx=617.92, fy=618.54, cx=316.07, cy=244.96),
    DistortionParams(k1=0.1182, k2=-0.2507, p1=-4.410e-4, p2=2.824e-4),
    zeta=0.0,
)
ZR300_FISHEYE = UnifiedModel(
    PinholeIntrinsics(fx=761.95, fy=761.42, cx=309.99, cy=234.27),
    DistortionParams(k1=-0.07772, k2=0.2731, p1=-2.380e-3, p2=3.120e-3),
    zeta=1.743,
)


def distort(xy, dist: DistortionParams) -> np.ndarray:
    """Apply radial then tangential distortion to normalized coordinates (2,) or (N, 2)."""
    xy = np.asarray(xy, dtype=float)
    x, y = xy[..., 0], xy[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + r2 * (dist.k1 + r2 * (dist.k2 + r2 * dist.k3))
    xd = x * radial + 2.0 * dist.p1 * x * y + dist.p2 * (r2 + 2.0 * x * x)
    yd = y * radial + dist.p1 * (r2 + 2.0 * y * y) + 2.0 * dist.p2 * x * y
    return np.stack([xd, yd], axis=-1)


def undistort(xy_d, dist: DistortionParams, tol: float = 1e-10, max_iter: int = 50) -> np.ndarray:
    """Invert :func:`distort` by the fixed-point iteration ``x <- x_d - (distort(x) - x)``.

    Raises:
        NoConvergenceError: step still above ``tol`` after ``max_iter`` iterations.
    """
    xy_d = np.asarray(xy_d, dtype=float)
    x = xy_d.copy()
    # a diverging iteration overflows; that is reported as NoConvergence below
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            x_new = xy_d - (distort(x, dist) - x)
            step = float(np.max(np.abs(x_new - x))) if x.size else 0.0
            x = x_new
            if not np.all(np.isfinite(x)):
                break
            if step < tol:
                return x
    raise NoConvergenceError(f"undistortion did not converge in {max_iter} iterations")


def _to_pixels(xy, intr: PinholeIntrinsics) -> np.ndarray:
    x, y = xy[..., 0], xy[..., 1]
    u = intr.fx * x + intr.fx * intr.alpha * y + intr.cx
    v = intr.fy * y + intr.cy
    return np.stack([u, v], axis=-1)


def project_pinhole(P, intr: PinholeIntrinsics, dist: DistortionParams | None = None) -> np.ndarray:
    """Pixel coordinates of camera-frame point(s) ``P`` (3,) or (N, 3)."""
    P = np.asarray(P, dtype=float)
    z = P[..., 2]
    if np.any(z <= 0.0):
        raise BehindCameraError("point has non-positive depth")
    xy = P[..., :2] / z[..., None]
    if dist is not None:
        xy = distort(xy, dist)
    return _to_pixels(xy, intr)


def project_unified(P, model: UnifiedModel) -> np.ndarray:
    """Unified-model projection: normalize by ``z + zeta |P|``, distort, apply K."""
    P = np.asarray(P, dtype=float)
    denom = P[..., 2] + model.zeta * np.linalg.norm(P, axis=-1)
    if np.any(denom <= 0.0):
        raise InvalidRayError("point is outside the model's field of view")
    xy = distort(P[..., :2] / denom[..., None], model.dist)
    return _to_pixels(xy, model.pinhole)
