"""File formats: IMU CSV, TUM trajectories, JSON documents.

IMU CSV: header ``t,gx,gy,gz,ax,ay,az``; seconds, rad/s, m/s^2.
TUM: one pose per line, ``t x y z qx qy qz qw``, space separated, ``#`` comments.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from pathlib import Path

import numpy as np

from .errors import ParseError
from .geometry import Path2, Path3, rot_z_batch

IMU_HEADER = "t,gx,gy,gz,ax,ay,az"
FLOAT_FMT = "%.17g"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_savetxt(path, data: np.ndarray, header: str | None, delimiter: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            if header is not None:
                fh.write(header + "\n")
            if len(data):
                np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=delimiter)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})", exc.lineno) from exc
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# numeric tables


def _scan_rows(lines, ncols: int, delimiter: str | None, first_line: int) -> np.ndarray:
    rows = []
    for k, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(delimiter)
        if len(fields) != ncols:
            raise ParseError(f"expected {ncols} fields, found {len(fields)}", first_line + k)
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", first_line + k) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", first_line + k)
        rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, ncols)


def _read_table(path, ncols: int, delimiter: str | None, header: str | None) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    first = 1
    if header is not None:
        if not lines or lines[0].strip().replace(" ", "") != header:
            raise ParseError(f"expected header {header!r}", 1)
        lines = lines[1:]
        first = 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            data = np.loadtxt(lines, delimiter=delimiter, comments="#", ndmin=2, dtype=float)
    except ValueError:
        data = None
    if data is not None and data.size and data.shape[1] == ncols and np.all(np.isfinite(data)):
        return data
    # slow path: locate and report the offending line
    return _scan_rows(lines, ncols, delimiter, first)


# ---------------------------------------------------------------------------
# IMU CSV


def write_imu_csv(path, t, gyro, accel) -> None:
    data = np.column_stack([np.asarray(t, float), np.asarray(gyro, float), np.asarray(accel, float)])
    _atomic_savetxt(path, data, IMU_HEADER, ",")


def read_imu_csv(path):
    """Returns ``(t, gyro, accel)``; raises ParseError with the offending line number."""
    data = _read_table(path, 7, ",", IMU_HEADER)
    t = data[:, 0]
    if len(t) > 1 and np.any(np.diff(t) < 0.0):
        k = int(np.argmax(np.diff(t) < 0.0))
        raise ParseError("timestamps go backwards", k + 3)
    return t, data[:, 1:4], data[:, 4:7]


# ---------------------------------------------------------------------------
# quaternions (x, y, z, w)


def quat_from_rot(rot) -> np.ndarray:
    """Unit quaternions (..., 4) in xyzw order with w >= 0."""
    R = np.asarray(rot, dtype=float)
    shape = R.shape[:-2]
    R = R.reshape(-1, 3, 3)
    q = np.empty((len(R), 4))
    tr = np.trace(R, axis1=1, axis2=2)
    d = np.stack([R[:, 0, 0], R[:, 1, 1], R[:, 2, 2]], axis=1)
    # pick the numerically largest of w, x, y, z to divide by
    choice = np.argmax(np.column_stack([tr, d]), axis=1)
    for k in range(len(R)):
        m = R[k]
        c = choice[k]
        if c == 0:
            s = 2.0 * math.sqrt(1.0 + tr[k])
            q[k] = [(m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s, 0.25 * s]
        elif c == 1:
            s = 2.0 * math.sqrt(max(1.0 + m[0, 0] - m[1, 1] - m[2, 2], 0.0))
            q[k] = [0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s, (m[2, 1] - m[1, 2]) / s]
        elif c == 2:
            s = 2.0 * math.sqrt(max(1.0 + m[1, 1] - m[0, 0] - m[2, 2], 0.0))
            q[k] = [(m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s, (m[0, 2] - m[2, 0]) / s]
        else:
            s = 2.0 * math.sqrt(max(1.0 + m[2, 2] - m[0, 0] - m[1, 1], 0.0))
            q[k] = [(m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s, (m[1, 0] - m[0, 1]) / s]
    q[q[:, 3] < 0.0] *= -1.0
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return q.reshape(shape + (4,))


def rot_from_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n < 1e-9):
        raise ParseError("zero-norm quaternion")
    x, y, z, w = np.moveaxis(q / n, -1, 0)
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - z * w)
    R[..., 0, 2] = 2 * (x * z + y * w)
    R[..., 1, 0] = 2 * (x * y + z * w)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - x * w)
    R[..., 2, 0] = 2 * (x * z - y * w)
    R[..., 2, 1] = 2 * (y * z + x * w)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def _yaw_quat(yaw) -> np.ndarray:
    yaw = np.asarray(yaw, dtype=float)
    q = np.zeros(yaw.shape + (4,))
    q[..., 2] = np.sin(0.5 * yaw)
    q[..., 3] = np.cos(0.5 * yaw)
    q[q[..., 3] < 0.0] *= -1.0
    return q


# ---------------------------------------------------------------------------
# TUM trajectories


def write_tum(path, traj) -> None:
    """Write a Path3, or a Path2 lifted to z = 0 with a pure-yaw quaternion."""
    if isinstance(traj, Path2):
        p = np.column_stack([traj.xy, np.zeros(len(traj))])
        q = _yaw_quat(traj.yaw)
    else:
        p, q = traj.p, quat_from_rot(traj.rot)
    _atomic_savetxt(path, np.column_stack([traj.t, p, q]), "# t x y z qx qy qz qw", " ")


def read_tum(path) -> Path3:
    data = _read_table(path, 8, None, None)
    if len(data) == 0:
        raise ParseError(f"{path}: no poses")
    if np.any(np.diff(data[:, 0]) <= 0.0):
        raise ParseError(f"{path}: timestamps must be strictly increasing")
    return Path3(data[:, 0], data[:, 1:4], rot_from_quat(data[:, 4:8]))


def read_tum_planar(path) -> Path2:
    """Read a TUM file as a planar path: x, y and continuous (unwrapped) heading."""
    traj = read_tum(path)
    yaw = np.unwrap(np.arctan2(traj.rot[:, 1, 0], traj.rot[:, 0, 0]))
    return Path2(traj.t, traj.p[:, :2], yaw)


def planar_to_path3(path: Path2) -> Path3:
    return Path3(path.t, np.column_stack([path.xy, np.zeros(len(path))]), rot_z_batch(path.yaw))


def write_table_csv(path, header: str, data) -> None:
    _atomic_savetxt(path, np.asarray(data, dtype=float), header, ",")


def read_table_csv(path, header: str) -> np.ndarray:
    return _read_table(path, len(header.split(",")), ",", header)
