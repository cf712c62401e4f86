"""Allan deviation and white-noise / bias-instability identification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, NonUniformSamplingError, NoWhiteNoiseRegionError

MIN_CLUSTERS = 9
# flat-floor convention: bias instability = min(adev) / 0.664
BIAS_FLOOR_FACTOR = 0.664


@dataclass(frozen=True)
class AllanPoint:
    tau: float
    adev: float
    n_clusters: int


@dataclass(frozen=True)
class AllanFit:
    white_noise_density: float
    bias_instability: float
    tau_at_minimum: float

    def to_dict(self) -> dict:
        return {
            "white_noise_density": self.white_noise_density,
            "bias_instability": self.bias_instability,
            "tau_at_minimum": self.tau_at_minimum,
        }


def check_uniform(t, sample_rate: float, tol: float = 0.01) -> None:
    """Raise if any sample interval deviates from ``1/sample_rate`` by more than ``tol`` (relative)."""
    t = np.asarray(t, dtype=float)
    if len(t) < 2:
        return
    dt = np.diff(t)
    nominal = 1.0 / sample_rate
    worst = float(np.max(np.abs(dt - nominal))) / nominal
    if worst > tol:
        raise NonUniformSamplingError(
            f"sample interval deviates {100 * worst:.2f}% from 1/{sample_rate:g} s")


def default_taus(n_samples: int, sample_rate: float, per_decade: int = 10) -> np.ndarray:
    """Log-spaced cluster times from ``2/fs`` to ``N/(10 fs)``, snapped to whole samples."""
    m_lo, m_hi = 2, n_samples // 10
    if m_hi < m_lo:
        raise InsufficientDataError(f"{n_samples} samples are too few for an Allan curve")
    decades = math.log10(m_hi / m_lo)
    count = max(2, int(math.floor(decades * per_decade)) + 1)
    m = np.unique(np.round(np.logspace(math.log10(m_lo), math.log10(m_hi), count)).astype(np.int64))
    return m / sample_rate


def _cluster_sizes(taus, sample_rate: float) -> np.ndarray:
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0:
        raise ValueError("taus must not be empty")
    if np.any(np.diff(taus) <= 0.0):
        raise ValueError("taus must be strictly ascending")
    m = np.round(taus * sample_rate)
    if np.any(m < 1) or np.any(np.abs(m - taus * sample_rate) > 1e-6 * np.maximum(1.0, m)):
        raise ValueError("each tau must be a positive integer multiple of 1/sample_rate")
    return m.astype(np.int64)


def allan_deviation(samples, sample_rate: float, taus=None, timestamps=None) -> list[AllanPoint]:
    """Overlapping Allan deviation of a uniformly sampled rate signal.

    Works on the integrated signal ``theta_k = sum(y[:k]) / fs`` and evaluates,
    for cluster size ``m`` (``tau = m / fs``),

        sigma^2(tau) = sum_k (theta[k+2m] - 2 theta[k+m] + theta[k])^2 / (2 tau^2 (N - 2m))

    with ``N`` the length of ``theta``.

    Args:
        samples: 1-D signal.
        sample_rate: Hz.
        taus: cluster times in seconds; defaults to :func:`default_taus`.
        timestamps: optional sample times, checked for uniformity (1 %).

    Raises:
        InsufficientDataError: a tau leaves fewer than 9 clusters.
        NonUniformSamplingError: timestamps are not uniform.
    """
    y = np.asarray(samples, dtype=float).reshape(-1)
    if timestamps is not None:
        check_uniform(timestamps, sample_rate)
    if taus is None:
        taus = default_taus(len(y), sample_rate)
    m_all = _cluster_sizes(taus, sample_rate)
    n = len(y)
    bad = m_all[n // m_all < MIN_CLUSTERS]
    if bad.size:
        raise InsufficientDataError(
            f"tau = {bad[0] / sample_rate:g} s leaves {n // bad[0]} clusters (< {MIN_CLUSTERS})")
    # remove the mean first: keeps the cumulative sum small, and adev is offset-invariant anyway
    theta = np.concatenate(([0.0], np.cumsum(y - y.mean()))) / sample_rate
    out = []
    for m in m_all:
        tau = m / sample_rate
        d = theta[2 * m:] - 2.0 * theta[m:-m] + theta[:-2 * m]
        avar = float(np.dot(d, d)) / (2.0 * tau * tau * d.size)
        out.append(AllanPoint(float(tau), math.sqrt(avar), int(n // m)))
    return out


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    runs, start = [], None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def fit_noise_params(curve: list[AllanPoint], min_run: int = 5) -> AllanFit:
    """Read white-noise density and bias instability off an Allan curve.

    The white-noise region is the longest contiguous run of at least
    ``min_run`` points whose local log-log slope lies in [-0.6, -0.4]. Its
    ``tau^(-1/2)`` line is fitted in log space and evaluated at 1 s.
    """
    tau = np.array([p.tau for p in curve], dtype=float)
    adev = np.array([p.adev for p in curve], dtype=float)
    if tau.size < min_run or tau[-1] / tau[0] < 1e3 - 1e-9:
        raise InsufficientDataError("Allan curve must span at least three decades of tau")
    if np.any(adev <= 0.0):
        raise NoWhiteNoiseRegionError("curve contains zero deviations")
    lt, la = np.log10(tau), np.log10(adev)
    seg_slope = np.diff(la) / np.diff(lt)
    good = (seg_slope >= -0.6) & (seg_slope <= -0.4)
    # a run of k good segments covers k + 1 points
    runs = [(a, b + 1) for a, b in _runs(good) if b + 1 - a >= min_run]
    if not runs:
        raise NoWhiteNoiseRegionError("no tau^-1/2 region of at least %d points" % min_run)
    a, b = max(runs, key=lambda r: (r[1] - r[0], -r[0]))
    intercept = float(np.mean(la[a:b] + 0.5 * lt[a:b]))
    i_min = int(np.argmin(adev))
    return AllanFit(
        white_noise_density=10.0 ** intercept,
        bias_instability=float(adev[i_min]) / BIAS_FLOOR_FACTOR,
        tau_at_minimum=float(tau[i_min]),
    )
