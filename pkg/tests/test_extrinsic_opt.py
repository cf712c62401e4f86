import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chassiscal.errors import (
    EmptyOverlapError,
    MaxIterationsError,
    RankDeficientError,
    TimeMisalignmentError,
    UnobservableError,
)
from chassiscal.extrinsic_opt import (
    ExtrinsicParams,
    RelativePosePair,
    SolveReport,
    SolverConfig,
    _jacobians,
    _PairArrays,
    _residuals,
    build_pose_pairs,
    jacobian,
    residual,
    solve,
    vio_path_to_F,
)
from chassiscal.geometry import EulerYPR, Path2, Path3, rot_from_ypr, rot_z_batch, wrap_angle
from chassiscal.pca_calib import TiltResult
from chassiscal.sim import REFERENCE_EXTRINSICS, generate, standard_scenarios

TRUTH = REFERENCE_EXTRINSICS


def residual_oracle(x, dp_F, dp_O, dth):
    """Residual written with plain trigonometry."""
    px, py, th, qx, qy = x
    fx = math.cos(th) * dp_F[0] - math.sin(th) * dp_F[1]
    fy = math.sin(th) * dp_F[0] + math.cos(th) * dp_F[1]
    ox = math.cos(dth) * px - math.sin(dth) * py
    oy = math.sin(dth) * px + math.cos(dth) * py
    return np.array([px + fx - ox - qx * dp_O[0], py + fy - oy - qy * dp_O[1]])


def consistent_pair(x: ExtrinsicParams, dp_O, dth, t0=0.0):
    """Relative F motion implied by a chassis motion, built from the pose chain T_O_F."""
    R = lambda a: np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])  # noqa: E731
    # chassis moves by (diag(q) dp_O, dth); F = O * (p, theta)
    d_O = np.array([x.q_x, x.q_y]) * dp_O
    # p_F(i+1) in O_i: d_O + R(dth) p ; minus p, expressed in F_i
    dp_F = R(-x.theta_F_O) @ (d_O + R(dth) @ x.p_F_O - x.p_F_O)
    return RelativePosePair(dp_F, dp_O, dth, t0, t0 + 0.5)


def random_pairs(rng, x, n, noise=0.0):
    pairs = []
    for k in range(n):
        dp_O = rng.uniform(-0.3, 0.3, 2)
        dth = rng.uniform(-0.6, 0.6)
        p = consistent_pair(x, dp_O, dth, 0.5 * k)
        if noise:
            p = RelativePosePair(p.dp_F + rng.standard_normal(2) * noise, p.dp_O, p.dtheta, p.t_start, p.t_end)
        pairs.append(p)
    return pairs


def test_residual_examples():
    x = ExtrinsicParams()
    np.testing.assert_array_equal(residual(x, RelativePosePair([1, 0], [1, 0], 0.0)), [0, 0])
    x = ExtrinsicParams([0.1, 0.0])
    np.testing.assert_allclose(residual(x, RelativePosePair([0, 0], [0, 0], math.pi / 2)), [0.1, -0.1], atol=1e-15)


def test_jacobian_examples():
    x = ExtrinsicParams([0.1, 0.2], 0.3, 1.01, 0.99)
    J = jacobian(x, RelativePosePair([0.2, -0.1], [0.3, 0.4], 0.0))
    np.testing.assert_array_equal(J[:, :2], np.zeros((2, 2)))
    J = jacobian(x, RelativePosePair([0.2, -0.1], [0.3, 0.4], math.pi / 2))
    np.testing.assert_allclose(J[:, :2], [[1, 1], [-1, 1]], atol=1e-15)
    np.testing.assert_array_equal(J[:, 3], [-0.3, 0.0])
    np.testing.assert_array_equal(J[:, 4], [0.0, -0.4])


state = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-math.pi, math.pi),
                  st.floats(0.6, 1.9), st.floats(0.6, 1.9))
pair = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
                 st.floats(-math.pi, math.pi))


@settings(max_examples=300)
@given(state, pair)
def test_residual_and_jacobian_oracles(xv, pv):
    x = ExtrinsicParams.from_vector(xv)
    pr = RelativePosePair(pv[:2], pv[2:4], pv[4])
    np.testing.assert_allclose(residual(x, pr), residual_oracle(xv, pv[:2], pv[2:4], pv[4]), atol=1e-13)
    J = jacobian(x, pr)
    h = 1e-6
    for j in range(5):
        e = np.zeros(5)
        e[j] = h
        fd = (residual_oracle(np.add(xv, e), pv[:2], pv[2:4], pv[4])
              - residual_oracle(np.subtract(xv, e), pv[:2], pv[2:4], pv[4])) / (2 * h)
        np.testing.assert_allclose(J[:, j], fd, atol=1e-8)
    a = _PairArrays.of([pr])
    np.testing.assert_allclose(_residuals(np.asarray(xv), a)[0], residual(x, pr), atol=1e-14)
    np.testing.assert_allclose(_jacobians(np.asarray(xv), a)[0], J, atol=1e-14)


def test_consistent_pairs_have_zero_residual(rng):
    for p in random_pairs(rng, TRUTH, 200):
        assert np.max(np.abs(residual(TRUTH, p))) < 1e-15


def test_params_validation_and_units():
    with pytest.raises(ValueError):
        ExtrinsicParams(q_x=0.4)
    u = TRUTH.display_units()
    assert u["theta_F_O_deg"] == pytest.approx(-89.29)
    assert u["s_x_inv_percent"] == pytest.approx(99.733)
    np.testing.assert_array_equal(ExtrinsicParams.from_dict(TRUTH.to_dict()).as_vector(), TRUTH.as_vector())


# ---------------------------------------------------------------------------
# path conversion and pairing


def _path3(t, xy, yaw, z=0.0, R_tilt=np.eye(3)):
    p = np.column_stack([xy, np.full(len(t), z)])
    return Path3(t, p, rot_z_batch(yaw) @ R_tilt)


def test_vio_to_F_trivial(rng):
    t = np.arange(50) * 0.1
    xy, yaw = rng.standard_normal((50, 2)), np.cumsum(rng.uniform(-0.5, 0.5, 50))
    out = vio_path_to_F(_path3(t, xy, yaw, z=0.3), TiltResult.zero(), 0.0)
    np.testing.assert_allclose(out.xy, xy, atol=1e-15)
    np.testing.assert_allclose(out.yaw, yaw, atol=1e-12)


def test_vio_to_F_yaw_increments(rng):
    tilt = TiltResult(math.radians(3.0), math.radians(-91.0), np.zeros(3), np.zeros(3), 0)
    R_B_F = tilt.rotation()
    t = np.arange(100) * 0.1
    yaw = np.cumsum(rng.uniform(-0.4, 0.4, 100))
    # body poses of a tilted IMU on a yaw-only platform: R_W_B = Rz(yaw) R_F_B
    body = _path3(t, np.zeros((100, 2)), yaw, R_tilt=R_B_F.T)
    out = vio_path_to_F(body, tilt, 0.25)
    np.testing.assert_allclose(np.diff(out.yaw), np.diff(yaw), atol=1e-9)


def test_vio_to_F_simulation():
    spec = standard_scenarios()["extrinsics-cal"].noiseless()
    data = generate(spec)
    tilt = TiltResult(spec.pitch, spec.roll, np.zeros(3), np.zeros(3), 0)
    out = vio_path_to_F(data.truth["b_path"], tilt, spec.p_Bz_O)
    f = data.truth["f_path"]
    np.testing.assert_allclose(out.xy, f.xy, atol=1e-9)
    np.testing.assert_allclose(wrap_angle(out.yaw - f.yaw), 0.0, atol=1e-9)


def test_pairs_stationary():
    t = np.arange(0, 10.01, 0.01)
    p = Path2(t, np.zeros((len(t), 2)), np.zeros(len(t)))
    pairs = build_pose_pairs(p, p, 0.5)
    assert len(pairs) == 20
    assert all(np.all(q.dp_F == 0) and np.all(q.dp_O == 0) and q.dtheta == 0 for q in pairs)


def test_pairs_straight_line():
    t = np.arange(0, 20.001, 0.01)
    p = Path2(t, np.column_stack([t, np.zeros_like(t)]), np.zeros(len(t)))
    pairs = build_pose_pairs(p, p, 1.0)
    assert len(pairs) == 20
    for q in pairs:
        np.testing.assert_allclose(q.dp_F, [1, 0], atol=1e-12)
        np.testing.assert_allclose(q.dp_O, [1, 0], atol=1e-12)
        assert q.dtheta == 0.0
        assert q.t_end - q.t_start == pytest.approx(1.0)


def test_pairs_circle_chords():
    v, om = 0.5, 0.3
    r = v / om
    t = np.arange(0, 30.0001, 0.01)
    xy = np.column_stack([r * np.sin(om * t), r * (1 - np.cos(om * t))])
    p = Path2(t, xy, om * t)
    for q in build_pose_pairs(p, p, 0.5):
        a = om * 0.5
        chord = np.array([r * math.sin(a), r * (1 - math.cos(a))])
        np.testing.assert_allclose(q.dp_O, chord, atol=1e-6)
        assert q.dtheta == pytest.approx(a, abs=1e-9)


def test_pairs_errors():
    t = np.arange(0, 10.0, 0.1)
    p = Path2(t, np.zeros((len(t), 2)), np.zeros(len(t)))
    with pytest.raises(EmptyOverlapError):
        build_pose_pairs(p, p, 1.0)
    gap = Path2(np.concatenate([t[:40], t[60:] + 20]), np.zeros((80, 2)), np.zeros(80))
    long = Path2(np.arange(0, 40, 0.1), np.zeros((400, 2)), np.zeros(400))
    with pytest.raises(TimeMisalignmentError):
        build_pose_pairs(gap, long, 0.5)
    with pytest.raises(ValueError):
        build_pose_pairs(p, p, 0.0)


# ---------------------------------------------------------------------------
# solver


def test_solve_random_pairs(rng):
    pairs = random_pairs(rng, TRUTH, 100)
    rep = solve(pairs, SolverConfig())
    np.testing.assert_allclose(rep.x_star.as_vector(), TRUTH.as_vector(), atol=1e-9)
    assert rep.converged and rep.final_cost < 1e-20
    assert all(b <= a for a, b in zip(rep.cost_history, rep.cost_history[1:]))


def test_straight_line_unobservable():
    pairs = [RelativePosePair([0.2, 0.0], [0.2, 0.0], 0.0, k, k + 1) for k in range(50)]
    with pytest.raises(UnobservableError):
        solve(pairs)


def test_too_few_pairs(rng):
    with pytest.raises(UnobservableError):
        solve(random_pairs(rng, TRUTH, 19))


def test_rank_deficient(rng):
    # no chassis x motion: q_x has no influence
    pairs = [consistent_pair(TRUTH, np.array([0.0, rng.uniform(-0.3, 0.3)]), rng.uniform(-0.5, 0.5)) for _ in range(40)]
    with pytest.raises(RankDeficientError):
        solve(pairs)


def test_max_iterations_carries_report(rng):
    pairs = random_pairs(rng, TRUTH, 50, noise=1e-3)
    with pytest.raises(MaxIterationsError) as info:
        solve(pairs, SolverConfig(max_iterations=1))
    assert info.value.report is not None and info.value.report.iterations == 1


def test_noise_variance_estimate():
    rng = np.random.default_rng(21)
    sigma = 2e-3
    pairs = random_pairs(rng, TRUTH, 500, noise=sigma)
    rep = solve(pairs, SolverConfig(loss="none"))
    assert rep.final_cost / (2 * 500 - 5) == pytest.approx(sigma**2, rel=0.2)
    # covariance is positive definite and small
    assert np.all(np.linalg.eigvalsh(rep.covariance_estimate) > 0)


def test_huber_resists_outliers():
    rng = np.random.default_rng(5)
    pairs = random_pairs(rng, TRUTH, 200, noise=1e-3)
    for k in range(0, 200, 20):
        p = pairs[k]
        pairs[k] = RelativePosePair(p.dp_F + [0.08, -0.06], p.dp_O, p.dtheta, p.t_start, p.t_end)
    err_h = np.abs(solve(pairs, SolverConfig(loss="huber", delta=0.01)).x_star.as_vector() - TRUTH.as_vector())
    err_n = np.abs(solve(pairs, SolverConfig(loss="none")).x_star.as_vector() - TRUTH.as_vector())
    assert np.linalg.norm(err_h) < 0.2 * np.linalg.norm(err_n)


def test_order_invariance():
    rng = np.random.default_rng(9)
    pairs = random_pairs(rng, TRUTH, 200, noise=2e-3)
    a = solve(pairs).x_star.as_vector()
    b = solve([pairs[i] for i in rng.permutation(len(pairs))]).x_star.as_vector()
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_start_from_far_heading(rng):
    pairs = random_pairs(rng, ExtrinsicParams([0.3, -0.2], 2.8, 1.05, 0.95), 100)
    rep = solve(pairs, SolverConfig(x0=ExtrinsicParams([0, 0], -2.0, 1.0, 1.0)))
    np.testing.assert_allclose(rep.x_star.as_vector(), [0.3, -0.2, 2.8, 1.05, 0.95], atol=1e-9)


def test_report_round_trip(rng):
    rep = solve(random_pairs(rng, TRUTH, 40, noise=1e-3))
    back = SolveReport.from_dict(rep.to_dict())
    np.testing.assert_array_equal(back.x_star.as_vector(), rep.x_star.as_vector())
    np.testing.assert_array_equal(back.covariance_estimate, rep.covariance_estimate)
    assert back.to_dict() == rep.to_dict()


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(loss="cauchy")
    with pytest.raises(ValueError):
        SolverConfig(delta=0.0)
    with pytest.raises(ValueError):
        replace(SolverConfig(), max_iterations=0)
