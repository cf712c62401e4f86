import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chassiscal.chassis_model import (
    BodyVelocity,
    ChassisScale,
    MecanumGeometry,
    body_from_wheel_speeds,
    dead_reckon,
    measure_velocity,
    wheel_speeds_from_body,
)
from chassiscal.errors import NonMonotoneTimeError

G = MecanumGeometry(wheel_radius=0.05, half_length=0.2, half_width=0.15)


def test_measure_velocity_trivial():
    v = BodyVelocity(0.3, -0.2, 0.5)
    np.testing.assert_array_equal(measure_velocity(v, ChassisScale()), v.as_array())
    np.testing.assert_allclose(measure_velocity([1, 1, 0], ChassisScale(1.02, 0.98, 1.0)), [1.02, 0.98, 0.0])


def test_reference_scales_invert():
    k = ChassisScale(1 / 0.99733, 1 / 1.0374, 1.0)
    v = np.array([0.4, -0.3, 0.7])
    back = measure_velocity(v, k) * np.array([0.99733, 1.0374, 1.0])
    np.testing.assert_allclose(back, v, atol=1e-12)
    np.testing.assert_allclose(k.inverse().as_array(), [0.99733, 1.0374, 1.0], rtol=1e-15)


def test_measure_velocity_noise_seeded():
    v = np.zeros((50_000, 3))
    a = measure_velocity(v, ChassisScale(), [0.01, 0.02, 0.03], np.random.default_rng(1))
    b = measure_velocity(v, ChassisScale(), [0.01, 0.02, 0.03], np.random.default_rng(1))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(a.std(axis=0), [0.01, 0.02, 0.03], rtol=0.02)


def test_scale_validation():
    with pytest.raises(ValueError):
        ChassisScale(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        MecanumGeometry(wheel_radius=-1.0)


def test_forward_motion():
    np.testing.assert_allclose(wheel_speeds_from_body([1, 0, 0], MecanumGeometry(0.05)), [20, 20, 20, 20])


def test_pure_spin_symmetry():
    w = wheel_speeds_from_body([0, 0, 1.5], G)
    fl, fr, rl, rr = w
    assert fl == pytest.approx(-fr) and rl == pytest.approx(-rr)
    assert abs(fl) == pytest.approx(abs(rr)) and fl == pytest.approx(rl)
    assert abs(fl) == pytest.approx(1.5 * 0.35 / 0.05)


def test_sideways_pattern():
    fl, fr, rl, rr = wheel_speeds_from_body([0, 1, 0], G)
    assert fl == pytest.approx(-20) and fr == pytest.approx(20)
    assert rl == pytest.approx(20) and rr == pytest.approx(-20)


vel = st.floats(-3, 3)


@given(vel, vel, vel)
def test_wheel_round_trip(vx, vy, om):
    b = body_from_wheel_speeds(wheel_speeds_from_body([vx, vy, om], G), G)
    np.testing.assert_allclose(b.as_array(), [vx, vy, om], atol=1e-12)


def test_dead_reckon_trivial():
    t = np.linspace(0, 2, 201)
    p = dead_reckon(t, np.zeros((201, 3)))
    assert np.all(p.xy == 0) and np.all(p.yaw == 0)
    p = dead_reckon(t, np.tile([1.0, 0.0, 0.0], (201, 1)))
    np.testing.assert_allclose(p.xy[-1], [2.0, 0.0], atol=1e-12)
    assert p.yaw[-1] == 0.0


def test_dead_reckon_circle():
    v, om, dt = 0.5, 0.4, 1e-3
    t = np.arange(0, 20 + dt / 2, dt)
    p = dead_reckon(t, np.tile([v, 0.0, om], (len(t), 1)))
    r = v / om
    # closed form: center at (0, r)
    x_true = r * np.sin(om * t)
    y_true = r * (1 - np.cos(om * t))
    assert np.max(np.hypot(p.xy[:, 0] - x_true, p.xy[:, 1] - y_true)) < 1e-4
    np.testing.assert_allclose(p.yaw, om * t, atol=1e-9)


def test_dead_reckon_scale_correction():
    t = np.linspace(0, 10, 1001)
    v_true = np.column_stack([np.sin(t), np.cos(0.5 * t), 0.3 * np.sin(0.2 * t)])
    k = ChassisScale(1 / 0.99733, 1 / 1.0374, 1.0)
    corrected = dead_reckon(t, measure_velocity(v_true, k), k.inverse())
    truth = dead_reckon(t, v_true)
    np.testing.assert_allclose(corrected.xy, truth.xy, atol=1e-12)
    np.testing.assert_allclose(corrected.yaw, truth.yaw, atol=1e-12)


def test_dead_reckon_start_pose():
    t = np.linspace(0, 1, 11)
    p = dead_reckon(t, np.tile([1.0, 0.0, 0.0], (11, 1)), x0=[1.0, 2.0, math.pi / 2])
    np.testing.assert_allclose(p.xy[-1], [1.0, 3.0], atol=1e-12)


def test_non_monotone_time():
    with pytest.raises(NonMonotoneTimeError):
        dead_reckon([0.0, 0.1, 0.1], np.zeros((3, 3)))
