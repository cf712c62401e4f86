import math

import numpy as np
import pytest

from chassiscal.errors import ParseError
from chassiscal.formats import (
    quat_from_rot,
    read_imu_csv,
    read_json,
    read_table_csv,
    read_tum,
    read_tum_planar,
    rot_from_quat,
    write_imu_csv,
    write_json,
    write_table_csv,
    write_tum,
)
from chassiscal.geometry import Path2, Path3

from conftest import random_rotations


def test_imu_csv_round_trip(tmp_path, rng):
    t = np.arange(100) * 0.005
    g, a = rng.standard_normal((100, 3)), rng.standard_normal((100, 3)) * 10
    write_imu_csv(tmp_path / "imu.csv", t, g, a)
    assert (tmp_path / "imu.csv").read_text().splitlines()[0] == "t,gx,gy,gz,ax,ay,az"
    t2, g2, a2 = read_imu_csv(tmp_path / "imu.csv")
    np.testing.assert_array_equal(t2, t)
    np.testing.assert_array_equal(g2, g)
    np.testing.assert_array_equal(a2, a)


@pytest.mark.parametrize("bad, line", [
    ("0.01,1,2,3,4,5\n", 3),
    ("0.01,1,2,x,4,5,6\n", 3),
    ("0.01,1,2,nan,4,5,6\n", 3),
])
def test_imu_csv_malformed_row(tmp_path, bad, line):
    p = tmp_path / "bad.csv"
    p.write_text("t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,9.8\n" + bad + "0.02,0,0,0,0,0,9.8\n")
    with pytest.raises(ParseError) as info:
        read_imu_csv(p)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_imu_csv_header_and_order(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("time,a,b\n")
    with pytest.raises(ParseError):
        read_imu_csv(p)
    p.write_text("t,gx,gy,gz,ax,ay,az\n0.1,0,0,0,0,0,0\n0.0,0,0,0,0,0,0\n")
    with pytest.raises(ParseError):
        read_imu_csv(p)
    with pytest.raises(ParseError):
        read_imu_csv(tmp_path / "missing.csv")


def test_quaternion_round_trip(rng):
    R = random_rotations(rng, 500)
    q = quat_from_rot(R)
    assert np.all(q[:, 3] >= 0)
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(rot_from_quat(q), R, atol=1e-12)


def test_quaternion_known():
    c = math.sqrt(0.5)
    np.testing.assert_allclose(quat_from_rot(np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])), [0, 0, c, c], atol=1e-15)
    np.testing.assert_allclose(quat_from_rot(np.eye(3)), [0, 0, 0, 1])
    with pytest.raises(ParseError):
        rot_from_quat([0, 0, 0, 0])


def test_tum_round_trip(tmp_path, rng):
    t = np.arange(50) * 0.01
    path = Path3(t, rng.standard_normal((50, 3)), random_rotations(rng, 50))
    write_tum(tmp_path / "p.tum", path)
    back = read_tum(tmp_path / "p.tum")
    np.testing.assert_array_equal(back.t, t)
    np.testing.assert_array_equal(back.p, path.p)
    np.testing.assert_allclose(back.rot, path.rot, atol=1e-14)


def test_tum_planar_unwraps(tmp_path):
    t = np.arange(200) * 0.1
    yaw = 0.2 * np.arange(200)
    write_tum(tmp_path / "o.tum", Path2(t, np.zeros((200, 2)), yaw))
    back = read_tum_planar(tmp_path / "o.tum")
    np.testing.assert_allclose(back.yaw, yaw, atol=1e-12)


def test_tum_errors(tmp_path):
    p = tmp_path / "x.tum"
    p.write_text("# c\n0 0 0 0 0 0 0 1\n0 0 0 0 0 0 0 1\n")
    with pytest.raises(ParseError):
        read_tum(p)
    p.write_text("# only comments\n")
    with pytest.raises(ParseError):
        read_tum(p)
    p.write_text("0 0 0 0 0 0 0 1\n1 0 0 0 0 0 1\n")
    with pytest.raises(ParseError) as info:
        read_tum(p)
    assert info.value.line == 2


def test_json_and_table(tmp_path):
    write_json(tmp_path / "a.json", {"b": 1, "a": [1.5, 2]})
    assert read_json(tmp_path / "a.json") == {"a": [1.5, 2], "b": 1}
    (tmp_path / "bad.json").write_text("{\n  'x': 1\n}")
    with pytest.raises(ParseError) as info:
        read_json(tmp_path / "bad.json")
    assert info.value.line == 2
    write_table_csv(tmp_path / "t.csv", "tau,adev", [[0.1, 0.2], [1.0, 0.05]])
    np.testing.assert_array_equal(read_table_csv(tmp_path / "t.csv", "tau,adev"), [[0.1, 0.2], [1.0, 0.05]])


def test_atomic_write_leaves_no_temp(tmp_path):
    write_json(tmp_path / "x.json", {"a": 1})
    write_json(tmp_path / "x.json", {"a": 2})
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]
