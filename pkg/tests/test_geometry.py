import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iiotgbsm.geometry import (SPEED_OF_LIGHT, ArrayConfig, Trajectory, angles_of, doppler_shift, element_position,
                               position_at, rotate_to_local, unit_from_angles, wavelength)

vec = st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=3).map(np.array)
nonzero_vec = vec.filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_position_at():
    assert np.array_equal(position_at(Trajectory((0, 0, 0), (1, 0, 0)), 2.0), [2, 0, 0])
    tr = Trajectory((1, 1, 1), (0, -2, 0))
    assert np.array_equal(position_at(tr, 0.0), tr.p0)
    assert np.allclose(position_at(tr, 0.5), [1, 0, 1], atol=0)
    with pytest.raises(ValueError):
        position_at(tr, -1.0)


def test_trajectory_must_be_finite():
    with pytest.raises(ValueError):
        Trajectory((np.nan, 0, 0), (0, 0, 0))


def test_element_positions():
    center = Trajectory((1.0, 2.0, 3.0), (0.0, 0.0, 0.0))
    assert np.array_equal(element_position(ArrayConfig(center, 1, 0.0, 1.0, 0.3), 0, 0.0), center.p0)
    lam = wavelength(5.8e9)
    two = ArrayConfig(Trajectory((0, 0, 0), (0, 0, 0)), 2, lam / 2, 0.0, 0.0)
    assert np.allclose(element_position(two, 0, 0.0), [-lam / 4, 0, 0], atol=1e-15)
    assert np.allclose(element_position(two, 1, 0.0), [lam / 4, 0, 0], atol=1e-15)
    three = ArrayConfig(Trajectory((0, 0, 0), (0, 0, 0)), 3, 0.1, np.pi / 2, 0.0)
    ys = [element_position(three, k, 0.0)[1] for k in range(3)]
    assert np.allclose(ys, [-0.1, 0.0, 0.1], atol=1e-15)
    with pytest.raises(IndexError):
        element_position(three, 3, 0.0)


def test_array_invariants():
    with pytest.raises(ValueError):
        ArrayConfig(Trajectory((0, 0, 0), (0, 0, 0)), 0, 0.1)
    with pytest.raises(ValueError):
        ArrayConfig(Trajectory((0, 0, 0), (0, 0, 0)), 2, 0.0)


@settings(max_examples=50, deadline=None)
@given(p0=vec, v=vec, n=st.integers(1, 8), spacing=st.floats(0.01, 1.0), az=st.floats(-np.pi, np.pi),
       el=st.floats(-np.pi / 2, np.pi / 2), t=st.floats(0, 10))
def test_element_centroid_is_center(p0, v, n, spacing, az, el, t):
    arr = ArrayConfig(Trajectory(p0, v), n, spacing, az, el)
    pos = np.array([element_position(arr, k, t) for k in range(n)])
    assert np.allclose(pos.mean(axis=0), position_at(arr.center, t), atol=1e-9)
    assert np.allclose(arr.positions(np.array([t]))[0], pos, atol=1e-12)


def test_angles_of_examples():
    assert angles_of(np.array([1.0, 0, 0])) == (0.0, 0.0)
    az, el = angles_of(np.array([0.0, 0, 1]))
    assert az == 0.0 and el == pytest.approx(np.pi / 2)
    az, el = angles_of(np.array([1.0, 1.0, np.sqrt(2)]))
    assert az == pytest.approx(np.pi / 4, abs=1e-15) and el == pytest.approx(np.pi / 4, abs=1e-15)
    assert angles_of(np.array([-1.0, -0.0, 0.0]))[0] == np.pi
    with pytest.raises(ValueError):
        angles_of(np.zeros(3))


def test_unit_from_angles_examples():
    assert np.allclose(unit_from_angles(0.0, 0.0), [1, 0, 0], atol=0)
    assert np.allclose(unit_from_angles(np.pi / 2, 0.0), [0, 1, 0], atol=1e-16)


def test_angle_round_trip_1000():
    rng = np.random.default_rng(0)
    az = rng.uniform(-np.pi, np.pi, 1000)
    el = rng.uniform(-1.5, 1.5, 1000)
    u = unit_from_angles(az, el)
    assert np.allclose(np.linalg.norm(u, axis=-1), 1.0, atol=1e-15)
    az2, el2 = angles_of(u)
    assert np.max(np.abs(az2 - az)) < 1e-12
    assert np.max(np.abs(el2 - el)) < 1e-12


def test_wavelength_exact_c():
    assert SPEED_OF_LIGHT == 299_792_458.0
    assert wavelength(5.8e9) == 299_792_458.0 / 5.8e9


def test_doppler_examples():
    lam = wavelength(5.8e9)
    assert doppler_shift([1.0, 0, 0], [0, 1.0, 0], lam) == 0.0
    # closed form 1 / lambda = 5.8e9 / c
    assert doppler_shift([3.0, 0, 0], [1.0, 0, 0], lam) == pytest.approx(19.34, abs=0.01)
    assert doppler_shift([3.0, 0, 0], [1.0, 0, 0], lam) == pytest.approx(5.8e9 / 299_792_458, rel=1e-14)
    assert doppler_shift([1.0, 2, 3], [0, 0, 0], lam) == 0.0
    with pytest.raises(ValueError):
        doppler_shift([0.0, 0, 0], [1.0, 0, 0], lam)
    with pytest.raises(ValueError):
        doppler_shift([1.0, 0, 0], [1.0, 0, 0], 0.0)


@settings(max_examples=100, deadline=None)
@given(d=nonzero_vec, v1=vec, v2=vec, a=st.floats(-5, 5), scale=st.floats(0.01, 100))
def test_doppler_properties(d, v1, v2, a, scale):
    lam = 0.05
    f = doppler_shift(d, v1, lam)
    assert abs(f) <= np.linalg.norm(v1) / lam * (1 + 1e-12) + 1e-12
    lin = doppler_shift(d, a * v1 + v2, lam)
    assert lin == pytest.approx(a * f + doppler_shift(d, v2, lam), rel=1e-9, abs=1e-7)
    assert doppler_shift(scale * d, v1, lam) == pytest.approx(f, rel=1e-9, abs=1e-9)


def test_doppler_vectorized():
    d = np.array([[1.0, 0, 0], [0, 2.0, 0]])
    f = doppler_shift(d, np.array([1.0, 1.0, 0]), 0.5)
    assert np.allclose(f, [2.0, 2.0])


def test_rotate_to_local():
    axis = unit_from_angles(0.7, 0.2)
    assert np.allclose(rotate_to_local(axis, 0.7, 0.2), [1, 0, 0], atol=1e-15)
    rng = np.random.default_rng(1)
    v = rng.normal(size=(20, 3))
    loc = rotate_to_local(v, 1.1, -0.4)
    assert np.allclose(np.linalg.norm(loc, axis=-1), np.linalg.norm(v, axis=-1))
