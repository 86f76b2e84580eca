"""Array kinematics, direction angles and Doppler shifts.

Vectors are plain ``numpy`` arrays whose last axis has length 3. Azimuth is
measured from the global x axis; elevation is ``asin(z / |v|)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import speed_of_light

SPEED_OF_LIGHT = speed_of_light  # 299 792 458 m/s, exact


@dataclass(frozen=True)
class Trajectory:
    """Constant-velocity motion ``p0 + v t``."""

    p0: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if not (np.all(np.isfinite(self.p0)) and np.all(np.isfinite(self.v))):
            raise ValueError("trajectory components must be finite")


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array moving with its center."""

    center: Trajectory
    n_elements: int = 1
    spacing: float = 0.0
    azimuth: float = 0.0
    elevation: float = 0.0

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if self.n_elements > 1 and not self.spacing > 0:
            raise ValueError("spacing must be > 0")

    @property
    def axis(self) -> np.ndarray:
        return unit_from_angles(self.azimuth, self.elevation)

    @property
    def velocity(self) -> np.ndarray:
        return self.center.v

    def offsets(self) -> np.ndarray:
        """Element offsets from the array center, shape ``(n, 3)``."""
        k = np.arange(self.n_elements) - (self.n_elements - 1) / 2
        return (k * self.spacing)[:, None] * self.axis

    def positions(self, t) -> np.ndarray:
        """Element positions at times ``t``, shape ``t.shape + (n, 3)``."""
        center = position_at(self.center, t)
        return center[..., None, :] + self.offsets()


def position_at(traj: Trajectory, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be >= 0")
    return traj.p0 + t[..., None] * traj.v


def element_position(array: ArrayConfig, index: int, t: float) -> np.ndarray:
    if not 0 <= index < array.n_elements:
        raise IndexError(f"element {index} out of range for {array.n_elements} elements")
    return position_at(array.center, t) + array.offsets()[index]


def angles_of(vec) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth in (-pi, pi] and elevation in [-pi/2, pi/2] of ``vec``.

    The azimuth of a vector on the z axis is defined as 0.
    """
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec, axis=-1)
    if np.any(norm == 0):
        raise ValueError("zero vector has no direction")
    x, y, z = vec[..., 0], vec[..., 1], vec[..., 2]
    azimuth = np.arctan2(y, x)
    # arctan2 returns -pi for (-x, -0.0); fold into (-pi, pi]
    azimuth = np.where(azimuth == -np.pi, np.pi, azimuth)
    azimuth = np.where((x == 0) & (y == 0), 0.0, azimuth)
    elevation = np.arcsin(np.clip(z / norm, -1.0, 1.0))
    return azimuth, elevation


def unit_from_angles(azimuth, elevation) -> np.ndarray:
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    ce = np.cos(elevation)
    return np.stack([ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation) * np.ones_like(azimuth)], axis=-1)


def wavelength(f_c: float) -> float:
    return SPEED_OF_LIGHT / f_c


def doppler_shift(d, v_rel, lambda_c: float) -> np.ndarray:
    """Doppler shift in Hz for distance vector ``d`` and relative velocity ``v_rel``.

    ``d`` points from the moving antenna toward the far end of the link, so
    closing in gives a positive shift.
    """
    if lambda_c <= 0:
        raise ValueError("wavelength must be > 0")
    d = np.asarray(d, dtype=float)
    v_rel = np.asarray(v_rel, dtype=float)
    norm = np.linalg.norm(d, axis=-1)
    if np.any(norm == 0):
        raise ValueError("zero distance vector")
    return np.sum(d * v_rel, axis=-1) / (lambda_c * norm)


def rotate_to_local(directions, azimuth: float, elevation: float) -> np.ndarray:
    """Express global direction vectors in an array frame whose x axis is the array axis."""
    ca, sa = np.cos(azimuth), np.sin(azimuth)
    ce, se = np.cos(elevation), np.sin(elevation)
    # rows are the local axes in global coordinates
    frame = np.array([
        [ce * ca, ce * sa, se],
        [-sa, ca, 0.0],
        [-se * ca, -se * sa, ce],
    ])
    return np.asarray(directions, dtype=float) @ frame.T
