"""Phone-frame to east-north-up transformation.

Orientation is given as three angles: alpha is the elevation of the phone's
Y axis above the horizontal plane, beta the elevation of the X axis, and
gamma the compass heading (clockwise from true north) of the Y axis's
horizontal projection.  The rotation is built directly from the geometric
definitions rather than from tabulated component formulas; orthonormality of
the device axes constrains the Z tilt through sin^2(a) + sin^2(b) + sin^2(t) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GRAVITY, EnuSample, SensorSample, Trace

# Y-axis within 0.1 degrees of vertical: heading is undefined.
GIMBAL_COS_LIMIT = np.cos(np.radians(89.9))
CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class OrientationAngles:
    """Orientation in radians, already validated for mutual consistency."""

    alpha: float
    beta: float
    gamma: float


@dataclass
class EnuSeries:
    """Vectorized earth-frame view of a trace."""

    t: np.ndarray
    eca: np.ndarray
    nca: np.ndarray
    vca: np.ndarray
    hra: np.ndarray
    degenerate: np.ndarray  # bool, samples that reused the previous rotation

    @property
    def n_samples(self) -> int:
        return len(self.t)

    def components(self) -> np.ndarray:
        """(n, 3) stack of (eca, nca, vca)."""
        return np.stack([self.eca, self.nca, self.vca], axis=1)

    def view(self, start: int, end: int) -> "EnuSeries":
        return EnuSeries(
            self.t[start:end],
            self.eca[start:end],
            self.nca[start:end],
            self.vca[start:end],
            self.hra[start:end],
            self.degenerate[start:end],
        )


def rotation_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Phone-to-world rotation for one orientation, angles in radians.

    Columns are the phone X/Y/Z axes expressed in (east, north, up).
    Raises on a gimbal-degenerate orientation or inconsistent angles.
    """
    R, degen = rotation_matrices(np.array([[alpha, beta, gamma]]))
    if degen[0]:
        raise ValueError("gimbal-degenerate orientation: Y axis is vertical")
    return R[0]


def rotation_matrices(orient_rad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rotation construction with carry-forward for degenerates.

    Returns (R, degenerate) where R is (n, 3, 3) and degenerate marks samples
    whose own rotation was undefined; those reuse the previous valid sample's
    rotation (identity if there is none).
    """
    orient_rad = np.atleast_2d(np.asarray(orient_rad, dtype=float))
    alpha, beta, gamma = orient_rad[:, 0], orient_rad[:, 1], orient_rad[:, 2]
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb = np.sin(beta)
    sg, cg = np.sin(gamma), np.cos(gamma)

    resid = 1.0 - sa * sa - sb * sb  # = sin^2 of the Z-axis tilt
    if np.any(resid < -CONSISTENCY_TOL):
        bad = int(np.argmax(resid < -CONSISTENCY_TOL))
        raise ValueError(f"inconsistent orientation at index {bad}: sin^2(a)+sin^2(b) > 1")
    resid = np.clip(resid, 0.0, None)

    degenerate = ca < GIMBAL_COS_LIMIT
    ca_safe = np.where(degenerate, 1.0, ca)

    # X axis: elevation beta, heading fixed by orthogonality with Y, right-handed.
    a = -sa * sb / ca_safe
    b = np.sqrt(resid) / ca_safe
    X = np.stack([a * sg + b * cg, a * cg - b * sg, sb], axis=1)
    Y = np.stack([ca * sg, ca * cg, sa], axis=1)
    Z = np.cross(X, Y)

    R = np.stack([X, Y, Z], axis=2)  # columns

    if np.any(degenerate):
        idx = np.arange(len(R))
        valid_before = np.where(~degenerate, idx, -1)
        np.maximum.accumulate(valid_before, out=valid_before)
        eye = np.eye(3)
        for i in np.flatnonzero(degenerate):
            R[i] = eye if valid_before[i] < 0 else R[valid_before[i]]
    return R, degenerate


def to_enu(sample: SensorSample, fallback: np.ndarray | None = None) -> EnuSample:
    """Transform one sample; a degenerate orientation needs a fallback rotation."""
    rad = np.radians(np.asarray(sample.orient, dtype=float))
    R, degen = rotation_matrices(rad[None, :])
    if degen[0]:
        if fallback is None:
            raise ValueError("gimbal-degenerate sample and no fallback rotation")
        rot = fallback
    else:
        rot = R[0]
    world = rot @ np.asarray(sample.acc, dtype=float)
    eca, nca = float(world[0]), float(world[1])
    vca = float(world[2] - GRAVITY)
    return EnuSample(sample.t, eca, nca, vca, float(np.hypot(eca, nca)))


def transform(trace: Trace) -> EnuSeries:
    """Earth-frame series for a whole trace; one output sample per input."""
    if trace.n_samples == 0:
        empty = np.empty(0)
        return EnuSeries(empty, empty, empty, empty, empty, np.empty(0, dtype=bool))
    R, degenerate = rotation_matrices(np.radians(trace.orient))
    world = np.einsum("nij,nj->ni", R, trace.acc)
    eca = world[:, 0]
    nca = world[:, 1]
    vca = world[:, 2] - GRAVITY
    hra = np.hypot(eca, nca)
    return EnuSeries(trace.t.copy(), eca, nca, vca, hra, degenerate)


def hra_series(samples: Trace | list[SensorSample]) -> tuple[np.ndarray, np.ndarray]:
    """(t, hra) arrays for a trace or a list of samples, order preserved."""
    if isinstance(samples, Trace):
        series = transform(samples)
        return series.t, series.hra
    if not samples:
        return np.empty(0), np.empty(0)
    trace = Trace(
        device_id="",
        sample_rate=0.0,
        t=np.array([s.t for s in samples], dtype=float),
        acc=np.array([s.acc for s in samples], dtype=float),
        orient=np.array([s.orient for s in samples], dtype=float),
    )
    series = transform(trace)
    return series.t, series.hra
