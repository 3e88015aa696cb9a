"""Shared value types and fixed-size rotation helpers.

Conventions used across the package: the world frame is z-up with gravity
(0, 0, -9.81) m/s^2, forces are in newtons, moments in millinewton-meters,
and quaternions are scalar-first (w, x, y, z) with unit norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EPS_PARALLEL = 1e-8
GRAVITY_Z = -9.81
MNM_TO_NM = 1e-3  # moment fields carry mN*m; convert only where mechanics needs SI


class DegenerateOrientationError(ValueError):
    """A direction needed to build an orthonormal frame is ill defined."""


def _check_finite(label: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{label}: non-finite component {v!r}")


@dataclass(frozen=True)
class Vec3:
    """Immutable 3-vector; units depend on context."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        _check_finite("Vec3", self.x, self.y, self.z)

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def scaled(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n <= EPS_PARALLEL:
            raise DegenerateOrientationError("cannot normalize near-zero vector")
        return self.scaled(1.0 / n)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


GRAVITY = Vec3(0.0, 0.0, GRAVITY_Z)
ZERO3 = Vec3(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Wrench:
    """Six-axis load on the sensing plate: forces in N, moments in mN*m.

    Positive fz is compression (the loaded plate moves toward the base).
    """

    fx: float
    fy: float
    fz: float
    mx: float
    my: float
    mz: float

    def __post_init__(self) -> None:
        _check_finite("Wrench", self.fx, self.fy, self.fz, self.mx, self.my, self.mz)

    def force(self) -> Vec3:
        return Vec3(self.fx, self.fy, self.fz)

    def moment(self) -> Vec3:
        return Vec3(self.mx, self.my, self.mz)

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.fx, self.fy, self.fz, self.mx, self.my, self.mz)

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_sequence(cls, seq) -> "Wrench":
        fx, fy, fz, mx, my, mz = (float(v) for v in seq)
        return cls(fx, fy, fz, mx, my, mz)


@dataclass(frozen=True)
class UnitQuaternion:
    """Scalar-first unit quaternion.

    Construction accepts components whose norm deviates from 1 by at most
    1e-6 and snaps them to exact unit norm; anything farther off is
    rejected as a usage error rather than silently renormalized.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        _check_finite("UnitQuaternion", self.w, self.x, self.y, self.z)
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {n!r} deviates from 1 by more than 1e-6")
        if n != 1.0:
            object.__setattr__(self, "w", self.w / n)
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def normalized(cls, w: float, x: float, y: float, z: float) -> "UnitQuaternion":
        """Build from arbitrary nonzero components, dividing out the norm."""
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if n <= EPS_PARALLEL:
            raise ValueError("cannot normalize near-zero quaternion")
        return cls(w / n, x / n, y / n, z / n)

    @classmethod
    def from_axis_angle(cls, axis: Vec3, angle: float) -> "UnitQuaternion":
        u = axis.normalized()
        half = 0.5 * angle
        s = math.sin(half)
        return cls(math.cos(half), u.x * s, u.y * s, u.z * s)

    @classmethod
    def from_rotation_columns(cls, x_col: Vec3, y_col: Vec3, z_col: Vec3) -> "UnitQuaternion":
        """Quaternion for the rotation whose matrix columns are the given axes."""
        m00, m01, m02 = x_col.x, y_col.x, z_col.x
        m10, m11, m12 = x_col.y, y_col.y, z_col.y
        m20, m21, m22 = x_col.z, y_col.z, z_col.z
        tr = m00 + m11 + m22
        if tr > 0.0:
            s = math.sqrt(tr + 1.0) * 2.0
            w = 0.25 * s
            x = (m21 - m12) / s
            y = (m02 - m20) / s
            z = (m10 - m01) / s
        elif m00 >= m11 and m00 >= m22:
            s = math.sqrt(1.0 + m00 - m11 - m22) * 2.0
            w = (m21 - m12) / s
            x = 0.25 * s
            y = (m01 + m10) / s
            z = (m02 + m20) / s
        elif m11 > m22:
            s = math.sqrt(1.0 + m11 - m00 - m22) * 2.0
            w = (m02 - m20) / s
            x = (m01 + m10) / s
            y = 0.25 * s
            z = (m12 + m21) / s
        else:
            s = math.sqrt(1.0 + m22 - m00 - m11) * 2.0
            w = (m10 - m01) / s
            x = (m02 + m20) / s
            y = (m12 + m21) / s
            z = 0.25 * s
        if w < 0.0:  # keep w >= 0 so equal rotations compare equal
            w, x, y, z = -w, -x, -y, -z
        return cls.normalized(w, x, y, z)

    def dot(self, other: "UnitQuaternion") -> float:
        return self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z


def quat_to_basis(q: UnitQuaternion) -> tuple[Vec3, Vec3, Vec3]:
    """Columns of the rotation matrix: body axes expressed in the world frame."""
    w, x, y, z = q.w, q.x, q.y, q.z
    x_col = Vec3(1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y + w * z), 2.0 * (x * z - w * y))
    y_col = Vec3(2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z + w * x))
    z_col = Vec3(2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y))
    return x_col, y_col, z_col


def cross_normalize(a: Vec3, b: Vec3) -> Vec3:
    """Unit vector along a x b; rejects near-parallel inputs."""
    c = a.cross(b)
    n = c.norm()
    if n <= EPS_PARALLEL:
        raise DegenerateOrientationError(f"cross product norm {n!r} below {EPS_PARALLEL}")
    return c.scaled(1.0 / n)


def slerp(qa: UnitQuaternion, qb: UnitQuaternion, alpha: float) -> UnitQuaternion:
    """Shortest-path spherical interpolation, alpha in [0, 1]."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha!r} outside [0, 1]")
    d = qa.dot(qb)
    bw, bx, by, bz = qb.w, qb.x, qb.y, qb.z
    if d < 0.0:  # negate one end to take the short arc
        d = -d
        bw, bx, by, bz = -bw, -bx, -by, -bz
    if d > 1.0 - 1e-9:
        w = qa.w + alpha * (bw - qa.w)
        x = qa.x + alpha * (bx - qa.x)
        y = qa.y + alpha * (by - qa.y)
        z = qa.z + alpha * (bz - qa.z)
        return UnitQuaternion.normalized(w, x, y, z)
    theta = math.acos(max(-1.0, min(1.0, d)))
    s = math.sin(theta)
    ka = math.sin((1.0 - alpha) * theta) / s
    kb = math.sin(alpha * theta) / s
    return UnitQuaternion.normalized(
        ka * qa.w + kb * bw, ka * qa.x + kb * bx, ka * qa.y + kb * by, ka * qa.z + kb * bz
    )
