"""Circular preimage domains and the Moebius maps that pair their circles.

A circular domain is the unit disc with ``M`` smaller, non-overlapping discs
removed.  Circle ``0`` is the unit circle (centre 0, radius 1); circles
``1..M`` are the excised discs.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# inner circles closer than this multiple of their radii sum are flagged
SEPARATION_WARNING = 1.5


class DomainError(ValueError):
    """Raised for invalid indices or points outside the admissible region."""


class SeparationWarning(UserWarning):
    """Emitted when inner circles are close enough to slow product convergence."""


@dataclass(frozen=True)
class MobiusMap:
    """The map ``z -> (a z + b) / (c z + d)``."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if self.a * self.d - self.b * self.c == 0:
            raise DomainError("Moebius map with zero determinant")

    @classmethod
    def identity(cls) -> MobiusMap:
        return cls(1.0 + 0j, 0j, 0j, 1.0 + 0j)

    @classmethod
    def from_matrix(cls, m) -> MobiusMap:
        return cls(complex(m[0][0]), complex(m[0][1]), complex(m[1][0]), complex(m[1][1]))

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.a * z + self.b) / (self.c * z + self.d)
        return out[()] if out.ndim == 0 else out

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.det / (self.c * z + self.d) ** 2
        return out[()] if out.ndim == 0 else out

    def compose(self, other: MobiusMap) -> MobiusMap:
        """Return ``self o other``."""
        return MobiusMap.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> MobiusMap:
        return MobiusMap(self.d, -self.b, -self.c, self.a).normalized()

    def normalized(self) -> MobiusMap:
        s = cmath.sqrt(self.det)
        return MobiusMap(self.a / s, self.b / s, self.c / s, self.d / s)


@dataclass(frozen=True)
class CircularDomain:
    """Unit disc minus ``M`` discs with the given centres and radii."""

    centers: tuple[complex, ...] = ()
    radii: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(complex(c) for c in self.centers))
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if len(self.centers) != len(self.radii):
            raise DomainError("centers and radii must have the same length")

    @classmethod
    def from_circles(cls, circles: Sequence[tuple[complex, float]]) -> CircularDomain:
        return cls(tuple(c for c, _ in circles), tuple(r for _, r in circles))

    @property
    def M(self) -> int:
        return len(self.centers)

    def circle(self, j: int) -> tuple[complex, float]:
        """Centre and radius of circle ``j`` (``j = 0`` is the unit circle)."""
        if not 0 <= j <= self.M:
            raise DomainError(f"circle index {j} out of range 0..{self.M}")
        if j == 0:
            return 0j, 1.0
        return self.centers[j - 1], self.radii[j - 1]

    def contains(self, z, clearance: float = 0.0):
        """True where ``z`` lies in the domain at least ``clearance`` from every circle."""
        z = np.asarray(z, dtype=complex)
        inside = np.abs(z) < 1.0 - clearance
        for c, r in zip(self.centers, self.radii):
            inside &= np.abs(z - c) > r + clearance
        return inside[()] if inside.ndim == 0 else inside

    def boundary_distance(self, z):
        """Distance from ``z`` to the nearest boundary circle (negative outside)."""
        z = np.asarray(z, dtype=complex)
        dist = 1.0 - np.abs(z)
        for c, r in zip(self.centers, self.radii):
            dist = np.minimum(dist, np.abs(z - c) - r)
        return dist[()] if dist.ndim == 0 else dist

    def to_json(self) -> dict:
        return {
            "circles": [
                {"center": [c.real, c.imag], "radius": r}
                for c, r in zip(self.centers, self.radii)
            ]
        }

    @classmethod
    def from_json(cls, data: dict) -> CircularDomain:
        circles = data.get("circles", [])
        return cls(
            tuple(complex(c["center"][0], c["center"][1]) for c in circles),
            tuple(float(c["radius"]) for c in circles),
        )


@dataclass(frozen=True)
class BoundaryPoint:
    circle: int
    t: float
    value: complex


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    separation: float = math.inf

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_domain(d: CircularDomain, warn: bool = True) -> ValidationReport:
    """Check the domain invariants without raising.

    The separation figure of merit is the minimum, over pairs of inner
    circles, of the gap between them divided by the sum of their radii.
    """
    report = ValidationReport()
    for j, (c, r) in enumerate(zip(d.centers, d.radii), start=1):
        if not r > 0:
            report.violations.append(f"circle {j}: radius {r} is not positive")
        if abs(c) + r >= 1.0:
            report.violations.append(f"circle {j}: |center| + radius >= 1")
    for j in range(d.M):
        for k in range(j + 1, d.M):
            gap = abs(d.centers[j] - d.centers[k]) - d.radii[j] - d.radii[k]
            rsum = d.radii[j] + d.radii[k]
            if gap <= 0:
                report.violations.append(f"circles {j + 1} and {k + 1} overlap")
            if rsum > 0:
                report.separation = min(report.separation, gap / rsum)
    if warn and not report.violations and report.separation < SEPARATION_WARNING:
        warnings.warn(
            f"inner circles are close (separation {report.separation:.3g} < "
            f"{SEPARATION_WARNING}); truncated products may converge slowly",
            SeparationWarning,
            stacklevel=2,
        )
    return report


def generator(d: CircularDomain, j: int) -> MobiusMap:
    """The map pairing circle ``j`` with its reflection in the unit circle.

    ``theta_j(z) = delta_j + q_j**2 z / (1 - conj(delta_j) z)``, stored with
    unit determinant.
    """
    if not 1 <= j <= d.M:
        raise DomainError(f"generator index {j} out of range 1..{d.M}")
    delta, q = d.circle(j)
    m = MobiusMap(q * q - abs(delta) ** 2, delta, -delta.conjugate(), 1.0)
    return MobiusMap(m.a / q, m.b / q, m.c / q, m.d / q)


def reflect(z):
    """Reflection in the unit circle, ``1 / conj(z)``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise DomainError("cannot reflect the origin in the unit circle")
    out = 1.0 / np.conj(z)
    return out[()] if out.ndim == 0 else out


def boundary_point(d: CircularDomain, j: int, t: float) -> BoundaryPoint:
    delta, q = d.circle(j)
    return BoundaryPoint(j, float(t), delta + q * cmath.exp(1j * t))


def boundary_points(d: CircularDomain, j: int, t) -> np.ndarray:
    """Vectorised ``delta_j + q_j exp(i t)``."""
    delta, q = d.circle(j)
    return delta + q * np.exp(1j * np.asarray(t, dtype=float))


def circle_angle(d: CircularDomain, j: int, z) -> np.ndarray:
    """Angle of ``z`` about the centre of circle ``j``, in ``[0, 2 pi)``."""
    delta, _ = d.circle(j)
    return np.mod(np.angle(np.asarray(z) - delta), 2 * np.pi)
