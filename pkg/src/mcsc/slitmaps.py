"""Canonical slit maps built from ratios of prime functions.

All maps take a :class:`~mcsc.prime.PrimeEvaluator` first and accept array
arguments for ``zeta``.  Structural poles (``zeta = -1`` for the half-plane
map, the pole point of the unbounded radial map) raise :class:`PoleError`
so that callers can reroute.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .domain import DomainError, reflect
from .prime import BranchTrackingError, PrimeEvaluator, unwrap_from

# distance below which an argument is treated as sitting on a pole
POLE_EPS = 1e-14


class PoleError(ArithmeticError):
    """Evaluation requested at (or numerically on top of) a pole."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class SlitKind(enum.Enum):
    HALF_PLANE_RADIAL = "half-plane-radial"
    CIRCULAR_SLIT_DISC = "circular-slit-disc"
    UNBOUNDED_RADIAL = "unbounded-radial"


@dataclass(frozen=True)
class SlitMapKind:
    """Which slit domain to use, with its interior parameters.

    ``zero`` is the interior point sent to the origin (circular-slit disc and
    unbounded radial maps); ``pole`` is the point sent to infinity (unbounded
    radial map only).
    """

    tag: SlitKind = SlitKind.HALF_PLANE_RADIAL
    zero: complex | None = None
    pole: complex | None = None

    def __post_init__(self):
        tag = SlitKind(self.tag)
        object.__setattr__(self, "tag", tag)
        if tag is SlitKind.HALF_PLANE_RADIAL:
            return
        if self.zero is None:
            raise DomainError(f"{tag.value} needs an interior zero point")
        object.__setattr__(self, "zero", complex(self.zero))
        if self.zero == 0:
            raise DomainError("the interior zero point must not be the origin")
        if tag is SlitKind.UNBOUNDED_RADIAL:
            if self.pole is None:
                raise DomainError("unbounded-radial needs an interior pole point")
            object.__setattr__(self, "pole", complex(self.pole))
            if self.pole == 0:
                raise DomainError("the interior pole point must not be the origin")
            if self.pole == self.zero:
                raise DomainError("zero and pole points must differ")

    @classmethod
    def half_plane(cls) -> SlitMapKind:
        return cls(SlitKind.HALF_PLANE_RADIAL)

    @classmethod
    def disc(cls, zero) -> SlitMapKind:
        return cls(SlitKind.CIRCULAR_SLIT_DISC, zero)

    @classmethod
    def unbounded(cls, zero, pole) -> SlitMapKind:
        return cls(SlitKind.UNBOUNDED_RADIAL, zero, pole)

    def validate(self, domain) -> None:
        for name in ("zero", "pole"):
            pt = getattr(self, name)
            if pt is not None and not domain.contains(pt):
                raise DomainError(f"{name} point {pt} is not inside the domain")

    def to_json(self) -> dict:
        out = {"kind": self.tag.value}
        if self.zero is not None:
            out["zero"] = [self.zero.real, self.zero.imag]
        if self.pole is not None:
            out["pole"] = [self.pole.real, self.pole.imag]
        return out

    @classmethod
    def from_json(cls, data: dict) -> SlitMapKind:
        def pt(key):
            v = data.get(key)
            return None if v is None else complex(v[0], v[1])

        return cls(SlitKind(data.get("kind", "half-plane-radial")), pt("zero"), pt("pole"))


def _check_pole(zeta, where, what):
    z = np.asarray(zeta, dtype=complex)
    hit = np.abs(z - where) < POLE_EPS
    if np.any(hit):
        raise PoleError(f"{what} has a pole at zeta={complex(where)}", complex(where))


def bounded_radial_slit(p: PrimeEvaluator, zeta, z1, z2, j: int | None = None):
    """``omega(zeta, z1) / omega(zeta, z2)`` for two points on one circle.

    Zero at ``z1``, pole at ``z2``; the argument is constant on every
    boundary circle (modulo pi on the circle carrying ``z1, z2``).
    """
    if j is not None:
        delta, q = p.domain.circle(j)
        for pt in (z1, z2):
            if abs(abs(pt - delta) - q) > 1e-10:
                raise DomainError(f"point {pt} is not on circle {j}")
    _check_pole(zeta, z2, "F")
    return p.omega(zeta, z1) / p.omega(zeta, z2)


def halfplane_slit(p: PrimeEvaluator, zeta):
    """Map onto the upper half-plane with radial slits; ``1 -> 0``, ``-1 -> infinity``."""
    _check_pole(zeta, -1.0, "the half-plane slit map")
    return -1j * p.omega(zeta, 1.0) / p.omega(zeta, -1.0)


def halfplane_numerator(p: PrimeEvaluator, zeta):
    """``omega_z(z, 1) omega(z, -1) - omega_z(z, -1) omega(z, 1)``."""
    w1, d1 = p.omega_and_deriv(zeta, 1.0)
    wm, dm = p.omega_and_deriv(zeta, -1.0)
    return d1 * wm - dm * w1


def halfplane_slit_deriv(p: PrimeEvaluator, zeta):
    _check_pole(zeta, -1.0, "the half-plane slit map derivative")
    w1, d1 = p.omega_and_deriv(zeta, 1.0)
    wm, dm = p.omega_and_deriv(zeta, -1.0)
    return -1j * (d1 * wm - dm * w1) / wm**2


def unbounded_radial_slit(p: PrimeEvaluator, zeta, zero, pole):
    """Map onto the plane cut along ``M + 1`` radial slits; ``zero -> 0``, ``pole -> infinity``."""
    _check_pole(zeta, pole, "the unbounded radial slit map")
    zero, pole = complex(zero), complex(pole)
    num = p.omega(zeta, zero) * p.omega(zeta, reflect(zero))
    den = p.omega(zeta, pole) * p.omega(zeta, reflect(pole))
    return num / den


def unbounded_radial_numerator(p: PrimeEvaluator, zeta, zero, pole):
    """Derivative of the unbounded radial map times the square of its denominator.

    This is the four-term alternating sum over ``zero, pole`` and their
    reflections.
    """
    zero, pole = complex(zero), complex(pole)
    wa, da = p.omega_and_deriv(zeta, zero)
    wb, db = p.omega_and_deriv(zeta, pole)
    wra, dra = p.omega_and_deriv(zeta, reflect(zero))
    wrb, drb = p.omega_and_deriv(zeta, reflect(pole))
    return (
        da * (wb * wra * wrb)
        - db * (wa * wra * wrb)
        + dra * (wa * wb * wrb)
        - drb * (wa * wb * wra)
    )


def unbounded_radial_slit_deriv(p: PrimeEvaluator, zeta, zero, pole):
    _check_pole(zeta, pole, "the unbounded radial slit map derivative")
    pole = complex(pole)
    den = p.omega(zeta, pole) * p.omega(zeta, reflect(pole))
    return unbounded_radial_numerator(p, zeta, zero, pole) / den**2


def circular_slit_disc(p: PrimeEvaluator, zeta, zero):
    """Map onto the unit disc with concentric circular slits; ``zero -> 0``."""
    zero = complex(zero)
    return p.omega(zeta, zero) / (abs(zero) * p.omega(zeta, reflect(zero)))


def circular_slit_disc_numerator(p: PrimeEvaluator, zeta, zero):
    """``omega_z(z, a) omega(z, 1/conj a) - omega_z(z, 1/conj a) omega(z, a)``."""
    zero = complex(zero)
    wa, da = p.omega_and_deriv(zeta, zero)
    wr, dr = p.omega_and_deriv(zeta, reflect(zero))
    return da * wr - dr * wa


def circular_slit_disc_logderiv(p: PrimeEvaluator, zeta, zero):
    """Derivative of ``log eta``, i.e. of the strip map."""
    zero = complex(zero)
    wa, da = p.omega_and_deriv(zeta, zero)
    wr, dr = p.omega_and_deriv(zeta, reflect(zero))
    return da / wa - dr / wr


def strip_map(p: PrimeEvaluator, zeta, zero, path=None, max_subdivisions: int = 30):
    """``log eta(zeta)`` continued along a path.

    By default the logarithm is continued from the boundary point 1 (where
    the principal value is used) along ``path`` if given, otherwise along the
    straight segment from 1 to ``zeta``.  The resulting branch cut is the
    segment from ``zero`` to 1 when the straight segments do not cross it.
    Only scalar ``zeta`` is supported.
    """
    zero = complex(zero)
    zeta = complex(zeta)
    pts = np.asarray(path if path is not None else [1.0, zeta], dtype=complex)
    if abs(pts[-1] - zeta) > 1e-15:
        raise ValueError("path must end at zeta")
    f = lambda z: circular_slit_disc(p, z, zero)
    cur = np.log(complex(f(pts[0])))
    for z0, z1 in zip(pts[:-1], pts[1:]):
        n = 8
        for _ in range(max_subdivisions):
            s = np.linspace(0.0, 1.0, n + 1)[1:]
            seg = z0 + (z1 - z0) * s
            if np.min(np.abs(seg - zero)) < 1e-12:
                raise BranchTrackingError("strip-map path passes through the zero point")
            tracked = unwrap_from(cur, np.log(f(seg)))
            steps = np.abs(np.diff(np.concatenate([[cur.imag], tracked.imag])))
            if steps.max() < np.pi / 2:
                cur = tracked[-1]
                break
            n *= 2
        else:
            raise BranchTrackingError("could not resolve the branch of log eta")
    return cur


# -- per-kind dispatch used by the root finder and prefactors -----------------


def slit_map(p: PrimeEvaluator, kind: SlitMapKind, zeta):
    """The slit map for ``kind`` (``eta`` for the circular-slit disc)."""
    if kind.tag is SlitKind.HALF_PLANE_RADIAL:
        return halfplane_slit(p, zeta)
    if kind.tag is SlitKind.CIRCULAR_SLIT_DISC:
        return circular_slit_disc(p, zeta, kind.zero)
    return unbounded_radial_slit(p, zeta, kind.zero, kind.pole)


def slit_map_deriv(p: PrimeEvaluator, kind: SlitMapKind, zeta):
    """Derivative of the map whose boundary images are straight slits.

    For the circular-slit disc this is the derivative of ``log eta``.
    """
    if kind.tag is SlitKind.HALF_PLANE_RADIAL:
        return halfplane_slit_deriv(p, zeta)
    if kind.tag is SlitKind.CIRCULAR_SLIT_DISC:
        return circular_slit_disc_logderiv(p, zeta, kind.zero)
    return unbounded_radial_slit_deriv(p, zeta, kind.zero, kind.pole)


# -- wraparound-safe statistics -------------------------------------------------


def arg_spread(values, modulo_pi: bool = False) -> float:
    """Largest deviation of ``arg(values)`` from their circular mean.

    With ``modulo_pi`` the arguments are compared as lines (angles doubled),
    so a sign flip does not count as a deviation.
    """
    v = np.asarray(values, dtype=complex).ravel()
    k = 2.0 if modulo_pi else 1.0
    u = (v / np.abs(v)) ** k
    mean = np.sum(u)
    if abs(mean) == 0:
        return float(np.pi)
    dev = np.angle(u * np.conj(mean / abs(mean)))
    return float(np.max(np.abs(dev)) / k)


def modulus_spread(values) -> float:
    """Relative spread of ``|values|`` about their mean."""
    m = np.abs(np.asarray(values))
    return float((m.max() - m.min()) / m.mean())
