"""Slit-endpoint preimages and the prefactor functions of the mapping derivative.

Every prefactor has the form ``numerator / prod omega(zeta, gamma)`` where the
numerator is the derivative numerator of a slit map and the ``gamma`` are the
zeros of that slit map's derivative on the boundary circles.  The quotient is
analytic and zero-free in the closed domain; at a ``gamma`` point it is a
0/0 expression, so evaluation exactly there raises :class:`PoleError` and
evaluation very close to one goes through a mean-value ring.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .domain import DomainError, boundary_points, reflect
from .prime import PrimeEvaluator
from .slitmaps import (
    POLE_EPS,
    PoleError,
    SlitKind,
    SlitMapKind,
    circular_slit_disc_numerator,
    halfplane_numerator,
    slit_map_deriv,
    unbounded_radial_numerator,
)

SCAN_SAMPLES = 720


class GammaRootError(ArithmeticError):
    """The root scan did not find exactly two roots on a required circle."""

    def __init__(self, message, circle=None, profile=None):
        super().__init__(message)
        self.circle = circle
        self.profile = profile


@dataclass(frozen=True)
class GammaSet:
    """Two preimages of slit endpoints on each relevant circle."""

    kind: SlitMapKind
    roots: dict[int, tuple[complex, complex]] = field(default_factory=dict)
    residual: float = 0.0

    def points(self, circles=None) -> np.ndarray:
        keys = sorted(self.roots) if circles is None else [j for j in circles if j in self.roots]
        return np.array([g for j in keys for g in self.roots[j]], dtype=complex)

    def to_json(self) -> dict:
        return {
            "kind": self.kind.to_json(),
            "roots": {
                str(j): [[g.real, g.imag] for g in pair] for j, pair in sorted(self.roots.items())
            },
            "residual": self.residual,
        }

    @classmethod
    def from_json(cls, data: dict) -> GammaSet:
        roots = {
            int(j): tuple(complex(x, y) for x, y in pair) for j, pair in data["roots"].items()
        }
        return cls(SlitMapKind.from_json(data["kind"]), roots, float(data.get("residual", 0.0)))


def required_circles(p: PrimeEvaluator, kind: SlitMapKind) -> list[int]:
    first = 0 if kind.tag is SlitKind.UNBOUNDED_RADIAL else 1
    return list(range(first, p.domain.M + 1))


def _tangential_derivative(p, kind, j, t):
    """``d/dt`` of the slit map along circle ``j`` at angles ``t``."""
    delta, q = p.domain.circle(j)
    z = delta + q * np.exp(1j * np.asarray(t, dtype=float))
    return slit_map_deriv(p, kind, z) * 1j * (z - delta)


def find_gamma(p: PrimeEvaluator, kind: SlitMapKind, samples: int = SCAN_SAMPLES) -> GammaSet:
    """Locate the zeros of the slit-map derivative on each required circle.

    Along a circle the slit map moves on a fixed line through the origin, so
    its tangential derivative ``dl/dt = r'(t) u`` for a fixed unit ``u``.  The
    real function ``r'(t)`` is scanned on ``samples`` uniform angles, sign
    changes are bracketed and each bracket is polished with Brent's method.
    """
    kind.validate(p.domain)
    roots: dict[int, tuple[complex, complex]] = {}
    residual = 0.0
    t = 2 * np.pi * (np.arange(samples) + 0.5) / samples
    for j in required_circles(p, kind):
        dl = _tangential_derivative(p, kind, j, t)
        unit2 = np.sum((dl / np.abs(dl)) ** 2)
        u = np.sqrt(unit2 / abs(unit2))
        profile = (np.conj(u) * dl).real
        g = lambda s: float((np.conj(u) * _tangential_derivative(p, kind, j, s)).real)
        nxt = np.roll(profile, -1)
        idx = np.nonzero(np.sign(profile) != np.sign(nxt))[0]
        if len(idx) != 2:
            raise GammaRootError(
                f"found {len(idx)} sign changes on circle {j}, expected 2",
                circle=j,
                profile=profile,
            )
        found = []
        for i in idx:
            lo = t[i]
            hi = t[i + 1] if i + 1 < samples else t[0] + 2 * np.pi
            try:
                s = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            except (RuntimeError, ValueError) as exc:
                raise GammaRootError(
                    f"root polish failed on circle {j} in bracket [{lo}, {hi}]: {exc}",
                    circle=j,
                    profile=profile,
                ) from exc
            found.append(np.mod(s, 2 * np.pi))
        found.sort()
        pts = boundary_points(p.domain, j, np.array(found))
        residual = max(residual, float(np.max(np.abs(slit_map_deriv(p, kind, pts)))))
        roots[j] = (complex(pts[0]), complex(pts[1]))
    return GammaSet(kind, roots, residual)


def _check_gamma_hit(zeta, pts):
    z = np.asarray(zeta, dtype=complex)
    for g in pts:
        if np.any(np.abs(z - g) < POLE_EPS):
            raise PoleError(f"prefactor evaluated at gamma point {complex(g)}", complex(g))


# inside this distance of a gamma point (relative to the circle radius) the
# 0/0 quotient loses digits, so it is replaced by a mean over a small ring
NEAR_GAMMA = 1e-4
RING_NODES = 16


def _removable_quotient(numerator, denominator, zeta, pts, scale):
    """``numerator(z) / denominator(z)`` for a quotient whose zeros cancel at ``pts``.

    Points within ``NEAR_GAMMA * scale`` of a cancelling zero are evaluated by
    the mean-value property on a ring of radius ``2 NEAR_GAMMA scale``,
    which is exact for analytic functions up to rapidly decaying terms.
    """
    z = np.asarray(zeta, dtype=complex)
    _check_gamma_hit(z, pts)
    flat = np.atleast_1d(z).ravel()
    out = numerator(flat) / denominator(flat)
    if len(pts):
        dist = np.min(np.abs(flat[:, None] - np.asarray(pts)[None, :]), axis=1)
        near = np.flatnonzero(dist < NEAR_GAMMA * scale)
        if len(near):
            ring = 2 * NEAR_GAMMA * scale * np.exp(2j * np.pi * np.arange(RING_NODES) / RING_NODES)
            pts_ring = (flat[near][:, None] + ring[None, :]).ravel()
            vals = numerator(pts_ring) / denominator(pts_ring)
            out[near] = vals.reshape(len(near), RING_NODES).mean(axis=1)
    return out.reshape(z.shape) if z.ndim else out[0]


def _gamma_scale(p, circles):
    radii = [p.domain.circle(j)[1] for j in circles]
    return min(radii) if radii else 1.0


def _gamma_product(p, g: GammaSet, zeta, circles):
    pts = g.points(circles)
    if len(pts) == 0:
        return np.ones_like(np.asarray(zeta, dtype=complex))
    return np.prod(p.omega_outer(zeta, pts), axis=-1)


def _require(g: GammaSet, tag: SlitKind):
    if g.kind.tag is not tag:
        raise DomainError(f"gamma set was computed for {g.kind.tag.value}, not {tag.value}")


def prefactor_halfplane(p: PrimeEvaluator, g: GammaSet, zeta):
    """Prefactor for the upper half-plane with radial slits."""
    _require(g, SlitKind.HALF_PLANE_RADIAL)
    circles = range(1, p.domain.M + 1)
    return _removable_quotient(
        lambda z: halfplane_numerator(p, z),
        lambda z: _gamma_product(p, g, z, circles),
        zeta,
        g.points(circles),
        _gamma_scale(p, circles),
    )


def prefactor_disc(p: PrimeEvaluator, zero, g: GammaSet, zeta):
    """Prefactor for the disc with concentric circular slits (interior point ``zero``)."""
    _require(g, SlitKind.CIRCULAR_SLIT_DISC)
    circles = range(1, p.domain.M + 1)
    return _removable_quotient(
        lambda z: circular_slit_disc_numerator(p, z, zero),
        lambda z: _gamma_product(p, g, z, circles),
        zeta,
        g.points(circles),
        _gamma_scale(p, circles),
    )


def prefactor_unbounded_radial(p: PrimeEvaluator, zero, pole, g: GammaSet, zeta):
    """Prefactor for the plane with ``M + 1`` radial slits."""
    _require(g, SlitKind.UNBOUNDED_RADIAL)
    if 0 not in g.roots:
        raise DomainError("unbounded-radial gamma set must include the unit circle")
    circles = range(0, p.domain.M + 1)
    return _removable_quotient(
        lambda z: unbounded_radial_numerator(p, z, zero, pole),
        lambda z: _gamma_product(p, g, z, circles),
        zeta,
        g.points(circles),
        _gamma_scale(p, circles),
    )


def prefactor_bounded(p: PrimeEvaluator, g: GammaSet, zeta):
    """Prefactor selected by the kind the gamma set was computed for."""
    kind = g.kind
    if kind.tag is SlitKind.HALF_PLANE_RADIAL:
        return prefactor_halfplane(p, g, zeta)
    if kind.tag is SlitKind.CIRCULAR_SLIT_DISC:
        return prefactor_disc(p, kind.zero, g, zeta)
    return prefactor_unbounded_radial(p, kind.zero, kind.pole, g, zeta)


def prefactor_infinity(p: PrimeEvaluator, g: GammaSet, zeta_inf, zeta):
    """Prefactor for unbounded polygonal targets with ``zeta_inf`` sent to infinity.

    The bounded prefactor divided by ``[omega(z, zinf) omega(z, 1/conj zinf)]**2``.
    """
    zeta_inf = complex(zeta_inf)
    if zeta_inf == 0:
        raise DomainError("zeta_inf = 0 is not supported; recentre the domain")
    z = np.asarray(zeta, dtype=complex)
    if np.any(np.abs(z - zeta_inf) < POLE_EPS):
        raise PoleError(f"prefactor has a double pole at zeta_inf={zeta_inf}", zeta_inf)
    pair = p.omega(z, zeta_inf) * p.omega(z, reflect(zeta_inf))
    return prefactor_bounded(p, g, z) / pair**2


def prefactor(p: PrimeEvaluator, g: GammaSet, zeta, zeta_inf=None):
    if zeta_inf is None:
        return prefactor_bounded(p, g, zeta)
    return prefactor_infinity(p, g, zeta_inf, zeta)
