"""Integration paths inside a circular domain.

A path is a list of pieces (straight segments and circular arcs), each
parameterised over ``s in [0, 1]``.  :func:`route` builds a default path
between two points of the closed domain that keeps a clearance from every
boundary circle and from a list of point obstacles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import CircularDomain, DomainError


class ClearanceError(DomainError):
    """A path or routing request violates the clearance rule."""


@dataclass(frozen=True)
class Segment:
    start: complex
    end: complex

    def point(self, s):
        return self.start + (self.end - self.start) * np.asarray(s, dtype=float)

    def deriv(self, s):
        return np.full(np.shape(s), self.end - self.start, dtype=complex)

    @property
    def length(self) -> float:
        return abs(self.end - self.start)


@dataclass(frozen=True)
class Arc:
    """``center + radius * exp(i t)`` for ``t`` running from ``t0`` to ``t1``."""

    center: complex
    radius: float
    t0: float
    t1: float

    def point(self, s):
        t = self.t0 + (self.t1 - self.t0) * np.asarray(s, dtype=float)
        return self.center + self.radius * np.exp(1j * t)

    def deriv(self, s):
        t = self.t0 + (self.t1 - self.t0) * np.asarray(s, dtype=float)
        return 1j * (self.t1 - self.t0) * self.radius * np.exp(1j * t)

    @property
    def start(self) -> complex:
        return complex(self.point(0.0))

    @property
    def end(self) -> complex:
        return complex(self.point(1.0))

    @property
    def length(self) -> float:
        return abs(self.t1 - self.t0) * self.radius


def polyline(points) -> list[Segment]:
    pts = [complex(z) for z in points]
    if len(pts) < 2:
        raise ValueError("a polyline needs at least two points")
    return [Segment(a, b) for a, b in zip(pts[:-1], pts[1:]) if a != b]


def path_points(pieces, per_piece: int = 16) -> np.ndarray:
    """Sample points along a path (for plotting and clearance checks)."""
    s = np.linspace(0.0, 1.0, per_piece + 1)
    out = [pieces[0].point(0.0)]
    for pc in pieces:
        out.extend(pc.point(s[1:]))
    return np.asarray(out, dtype=complex)


def default_clearance(domain: CircularDomain) -> float:
    """A quarter of the smallest gap between boundary circles, capped at 0.05."""
    gaps = []
    for j in range(1, domain.M + 1):
        delta, q = domain.circle(j)
        gaps.append(1.0 - abs(delta) - q)
        for k in range(j + 1, domain.M + 1):
            dk, qk = domain.circle(k)
            gaps.append(abs(delta - dk) - q - qk)
    return min([0.05] + [0.25 * g for g in gaps])


def _obstacles(domain, clearance, points):
    obs = [(domain.circle(j)[0], domain.circle(j)[1] + clearance) for j in range(1, domain.M + 1)]
    obs.extend((complex(z), clearance) for z in points)
    return obs


def _near_circle(domain: CircularDomain, z: complex, limit: float):
    """Index of a boundary circle within ``limit`` of ``z`` (closest first), else ``None``."""
    best, best_dist = None, limit
    for j in range(domain.M + 1):
        delta, q = domain.circle(j)
        dist = abs(abs(z - delta) - q)
        if dist <= best_dist:
            best, best_dist = j, dist
    return best


def push_inward(domain: CircularDomain, z: complex, distance: float) -> complex:
    """Move a point near a boundary circle along the normal to ``distance`` from it."""
    j = _near_circle(domain, z, distance)
    if j is None:
        return z
    delta, q = domain.circle(j)
    r = z - delta
    if r == 0:
        raise ClearanceError(f"cannot push the centre of circle {j}")
    u = r / abs(r)
    return delta + u * (q - distance if j == 0 else q + distance)


def _first_hit(a: complex, b: complex, obstacles, skip=()):
    """First obstacle disc the open segment ``a -> b`` enters: ``(s_in, s_out, index)``."""
    d = b - a
    L2 = abs(d) ** 2
    best = None
    for i, (c, R) in enumerate(obstacles):
        if i in skip or L2 == 0:
            continue
        # |a + s d - c|^2 = R^2
        f = a - c
        B = 2 * (f * np.conj(d)).real
        C = abs(f) ** 2 - R**2
        disc = B * B - 4 * L2 * C
        if disc <= 0:
            continue
        sq = np.sqrt(disc)
        s0, s1 = (-B - sq) / (2 * L2), (-B + sq) / (2 * L2)
        if s1 <= 1e-12 or s0 >= 1 - 1e-12:
            continue
        if best is None or s0 < best[0]:
            best = (s0, s1, i)
    return best


def _arc_ok(domain, arc: Arc, obstacles, own: int, clearance: float) -> bool:
    pts = arc.point(np.linspace(0.0, 1.0, 65))
    if np.any(np.abs(pts) > 1.0 - 0.5 * clearance):
        return False
    for i, (c, R) in enumerate(obstacles):
        if i != own and np.any(np.abs(pts - c) < R * (1 - 1e-9)):
            return False
    return True


def route(
    domain: CircularDomain,
    start: complex,
    end: complex,
    clearance: float | None = None,
    avoid=(),
    max_detours: int = 32,
) -> list:
    """Default path from ``start`` to ``end`` inside the closed domain.

    End points on (or near) a boundary circle are joined to the interior by
    a normal segment of length ``2 * clearance``.  In between, the path is a
    straight segment that detours around each inner disc (inflated by
    ``clearance``) and each point in ``avoid`` along the shorter admissible
    arc.
    """
    if clearance is None:
        clearance = default_clearance(domain)
    start, end = complex(start), complex(end)
    for z in (start, end):
        if not domain.contains(z, -1e-10):
            raise ClearanceError(f"point {z} is outside the domain")
    obstacles = _obstacles(domain, clearance, avoid)
    for z in (start, end):
        for c, R in obstacles[domain.M:]:
            if abs(z - c) < R:
                raise ClearanceError(f"point {z} is within {clearance:g} of the avoided point {c}")

    a = push_inward(domain, start, 2 * clearance)
    b = push_inward(domain, end, 2 * clearance)
    head = [Segment(start, a)] if a != start else []
    tail = [Segment(b, end)] if b != end else []

    pieces: list = []
    cur = a
    last = ()
    for _ in range(max_detours):
        hit = _first_hit(cur, b, obstacles, skip=last)
        if hit is None:
            if cur != b:
                pieces.append(Segment(cur, b))
            return head + pieces + tail
        s0, s1, i = hit
        c, R = obstacles[i]
        if s1 >= 1 - 1e-12 or s0 <= 1e-12:
            raise ClearanceError(f"path end point lies inside the clearance zone of obstacle {c}")
        p_in = cur + (b - cur) * s0
        p_out = cur + (b - cur) * s1
        t_in = np.angle(p_in - c)
        sweep = np.mod(np.angle(p_out - c) - t_in, 2 * np.pi)
        options = sorted([sweep, sweep - 2 * np.pi], key=abs)
        for sw in options:
            arc = Arc(c, R, t_in, t_in + sw)
            if _arc_ok(domain, arc, obstacles, i, clearance):
                break
        else:
            raise ClearanceError(f"no admissible detour around obstacle at {c}")
        pieces.append(Segment(cur, p_in))
        pieces.append(arc)
        cur = arc.end
        last = (i,)
    raise ClearanceError("too many detours while routing")
