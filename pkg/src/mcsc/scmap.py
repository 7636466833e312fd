"""Schwarz-Christoffel maps from a circular domain onto polygonal regions.

The mapping derivative is

    dz/dzeta = B * S(zeta) * prod_{j,k} omega(zeta, a_k^(j)) ** beta_k^(j)

where ``S`` is a slit-map prefactor.  Powers are evaluated as
``exp(beta * log omega)`` with every logarithm continued along the
integration path from the base point, where the principal branch is used.

Quadrature is adaptive Gauss-Kronrod (7/15) on path pieces.  When a piece
ends at a prevertex, the last cell is a Gauss-Jacobi rule whose weight
``(1 - s) ** beta`` absorbs the endpoint singularity; the cell is halved
(with Gauss-Kronrod on the discarded half) until two Gauss-Jacobi orders
agree.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .domain import CircularDomain, DomainError, boundary_points
from .paths import Arc, ClearanceError, Segment, default_clearance, polyline, route
from .prefactor import GammaSet, prefactor
from .prime import BranchTrackingError, PrimeEvaluator, unwrap_from
from .quadrature import GAUSS_INDEX, GAUSS_WEIGHTS, KRONROD_NODES, KRONROD_WEIGHTS, gauss_jacobi
from .slitmaps import PoleError, SlitKind, SlitMapKind, slit_map_deriv

ON_CIRCLE_TOL = 1e-12
BETA_SUM_TOL = 1e-9
BASE_OFFSET = 1e-3
MAX_DEPTH = 48
JACOBI_ORDERS = (20, 30)
JUMP_LIMIT = math.pi / 2


class SpecError(DomainError):
    """A mapping specification violates its invariants."""

    def __init__(self, problems):
        problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("; ".join(problems))
        self.problems = problems


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not converge; ``segment`` is the worst sub-interval."""

    def __init__(self, message, segment=None, estimate=None):
        super().__init__(message)
        self.segment = segment
        self.estimate = estimate


def _cpair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


@dataclass(frozen=True)
class MappingSpec:
    """Prevertices, turning parameters and constants of one mapping.

    ``angles[j]`` holds the prevertex angles on circle ``j`` (about its
    centre), in counter-clockwise order; ``betas[j]`` the matching turning
    parameters.  The slit-map kind is the one the gamma set was computed for.
    """

    domain: CircularDomain
    angles: tuple
    betas: tuple
    gammas: GammaSet
    bounded: bool = True
    zeta_inf: complex | None = None
    A: complex = 0j
    B: complex = 1 + 0j
    base_point: complex | None = None

    def __post_init__(self):
        angles = tuple(tuple(float(t) for t in row) for row in self.angles)
        betas = tuple(tuple(float(b) for b in row) for row in self.betas)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "A", complex(self.A))
        object.__setattr__(self, "B", complex(self.B))
        if self.zeta_inf is not None:
            object.__setattr__(self, "zeta_inf", complex(self.zeta_inf))
        if self.base_point is not None:
            object.__setattr__(self, "base_point", complex(self.base_point))
        problems = spec_problems(self)
        if problems:
            raise SpecError(problems)

    @property
    def kind(self) -> SlitMapKind:
        return self.gammas.kind

    def prevertices(self, j: int) -> np.ndarray:
        return boundary_points(self.domain, j, np.array(self.angles[j], dtype=float))

    def flat(self):
        """All prevertices, their betas and circle indices as flat arrays."""
        pts = np.concatenate([self.prevertices(j) for j in range(self.domain.M + 1)])
        betas = np.array([b for row in self.betas for b in row], dtype=float)
        circ = np.array([j for j, row in enumerate(self.betas) for _ in row], dtype=int)
        return pts, betas, circ

    @property
    def base(self) -> complex:
        """The integration base point (default 1, moved inward if 1 is a prevertex)."""
        if self.base_point is not None:
            return self.base_point
        pts, _, _ = self.flat()
        if len(pts) and np.min(np.abs(pts - 1.0)) < 1e-9:
            return 1.0 - BASE_OFFSET + 0j
        return 1.0 + 0j

    def replace(self, **changes) -> MappingSpec:
        return dataclasses.replace(self, **changes)

    def to_json(self) -> dict:
        return {
            "domain": self.domain.to_json(),
            "prevertices": [
                [{"angle": t, "beta": b} for t, b in zip(ts, bs)]
                for ts, bs in zip(self.angles, self.betas)
            ],
            "gammas": self.gammas.to_json(),
            "bounded": self.bounded,
            "zeta_inf": None if self.zeta_inf is None else _cpair(self.zeta_inf),
            "A": _cpair(self.A),
            "B": _cpair(self.B),
            "base_point": None if self.base_point is None else _cpair(self.base_point),
        }

    @classmethod
    def from_json(cls, data: dict, gammas: GammaSet | None = None) -> MappingSpec:
        """Build a spec from its JSON form.

        Prevertices are given either by ``angle`` or by ``point``; points must
        lie on their circle within 1e-12.  ``gammas`` overrides (or supplies)
        the gamma set.
        """
        domain = CircularDomain.from_json(data["domain"])
        angles, betas = [], []
        for j, row in enumerate(data["prevertices"]):
            ts, bs = [], []
            for v in row:
                if "angle" in v:
                    ts.append(float(v["angle"]))
                else:
                    z = complex(*v["point"])
                    delta, q = domain.circle(j) if j <= domain.M else (0j, 1.0)
                    if abs(abs(z - delta) - q) > ON_CIRCLE_TOL:
                        raise SpecError(f"prevertex {z} is not on circle {j}")
                    ts.append(float(np.angle(z - delta)))
                bs.append(float(v["beta"]))
            angles.append(ts)
            betas.append(bs)
        if gammas is None:
            if "gammas" not in data:
                raise SpecError("the mapping has no gamma set")
            gammas = GammaSet.from_json(data["gammas"])

        def opt(key):
            v = data.get(key)
            return None if v is None else complex(*v)

        return cls(
            domain,
            tuple(angles),
            tuple(betas),
            gammas,
            bool(data.get("bounded", True)),
            opt("zeta_inf"),
            opt("A") or 0j,
            opt("B") or (1 + 0j),
            opt("base_point"),
        )


def spec_problems(spec: MappingSpec) -> list[str]:
    """Every invariant violation of ``spec`` (empty when valid)."""
    out = []
    M = spec.domain.M
    if len(spec.angles) != M + 1 or len(spec.betas) != M + 1:
        return [f"expected prevertex lists for {M + 1} circles"]
    for j, (ts, bs) in enumerate(zip(spec.angles, spec.betas)):
        if len(ts) != len(bs):
            out.append(f"circle {j}: {len(ts)} angles but {len(bs)} betas")
            continue
        if not ts:
            out.append(f"circle {j}: no prevertices")
            continue
        for k, b in enumerate(bs):
            if not -1.0 < b <= 1.0:
                out.append(f"circle {j}, vertex {k}: beta {b} outside (-1, 1]")
        target = -2.0 if (j == 0 and spec.bounded) else 2.0
        if abs(sum(bs) - target) > BETA_SUM_TOL:
            out.append(f"circle {j}: turning parameters sum to {sum(bs):.12g}, expected {target:g}")
        gaps = np.mod(np.diff(np.append(ts, ts[0])), 2 * np.pi)
        if len(ts) > 1 and (np.any(gaps <= 1e-13) or abs(gaps.sum() - 2 * np.pi) > 1e-9):
            out.append(f"circle {j}: prevertices are not strictly counter-clockwise ordered")
    kind = spec.gammas.kind
    if spec.bounded:
        if spec.zeta_inf is not None:
            out.append("bounded spec must not set zeta_inf")
    else:
        if spec.zeta_inf is None:
            out.append("unbounded spec needs zeta_inf")
        elif spec.zeta_inf == 0:
            out.append("zeta_inf = 0 is not supported")
        elif not spec.domain.contains(spec.zeta_inf):
            out.append(f"zeta_inf {spec.zeta_inf} is not inside the domain")
    needed = range(0 if kind.tag is SlitKind.UNBOUNDED_RADIAL else 1, M + 1)
    missing = [j for j in needed if j not in spec.gammas.roots]
    if missing:
        out.append(f"gamma set lacks circles {missing}")
    if spec.base_point is not None and not spec.domain.contains(spec.base_point, -1e-12):
        out.append(f"base point {spec.base_point} is outside the domain")
    return out


def validate_spec(spec: MappingSpec) -> None:
    problems = spec_problems(spec)
    if problems:
        raise SpecError(problems)


# -- integrand ------------------------------------------------------------------


class _Integrand:
    """``B S(zeta) exp(sum beta log omega(zeta, a))`` with externally tracked logs."""

    def __init__(self, spec: MappingSpec, p: PrimeEvaluator):
        if p.domain != spec.domain:
            raise DomainError("evaluator and spec use different domains")
        self.spec = spec
        self.p = p
        self.pts, self.betas, self.circ = spec.flat()
        self.zeta_inf = None if spec.bounded else spec.zeta_inf

    def logs(self, z) -> np.ndarray:
        """Principal logs, shape ``z.shape + (K,)``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        with np.errstate(divide="ignore"):
            return np.log(self.p.omega_outer(z, self.pts))

    def factor(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return self.spec.B * prefactor(self.p, self.spec.gammas, z, self.zeta_inf)

    def value(self, z, logs):
        return self.factor(z) * np.exp(logs @ self.betas)

    def singular_points(self) -> np.ndarray:
        extra = [] if self.zeta_inf is None else [self.zeta_inf]
        return np.concatenate([self.pts, self.spec.gammas.points(), np.array(extra, dtype=complex)])

    def check_regular(self, z):
        z = complex(z)
        if np.any(np.abs(self.pts - z) < 1e-14):
            raise PoleError(f"zeta={z} is a prevertex", z)
        if self.zeta_inf is not None and abs(z - self.zeta_inf) < 1e-14:
            raise PoleError(f"zeta={z} is the point sent to infinity", z)


def _track(start, principal) -> tuple[np.ndarray, bool]:
    """Unwrap rows of ``principal`` (nodes x K) from ``start``; report step sizes."""
    cols = [unwrap_from(start[k], principal[:, k]) for k in range(principal.shape[1])]
    tracked = np.stack(cols, axis=1) if cols else principal
    im = np.concatenate([start.imag[None, :], tracked.imag], axis=0)
    ok = bool(np.all(np.abs(np.diff(im, axis=0)) < JUMP_LIMIT)) if len(start) else True
    return tracked, ok


class _PieceIntegrator:
    """Integrates the mapping derivative along one path piece, left to right."""

    def __init__(self, ig: _Integrand, piece, tol: float):
        self.ig = ig
        self.piece = piece
        self.tol = tol
        self.worst = (0.0, 0.0, 0.0)
        s = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
        z = piece.point(s)
        with np.errstate(all="ignore"):
            mags = np.abs(ig.factor(z)) * np.exp(ig.logs(z).real @ ig.betas)
        mags = mags[np.isfinite(mags)]
        scale = float(np.median(mags)) if len(mags) else 1.0
        self.atol = tol * max(scale, 1e-300) * max(piece.length, 1e-300)

    def _eval(self, s, state):
        z = self.piece.point(s)
        tracked, ok = _track(state, self.ig.logs(z))
        f = self.ig.value(z, tracked) * self.piece.deriv(s)
        return f, tracked, ok

    def gk_panel(self, a, b, state):
        nodes = a + (b - a) * (KRONROD_NODES + 1) / 2
        f, tracked, ok = self._eval(np.append(nodes, b), state)
        f = f[:-1]
        half = (b - a) / 2
        k = half * np.sum(KRONROD_WEIGHTS * f)
        g = half * np.sum(GAUSS_WEIGHTS * f[GAUSS_INDEX])
        # QUADPACK's rescaling of |K - G|, which is otherwise the error of
        # the 7-point rule rather than of the 15-point one
        resasc = abs(half) * np.sum(KRONROD_WEIGHTS * np.abs(f - k / (b - a)))
        err = abs(k - g)
        if resasc > 0 and err > 0:
            err = resasc * min(1.0, (200 * err / resasc) ** 1.5)
        resabs = abs(half) * np.sum(KRONROD_WEIGHTS * np.abs(f))
        err = max(err, 50 * np.finfo(float).eps * resabs)
        return k, err, tracked[-1], ok

    def adaptive(self, a, b, state):
        """Adaptive Gauss-Kronrod on ``[a, b]``; returns ``(integral, state at b)``."""
        total = 0j
        stack = [(a, b, 0)]
        while stack:
            lo, hi, depth = stack.pop()
            k, err, new_state, ok = self.gk_panel(lo, hi, state)
            if ok and (err <= max(self.atol * (hi - lo), self.tol * abs(k)) or depth >= MAX_DEPTH):
                if depth >= MAX_DEPTH and err > max(self.atol * (hi - lo), self.tol * abs(k)):
                    if err > self.worst[2]:
                        self.worst = (lo, hi, err)
                    if err > 1e3 * max(self.atol * (hi - lo), self.tol * abs(k)):
                        raise QuadratureError(
                            f"quadrature did not converge on {self.piece} for s in [{lo}, {hi}]",
                            segment=(self.piece, lo, hi),
                            estimate=err,
                        )
                total += k
                state = new_state
                continue
            if depth >= MAX_DEPTH:
                raise BranchTrackingError(
                    f"could not track logarithms on {self.piece} near s={lo}"
                )
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi, depth + 1))
            stack.append((lo, mid, depth + 1))
        return total, state

    def jacobi_cell(self, a, state, beta):
        """Gauss-Jacobi on ``[a, 1]`` with weight ``(1 - s) ** beta``; ``None`` if unconverged."""
        h = 1.0 - a
        results = []
        for n in JACOBI_ORDERS:
            x, w = gauss_jacobi(n, beta)
            order = np.argsort(x)
            x, w = x[order], w[order]
            s = a + h * (x + 1) / 2
            f, _, ok = self._eval(s, state)
            if not ok:
                return None
            # f ~ (1 - s)**beta * smooth; divide out the weight in the local variable
            g = f / (1 - x) ** beta
            results.append((h / 2) * np.sum(w * g))
        diff = abs(results[1] - results[0])
        if diff <= max(self.atol * h, self.tol * abs(results[1])):
            return results[1]
        return None

    def integrate(self, state, singular_beta: float | None = None):
        """Integral over the piece and the log state at its end (``None`` after a prevertex)."""
        if singular_beta is None:
            return self.adaptive(0.0, 1.0, state)
        if singular_beta == 0:
            return self.adaptive(0.0, 1.0, state)[0], None
        total = 0j
        a = 0.0
        for _ in range(MAX_DEPTH):
            cell = self.jacobi_cell(a, state, singular_beta)
            if cell is not None:
                return total + cell, None
            b = 0.5 * (a + 1.0)
            part, state = self.adaptive(a, b, state)
            total += part
            a = b
        raise QuadratureError(
            f"endpoint quadrature did not converge on {self.piece}",
            segment=(self.piece, a, 1.0),
        )


def _integrate_pieces(ig, pieces, state, tol, end_beta=None):
    total = 0j
    for i, pc in enumerate(pieces):
        last = i == len(pieces) - 1
        val, state = _PieceIntegrator(ig, pc, tol).integrate(state, end_beta if last else None)
        total += val
    return total, state


def _track_pieces(ig, pieces, state, max_subdivisions: int = 30):
    """Continue the log vector along ``pieces`` without integrating."""
    for pc in pieces:
        n = 8
        for _ in range(max_subdivisions):
            s = np.linspace(0.0, 1.0, n + 1)[1:]
            tracked, ok = _track(state, ig.logs(pc.point(s)))
            if ok:
                state = tracked[-1]
                break
            n *= 2
        else:
            raise BranchTrackingError(f"could not track logarithms along {pc}")
    return state


def _pieces_for(ig: _Integrand, zeta: complex, path=None):
    spec = ig.spec
    base = spec.base
    if path is not None:
        # either a list of points or prebuilt Segment / Arc pieces
        pieces = list(path) if hasattr(path[0], "point") else polyline([complex(z) for z in path])
        start, end = complex(pieces[0].point(0.0)), complex(pieces[-1].point(1.0))
        if abs(start - base) > 1e-14 or abs(end - zeta) > 1e-14:
            raise ClearanceError("path must run from the base point to zeta")
        return pieces
    if zeta == base:
        return []
    avoid = [] if ig.zeta_inf is None else [ig.zeta_inf]
    clearance = default_clearance(spec.domain)
    if ig.zeta_inf is not None:
        clearance = min(clearance, 0.5 * abs(ig.zeta_inf - zeta), 0.5 * abs(ig.zeta_inf - base))
    return route(spec.domain, base, zeta, clearance=clearance, avoid=avoid)


def _base_state(ig: _Integrand) -> np.ndarray:
    base = ig.spec.base
    ig.check_regular(base)
    return ig.logs(base)[0]


def _end_beta(ig: _Integrand, zeta: complex):
    d = np.abs(ig.pts - zeta)
    if len(d) and d.min() < 1e-12:
        return float(ig.betas[int(np.argmin(d))])
    return None


def zprime(spec: MappingSpec, p: PrimeEvaluator, zeta, branch_path=None) -> complex:
    """The mapping derivative at ``zeta`` with logs continued from the base point."""
    ig = _Integrand(spec, p)
    zeta = complex(zeta)
    ig.check_regular(zeta)
    state = _track_pieces(ig, _pieces_for(ig, zeta, branch_path), _base_state(ig))
    return complex(ig.value(np.array([zeta]), state[None, :])[0])


def zprime_modulus(spec: MappingSpec, p: PrimeEvaluator, zeta) -> np.ndarray:
    """``|dz/dzeta|`` (branch independent), vectorised over ``zeta``."""
    ig = _Integrand(spec, p)
    z = np.atleast_1d(np.asarray(zeta, dtype=complex))
    return np.abs(ig.factor(z)) * np.exp(ig.logs(z).real @ ig.betas)


def zlambda(spec: MappingSpec, p: PrimeEvaluator, zeta, branch_path=None) -> complex:
    """Derivative of ``z`` with respect to the slit-map variable.

    For half-plane prefactors this is evaluated from its own closed form,
    ``i B omega(z, -1)**2 / prod omega(z, gamma) * prod omega**beta`` (divided
    by the squared pair at ``zeta_inf`` for unbounded targets), without
    going through ``dz/dzeta``.  Other kinds fall back to
    ``zprime / (slit map derivative)``.
    """
    zeta = complex(zeta)
    if spec.kind.tag is not SlitKind.HALF_PLANE_RADIAL:
        return zprime(spec, p, zeta, branch_path) / complex(slit_map_deriv(p, spec.kind, zeta))
    ig = _Integrand(spec, p)
    ig.check_regular(zeta)
    gam = spec.gammas.points()
    if len(gam) and np.min(np.abs(gam - zeta)) < 1e-14:
        raise PoleError(f"z_lambda has a pole at gamma point {zeta}", zeta)
    state = _track_pieces(ig, _pieces_for(ig, zeta, branch_path), _base_state(ig))
    val = 1j * spec.B * complex(p.omega(zeta, -1.0)) ** 2
    if len(gam):
        val /= complex(np.prod(p.omega_outer(zeta, gam)))
    if not spec.bounded:
        zi = spec.zeta_inf
        val /= complex(p.omega(zeta, zi) * p.omega(zeta, 1 / np.conj(zi))) ** 2
    return complex(val * np.exp(state @ ig.betas))


def local_exponent(f, center, direction, radii=None) -> float:
    """Fitted exponent ``e`` in ``|f(center + r u)| ~ c r**e (1 + b r + b2 r**2)`` as ``r -> 0``.

    Neighbouring singularities make the quadratic term visible at the
    default radii, so it is part of the model.
    """
    if radii is None:
        radii = np.geomspace(1e-2, 1e-4, 13)
    u = complex(direction) / abs(complex(direction))
    r = np.asarray(radii, dtype=float)
    vals = np.array([abs(complex(f(complex(center) + rr * u))) for rr in r])
    design = np.stack([np.log(r), np.ones_like(r), r, r * r], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.log(vals), rcond=None)
    return float(coef[0])


def inward_normal(domain: CircularDomain, j: int, zeta) -> complex:
    delta, _ = domain.circle(j)
    n = (complex(zeta) - delta) / abs(complex(zeta) - delta)
    return -n if j == 0 else n


# -- mapping integral --------------------------------------------------------------


def map_point(spec: MappingSpec, p: PrimeEvaluator, zeta, path=None, tol: float = 1e-12) -> complex:
    """``A + integral of dz/dzeta`` from the base point to ``zeta``.

    ``zeta`` may be a prevertex; the final cell then uses Gauss-Jacobi.
    ``path`` (points or Segment / Arc pieces from the base point to
    ``zeta``) replaces the default route.
    """
    return _map_with_state(_Integrand(spec, p), complex(zeta), path, tol)[0]


def _map_with_state(ig: _Integrand, zeta: complex, path, tol):
    if ig.zeta_inf is not None and abs(zeta - ig.zeta_inf) < 1e-14:
        raise PoleError("zeta_inf is mapped to infinity", zeta)
    state = _base_state(ig)
    pieces = _pieces_for(ig, zeta, path)
    if not pieces:
        return ig.spec.A, state
    val, state = _integrate_pieces(ig, pieces, state, tol, _end_beta(ig, zeta))
    return ig.spec.A + val, state


def map_points(spec: MappingSpec, p: PrimeEvaluator, zetas, tol: float = 1e-12) -> np.ndarray:
    ig = _Integrand(spec, p)
    return np.array([_map_with_state(ig, complex(z), None, tol)[0] for z in np.ravel(zetas)])


def map_along(spec: MappingSpec, p: PrimeEvaluator, points, tol: float = 1e-12) -> np.ndarray:
    """Images of consecutive points of a polyline inside the domain.

    The first point is reached by the default path; the rest by continuing
    along the polyline, which is much cheaper than independent paths.
    """
    ig = _Integrand(spec, p)
    pts = [complex(z) for z in points]
    z0, state = _map_with_state(ig, pts[0], None, tol)
    out = [z0]
    for a, b in zip(pts[:-1], pts[1:]):
        val, state = _integrate_pieces(ig, [Segment(a, b)], state, tol)
        out.append(out[-1] + val)
    return np.array(out)


# -- boundary tracing ------------------------------------------------------------------


def _loop_offset(ig: _Integrand, j: int) -> float:
    domain = ig.spec.domain
    c = default_clearance(domain)
    if ig.zeta_inf is not None:
        delta, q = domain.circle(j)
        c = min(c, 0.4 * abs(abs(ig.zeta_inf - delta) - q))
    return c


def _offset_arc(domain, j, t0, t1, offset) -> Arc:
    delta, q = domain.circle(j)
    return Arc(delta, q - offset if j == 0 else q + offset, t0, t1)


def period(spec: MappingSpec, p: PrimeEvaluator, j: int, tol: float = 1e-12):
    """Integral of ``dz/dzeta`` once counter-clockwise around a loop hugging circle ``j``.

    Returns ``(period, monodromy)`` where ``monodromy`` is the factor picked
    up by the derivative around the loop (1 when it is single-valued).
    The period equals the sum of the side vectors of polygon ``j``.
    """
    ig = _Integrand(spec, p)
    off = _loop_offset(ig, j)
    t0 = float(np.mod(np.angle(spec.base - spec.domain.circle(j)[0]), 2 * np.pi))
    loop = _offset_arc(spec.domain, j, t0, t0 + 2 * np.pi, off)
    state0 = _track_pieces(ig, _pieces_for(ig, loop.start), _base_state(ig))
    val, state1 = _integrate_pieces(ig, [loop], state0, tol)
    mono = complex(np.exp((state1 - state0) @ ig.betas))
    return val, mono


@dataclass
class PolygonTrace:
    """Image of one boundary circle.

    ``turning_angles[k]`` is the signed direction change (left turns
    positive) at vertex ``k`` when the circle is swept counter-clockwise;
    it equals ``-pi beta_k`` on the unit circle and ``+pi beta_k`` on inner
    circles.
    """

    circle: int
    t: np.ndarray
    z: np.ndarray
    vertices: np.ndarray
    sides: np.ndarray
    turning_angles: np.ndarray
    closure: float
    straightness: float
    vertex_mismatch: float

    @property
    def side_lengths(self) -> np.ndarray:
        return np.abs(self.sides)

    @property
    def measured_betas(self) -> np.ndarray:
        sign = -1.0 if self.circle == 0 else 1.0
        return sign * self.turning_angles / np.pi

    @property
    def perimeter(self) -> float:
        return float(np.sum(self.side_lengths))


def trace_boundary(
    spec: MappingSpec,
    p: PrimeEvaluator,
    j: int,
    samples: int | None = None,
    tol: float = 1e-12,
) -> PolygonTrace:
    """Integrate along circle ``j`` between prevertices.

    The value at the first arc midpoint comes from the default path; the
    other midpoints are reached along a loop slightly inside the domain, so
    all arcs share one continuation.  From each midpoint the integral runs
    along the circle itself to both neighbouring prevertices.
    """
    ig = _Integrand(spec, p)
    domain = spec.domain
    ts = np.array(spec.angles[j], dtype=float)
    n = len(ts)
    if samples is None:
        samples = max(12 * n, 96)
    if samples < 3 * n:
        raise ValueError(f"samples must be at least {3 * n} for circle {j}")
    ends = np.append(ts[1:], ts[0] + 2 * np.pi)
    ends = ts + np.mod(ends - ts, 2 * np.pi)
    mids = 0.5 * (ts + ends)
    off = _loop_offset(ig, j)
    delta, q = domain.circle(j)
    betas = np.array(spec.betas[j])

    # continuation: base -> offset point of mid_0 -> along the offset loop
    z_loop, state_loop = _map_with_state(
        ig, complex(_offset_arc(domain, j, mids[0], mids[0], off).start), None, tol
    )
    all_t, all_z = [], []
    fwd_vertex = np.empty(n, dtype=complex)
    bwd_vertex = np.empty(n, dtype=complex)
    straight = 0.0
    for k in range(n):
        if k > 0:
            loop_piece = _offset_arc(domain, j, mids[k - 1], mids[k], off)
            val, state_loop = _integrate_pieces(ig, [loop_piece], state_loop, tol)
            z_loop += val
        leg = Segment(complex(_offset_arc(domain, j, mids[k], mids[k], off).start),
                      complex(boundary_points(domain, j, mids[k])))
        val, state_mid = _integrate_pieces(ig, [leg], state_loop, tol)
        z_mid = z_loop + val
        m = max(3, int(round(samples * (ends[k] - ts[k]) / (2 * np.pi))))
        tt = np.linspace(ts[k], ends[k], m + 1)
        half = m // 2
        grid = np.concatenate([tt[: half + 1], [mids[k]], tt[half + 1:]])
        grid = np.unique(grid)
        imid = int(np.searchsorted(grid, mids[k]))
        zs = np.empty(len(grid), dtype=complex)
        zs[imid] = z_mid
        beta_end = betas[(k + 1) % n]
        beta_start = betas[k]
        # forward
        cur, state = z_mid, state_mid
        for i in range(imid + 1, len(grid)):
            arc = Arc(delta, q, grid[i - 1], grid[i])
            last = i == len(grid) - 1
            val, state = _integrate_pieces(ig, [arc], state, tol, beta_end if last else None)
            cur += val
            zs[i] = cur
        cur, state = z_mid, state_mid
        for i in range(imid - 1, -1, -1):
            arc = Arc(delta, q, grid[i + 1], grid[i])
            last = i == 0
            val, state = _integrate_pieces(ig, [arc], state, tol, beta_start if last else None)
            cur += val
            zs[i] = cur
        bwd_vertex[k] = zs[0]
        fwd_vertex[(k + 1) % n] = zs[-1]
        chord = zs[-1] - zs[0]
        if abs(chord) > 0:
            dev = np.abs(((zs - zs[0]) * np.conj(chord)).imag) / abs(chord)
            straight = max(straight, float(dev.max() / abs(chord)))
        keep = slice(0, len(grid) - 1)
        all_t.append(np.mod(grid[keep], 2 * np.pi))
        all_z.append(zs[keep])
    vertices = bwd_vertex
    sides = np.roll(fwd_vertex, -1) - bwd_vertex
    mismatch = float(np.max(np.abs(fwd_vertex - bwd_vertex)))
    turning = np.angle(sides / np.roll(sides, 1))
    perim = float(np.sum(np.abs(sides)))
    closure = float(abs(np.sum(sides)) / perim) if perim > 0 else math.inf
    t_all = np.concatenate(all_t)
    z_all = np.concatenate(all_z)
    if not np.all(np.isfinite(z_all)):
        raise QuadratureError(f"non-finite image points on circle {j}")
    return PolygonTrace(
        j, t_all, z_all, vertices, sides, turning, closure, straight, mismatch / max(perim, 1e-300)
    )


def trace_all(spec: MappingSpec, p: PrimeEvaluator, samples: int | None = None, tol=1e-12):
    return [trace_boundary(spec, p, j, samples, tol) for j in range(spec.domain.M + 1)]


def traces_to_csv(traces) -> str:
    """CSV with columns ``circle, t, re_z, im_z`` at 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["circle", "t", "re_z", "im_z"])
    for tr in traces:
        for t, z in zip(tr.t, tr.z):
            w.writerow([tr.circle, f"{t:.17g}", f"{z.real:.17g}", f"{z.imag:.17g}"])
    return buf.getvalue()


@dataclass
class ResidualReport:
    closure: list[float]
    turning_defects: list[np.ndarray]
    side_lengths: list[np.ndarray]
    straightness: list[float] = field(default_factory=list)

    @property
    def max_closure(self) -> float:
        return max(self.closure)

    @property
    def max_turning_defect(self) -> float:
        return max(float(np.max(np.abs(d))) for d in self.turning_defects)

    def to_json(self) -> dict:
        return {
            "closure": self.closure,
            "turning_defects": [d.tolist() for d in self.turning_defects],
            "side_lengths": [s.tolist() for s in self.side_lengths],
            "straightness": self.straightness,
        }


def polygon_residuals(spec: MappingSpec, p: PrimeEvaluator, samples=None, tol=1e-12) -> ResidualReport:
    """Closure defect, turning-angle defect and side lengths of every traced polygon."""
    validate_spec(spec)
    traces = trace_all(spec, p, samples, tol)
    return residuals_from_traces(spec, traces)


def residuals_from_traces(spec: MappingSpec, traces) -> ResidualReport:
    closure, defects, sides, straight = [], [], [], []
    for tr in traces:
        expected = np.array(spec.betas[tr.circle])
        d = tr.measured_betas - expected
        # a turning angle is only defined modulo 2 pi
        d = np.angle(np.exp(1j * np.pi * d)) / np.pi
        closure.append(tr.closure)
        defects.append(np.pi * d)
        sides.append(tr.side_lengths)
        straight.append(tr.straightness)
    return ResidualReport(closure, defects, sides, straight)


# -- parameter problems ---------------------------------------------------------------


def close_polygons(
    spec: MappingSpec,
    p: PrimeEvaluator,
    free: dict[int, tuple[int, int]],
    tol: float = 1e-12,
    xtol: float = 1e-13,
) -> MappingSpec:
    """Adjust two prevertex angles per inner circle until every period vanishes.

    ``free[j] = (k1, k2)`` names the prevertices on circle ``j`` that move;
    all others stay put.  This is the reduced problem in which all but two
    prevertices per inner circle are prescribed.  Adjacent free prevertices
    give a well-conditioned system; opposite ones can be degenerate.  Raises
    :class:`QuadratureError` when the iteration does not converge.
    """
    circles = sorted(free)
    if circles != list(range(1, spec.domain.M + 1)):
        raise SpecError("closure needs two free prevertices on every inner circle")
    slots = [(j, k) for j in circles for k in free[j]]
    x0 = np.array([spec.angles[j][k] for j, k in slots])

    def build(x):
        angles = [list(row) for row in spec.angles]
        for (j, k), v in zip(slots, x):
            angles[j][k] = float(v)
        return spec.replace(angles=tuple(tuple(r) for r in angles))

    ref = sum(abs(period_scale(spec, p, j)) for j in circles)

    def resid(x):
        try:
            s = build(x)
        except SpecError:
            return np.full(2 * len(circles), 1e3)
        out = []
        for j in circles:
            per, _ = period(s, p, j, tol)
            out.extend([per.real / ref, per.imag / ref])
        return np.array(out)

    sol = least_squares(resid, x0, method="lm", xtol=xtol, ftol=1e-15, gtol=1e-15)
    final = resid(sol.x)
    if not np.all(np.isfinite(final)) or np.max(np.abs(final)) > 1e-9:
        raise QuadratureError(
            f"closure iteration did not converge (residual {np.max(np.abs(final)):.3g})",
            estimate=float(np.max(np.abs(final))),
        )
    return build(sol.x)


def period_scale(spec: MappingSpec, p: PrimeEvaluator, j: int) -> float:
    """Typical size of a side on circle ``j``: loop length times mean ``|dz/dzeta|``."""
    ig = _Integrand(spec, p)
    off = _loop_offset(ig, j)
    loop = _offset_arc(spec.domain, j, 0.0, 2 * np.pi, off)
    z = loop.point(np.linspace(0, 1, 64, endpoint=False))
    return float(np.mean(zprime_modulus(spec, p, z)) * loop.length)


@dataclass
class M0Solution:
    spec: MappingSpec
    residual: float
    iterations: int
    target: np.ndarray


def _side_lengths_m0(ig: _Integrand, angles, tol) -> np.ndarray:
    """``|side_k|`` for a simply connected spec, with ``B = 1``."""
    n = len(angles)
    ends = np.append(angles[1:], angles[0] + 2 * np.pi)
    out = np.empty(n)
    betas = ig.betas
    for k in range(n):
        mid = 0.5 * (angles[k] + ends[k])
        zm = np.exp(1j * mid)
        state = ig.logs(zm)[0]
        fwd, _ = _integrate_pieces(ig, [Arc(0j, 1.0, mid, ends[k])], state, tol, betas[(k + 1) % n])
        bwd, _ = _integrate_pieces(ig, [Arc(0j, 1.0, mid, angles[k])], state, tol, betas[k])
        out[k] = abs(fwd - bwd)
    return out


def polygon_betas(vertices) -> np.ndarray:
    """Turning parameters of a counter-clockwise simple polygon."""
    z = np.asarray(vertices, dtype=complex)
    e_in = z - np.roll(z, 1)
    e_out = np.roll(z, -1) - z
    return -np.angle(e_out / e_in) / np.pi


def solve_m0(vertices, tol: float = 1e-12, max_iter: int = 200, level: int = 0) -> M0Solution:
    """Classical parameter problem for a simply connected polygon.

    Prevertices of the last three vertices are fixed at ``2 pi k / n``; the
    others are parameterised by softmax gaps and found by Levenberg-Marquardt
    on log side-length ratios.  ``B`` and ``A`` are then fitted so that the
    first two vertices land exactly.
    """
    z = np.asarray(vertices, dtype=complex)
    n = len(z)
    if not 3 <= n <= 12:
        raise ValueError("solve_m0 handles polygons with 3 to 12 vertices")
    area = 0.5 * np.sum((np.conj(z) * np.roll(z, -1)).imag)
    if area <= 0:
        raise ValueError("target vertices must be in counter-clockwise order")
    betas = polygon_betas(z)
    if abs(betas.sum() + 2) > 1e-9:
        raise ValueError("target polygon is not simple (turning parameters do not sum to -2)")
    L = np.abs(np.roll(z, -1) - z)
    domain = CircularDomain()
    p = PrimeEvaluator(domain, level)
    gammas = GammaSet(SlitMapKind.half_plane(), {})
    fixed = 2 * np.pi * np.arange(n - 3, n) / n
    span = fixed[0] - (fixed[2] - 2 * np.pi)

    def angles_from(x):
        logits = np.concatenate([[0.0], x])
        g = np.exp(logits - logits.max())
        g = span * g / g.sum()
        free = (fixed[2] - 2 * np.pi) + np.cumsum(g)[:-1]
        return np.concatenate([free, fixed])

    def make(angles, A=0j, B=1 + 0j):
        return MappingSpec(domain, (tuple(angles),), (tuple(betas),), gammas, A=A, B=B)

    iterations = 0
    if n > 3:
        def resid(x):
            sides = _side_lengths_m0(_Integrand(make(angles_from(x)), p), angles_from(x), tol)
            return np.log(sides[1:n - 2] / sides[0]) - np.log(L[1:n - 2] / L[0])

        sol = least_squares(resid, np.zeros(n - 3), method="lm", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=max_iter)
        iterations = int(sol.nfev)
        final = float(np.max(np.abs(resid(sol.x))))
        if final > 1e-8:
            raise QuadratureError(
                f"solve_m0 did not converge after {iterations} evaluations (residual {final:.3g})",
                estimate=final,
            )
        angles = angles_from(sol.x)
    else:
        angles = fixed
    unit = make(angles)
    tr = trace_boundary(unit, p, 0)
    v = tr.vertices
    B = (z[1] - z[0]) / (v[1] - v[0])
    A = z[0] - B * v[0]
    spec = make(angles, A, B)
    images = A + B * v
    residual = float(np.max(np.abs(images - z)) / np.max(L))
    return M0Solution(spec, residual, iterations, z)


def cross_ratio(a, b, c, d) -> complex:
    return (a - c) * (b - d) / ((a - d) * (b - c))


__all__ = [
    "M0Solution",
    "MappingSpec",
    "PolygonTrace",
    "QuadratureError",
    "ResidualReport",
    "SpecError",
    "close_polygons",
    "cross_ratio",
    "local_exponent",
    "map_along",
    "map_point",
    "map_points",
    "period",
    "polygon_betas",
    "polygon_residuals",
    "solve_m0",
    "trace_all",
    "trace_boundary",
    "traces_to_csv",
    "validate_spec",
    "zlambda",
    "zprime",
    "zprime_modulus",
]
