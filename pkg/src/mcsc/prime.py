"""Truncated-product Schottky-Klein prime function and its derivative.

For a word set ``W`` the evaluator computes

    omega(z, a) = (z - a) * prod_{t in W} (z - t(a)) (a - t(z)) / ((z - t(z)) (a - t(a)))

Each factor is a cross ratio of ``z, a, t(z), t(a)``; it is unchanged when
``t`` is replaced by its inverse, so the choice of representative in the half
set does not affect the value.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .domain import CircularDomain, DomainError, boundary_points, reflect
from .schottky import DEFAULT_WORD_CAP, WordSet, enumerate_words

# word-chunk size for the (words x points) factor arrays
CHUNK = 256
# above this many words the product is accumulated as a sum of logarithms
LOG_SPACE_THRESHOLD = 1000


class PrimeEvaluationError(ArithmeticError):
    """A product factor became non-finite (argument at or near a pole)."""


class IdentityError(ArithmeticError):
    """A functional identity used to derive a quantity is inconsistent."""


class BranchTrackingError(ArithmeticError):
    """Continuation of a logarithm along a path failed its contract."""


@dataclass(frozen=True)
class BetaValue:
    j: int
    gamma1: complex
    gamma2: complex
    value: complex
    spread: float = 0.0


def _finalize(x):
    return x[()] if np.ndim(x) == 0 else x


class PrimeEvaluator:
    """Evaluates the prime function of a circular domain at a fixed truncation level.

    Parameters
    ----------
    domain : CircularDomain
    level : int
        Maximum word length kept in the product.
    tolerance : float
        Target accuracy; used as the consistency threshold for derived
        quantities such as :meth:`beta`.
    cap : int
        Upper bound on the number of words.
    words : WordSet, optional
        Use this word set instead of enumerating one.
    """

    def __init__(
        self,
        domain: CircularDomain,
        level: int = 6,
        tolerance: float = 1e-8,
        cap: int = DEFAULT_WORD_CAP,
        words: WordSet | None = None,
    ):
        self.domain = domain
        self.level = level
        self.tolerance = tolerance
        self.cap = cap
        self.words = words if words is not None else enumerate_words(domain, level, cap)

    def __repr__(self):
        return (
            f"PrimeEvaluator(M={self.domain.M}, level={self.level}, "
            f"words={len(self.words)})"
        )

    def with_level(self, level: int) -> PrimeEvaluator:
        return PrimeEvaluator(self.domain, level, self.tolerance, self.cap)

    def with_words(self, words: WordSet) -> PrimeEvaluator:
        return PrimeEvaluator(self.domain, self.level, self.tolerance, self.cap, words)

    # -- core products ------------------------------------------------------

    def _chunks(self):
        w = self.words
        for s in range(0, len(w), CHUNK):
            sl = slice(s, s + CHUNK)
            yield s, w.a[sl], w.b[sl], w.c[sl], w.d[sl]

    def _raise_nonfinite(self, start, bad_mask, z, a):
        idx = np.argwhere(bad_mask)[0]
        word = self.words.letters[start + int(idx[0])]
        zz = np.broadcast_to(z, bad_mask.shape[1:])[tuple(idx[1:])]
        aa = np.broadcast_to(a, bad_mask.shape[1:])[tuple(idx[1:])]
        raise PrimeEvaluationError(
            f"non-finite product factor for word {word} at zeta={complex(zz)}, "
            f"alpha={complex(aa)}"
        )

    def _products(self, z, a, with_deriv: bool):
        """Return ``(P, L)`` where ``omega = (z - a) P`` and ``L`` is the
        log-derivative sum of the product part (``None`` unless requested)."""
        z = np.asarray(z, dtype=complex)
        a = np.asarray(a, dtype=complex)
        shape = np.broadcast_shapes(z.shape, a.shape)
        nd = len(shape)
        z = z.reshape((1,) * (nd - z.ndim) + z.shape)
        a = a.reshape((1,) * (nd - a.ndim) + a.shape)
        use_logs = len(self.words) > LOG_SPACE_THRESHOLD
        acc = np.zeros(shape, dtype=complex) if use_logs else np.ones(shape, dtype=complex)
        lsum = np.zeros(shape, dtype=complex) if with_deriv else None
        zx = z[None, ...]
        ax = a[None, ...]
        ext = (slice(None),) + (None,) * nd
        for start, ca, cb, cc, cd in self._chunks():
            with np.errstate(all="ignore"):
                den_z = cc[ext] * zx + cd[ext]
                tz = (ca[ext] * zx + cb[ext]) / den_z
                ta = (ca[ext] * ax + cb[ext]) / (cc[ext] * ax + cd[ext])
                # the denominators depend on z alone or on a alone, so they are
                # reduced before broadcasting against the other argument
                top = np.prod((zx - ta) * (ax - tz), axis=0)
                bottom = np.prod(zx - tz, axis=0) * np.prod(ax - ta, axis=0)
                block = top / bottom
                mags = np.abs(np.concatenate([np.ravel(top), np.ravel(bottom)]))
                if not (np.all(np.isfinite(block)) and mags.min() > 1e-250 and mags.max() < 1e250):
                    fac = (zx - ta) * (ax - tz) / ((zx - tz) * (ax - ta))
                    bad = ~np.isfinite(fac)
                    if bad.any():
                        self._raise_nonfinite(start, bad, z, a)
                    block = np.prod(fac, axis=0)
                if use_logs:
                    acc += np.log(block)
                else:
                    acc *= block
                if with_deriv:
                    dtz = 1.0 / den_z**2
                    terms = 1.0 / (zx - ta) - dtz / (ax - tz) - (1.0 - dtz) / (zx - tz)
                    lsum += np.sum(terms, axis=0)
        prod = np.exp(acc) if use_logs else acc
        return prod, lsum

    # -- public evaluation --------------------------------------------------

    def omega(self, zeta, alpha):
        """The prime function ``omega(zeta, alpha)``; broadcasts its arguments."""
        z = np.asarray(zeta, dtype=complex)
        a = np.asarray(alpha, dtype=complex)
        prod, _ = self._products(z, a, False)
        return _finalize((z - a) * prod)

    def omega_deriv(self, zeta, alpha):
        """Derivative of ``omega`` in its first argument.

        Uses ``omega_z = P (1 + (z - a) L)``, which stays finite at ``z = a``.
        """
        return self.omega_and_deriv(zeta, alpha)[1]

    def omega_and_deriv(self, zeta, alpha):
        z = np.asarray(zeta, dtype=complex)
        a = np.asarray(alpha, dtype=complex)
        prod, lsum = self._products(z, a, True)
        diff = z - a
        return _finalize(diff * prod), _finalize(prod * (1.0 + diff * lsum))

    def omega_outer(self, zeta, alphas):
        """``omega(zeta[i], alphas[k])`` as an array of shape ``zeta.shape + (K,)``."""
        z = np.asarray(zeta, dtype=complex)
        a = np.asarray(alphas, dtype=complex).ravel()
        return self.omega(z[..., None], a)

    def omega_outer_and_deriv(self, zeta, alphas):
        z = np.asarray(zeta, dtype=complex)
        a = np.asarray(alphas, dtype=complex).ravel()
        return self.omega_and_deriv(z[..., None], a)

    def omega_conj(self, zeta, alpha):
        """``conj(omega(conj(zeta), conj(alpha)))``."""
        return np.conj(self.omega(np.conj(zeta), np.conj(alpha)))

    # -- logarithms along paths --------------------------------------------

    def log_omega_track(
        self,
        path,
        alpha,
        clearance: float = 1e-10,
        max_subdivisions: int = 30,
    ) -> np.ndarray:
        """Continuous branch of ``log omega(., alpha)`` along a polyline.

        The first point takes the principal branch.  Segments are bisected
        until consecutive imaginary parts differ by less than ``pi / 2``
        (which implies the ``< pi`` continuity contract).  Returns the values
        at the given path points.
        """
        pts = np.atleast_1d(np.asarray(path, dtype=complex))
        alpha = complex(alpha)
        self._check_clearance(pts, alpha, clearance)
        out = np.empty(len(pts), dtype=complex)
        out[0] = cmath.log(complex(self.omega(pts[0], alpha)))
        for i in range(1, len(pts)):
            out[i] = self._track_segment(pts[i - 1], pts[i], out[i - 1], alpha, max_subdivisions)
        return out

    def _track_segment(self, z0, z1, log0, alpha, max_subdivisions):
        n = 4
        for _ in range(max_subdivisions):
            s = np.linspace(0.0, 1.0, n + 1)[1:]
            vals = np.log(self.omega(z0 + (z1 - z0) * s, alpha))
            tracked = unwrap_from(log0, vals)
            steps = np.abs(np.diff(np.concatenate([[log0.imag], tracked.imag])))
            if steps.max() < math.pi / 2:
                return tracked[-1]
            n *= 2
        raise BranchTrackingError(
            f"could not resolve the branch of log omega between {z0} and {z1}"
        )

    def _check_clearance(self, pts, alpha, clearance):
        targets = [alpha]
        if len(self.words):
            w = self.words
            for sign_a, sign_b, sign_c, sign_d in ((w.a, w.b, w.c, w.d), (w.d, -w.b, -w.c, w.a)):
                with np.errstate(all="ignore"):
                    t = (sign_a * alpha + sign_b) / (sign_c * alpha + sign_d)
                targets.extend(t[np.isfinite(t)])
        targets = np.asarray(targets)
        if len(pts) == 1:
            dist = np.abs(pts[0] - targets).min()
        else:
            dist = min(_segment_distance(pts[i], pts[i + 1], targets).min() for i in range(len(pts) - 1))
        if dist < clearance:
            raise BranchTrackingError(
                f"path passes within {dist:.3g} of a zero of omega(., {alpha})"
            )

    # -- derived quantities -------------------------------------------------

    def beta(self, j: int, gamma1, gamma2, probes: int = 5) -> BetaValue:
        """Multiplier of the ratio ``omega(., g1) / omega(., g2)`` under ``theta_j``.

        Computed from
        ``omega(theta_j(z), g1) / omega(theta_j(z), g2) = beta * omega(z, g1) / omega(z, g2)``
        at probe points ``z`` on the reflection of circle ``j`` (so that
        ``theta_j(z)`` lies on circle ``j``).  The relative spread over the
        probes is returned as a quality figure.
        """
        g1, g2 = complex(gamma1), complex(gamma2)
        if j == 0 or g1 == g2:
            return BetaValue(j, g1, g2, 1.0 + 0j, 0.0)
        on_circle = boundary_points(self.domain, j, _probe_angles(self.domain, j, (g1, g2), probes))
        pre = reflect(on_circle)
        num = self.omega(on_circle, g1) / self.omega(on_circle, g2)
        den = self.omega(pre, g1) / self.omega(pre, g2)
        vals = num / den
        value = complex(np.mean(vals))
        spread = float(np.max(np.abs(vals - value)) / abs(value))
        if spread > self.tolerance:
            raise IdentityError(
                f"identity inconsistent at this truncation level (level {self.level}, "
                f"probe spread {spread:.3g} > {self.tolerance:.3g})"
            )
        return BetaValue(j, g1, g2, value, spread)

    def truncation_estimate(self, probes=None) -> float:
        """Max relative change of omega between this level and the next on probe pairs."""
        if self.domain.M == 0:
            return 0.0
        if probes is None:
            probes = default_probe_pairs(self.domain)
        z, a = probes
        nxt = self.with_level(self.level + 1)
        w0 = self.omega(z, a)
        w1 = nxt.omega(z, a)
        return float(np.max(np.abs(w1 - w0) / np.abs(w1)))


def auto_level(
    domain: CircularDomain,
    tolerance: float = 1e-10,
    start: int = 2,
    max_level: int = 12,
    cap: int = DEFAULT_WORD_CAP,
) -> PrimeEvaluator:
    """Smallest level whose probe-based truncation estimate is below ``tolerance``."""
    p = PrimeEvaluator(domain, start, tolerance, cap)
    while p.truncation_estimate() > tolerance:
        if p.level >= max_level:
            raise IdentityError(
                f"truncation estimate above {tolerance:.3g} at max level {max_level}"
            )
        p = p.with_level(p.level + 1)
    return p


def default_probe_pairs(domain: CircularDomain, n: int = 5):
    """Deterministic interior probe pairs used for truncation estimates."""
    rng = np.random.default_rng(12345)
    pts = []
    while len(pts) < 2 * n:
        z = complex(*(rng.uniform(-0.95, 0.95, 2)))
        if domain.contains(z, 0.02):
            pts.append(z)
    pts = np.array(pts)
    return pts[:n], pts[n:]


def _probe_angles(domain: CircularDomain, j: int, avoid, n: int) -> np.ndarray:
    delta, q = domain.circle(j)
    avoid = np.asarray(avoid, dtype=complex)
    best, best_score = None, -1.0
    for offset in np.linspace(0.0, 1.0, 16, endpoint=False):
        t = 2 * np.pi * (np.arange(n) + 0.137 + offset) / n
        p = delta + q * np.exp(1j * t)
        pr = 1.0 / np.conj(p)
        score = min(np.abs(p[:, None] - avoid).min(), np.abs(pr[:, None] - avoid).min())
        if score > best_score:
            best, best_score = t, score
    return best


def unwrap_from(start, values) -> np.ndarray:
    """Shift each principal log by multiples of ``2 pi i`` to follow ``start`` continuously."""
    values = np.asarray(values, dtype=complex)
    im = np.concatenate([[complex(start).imag], values.imag])
    # np.unwrap follows the first entry
    unwrapped = np.unwrap(im)[1:]
    return values.real + 1j * unwrapped


def _segment_distance(p0, p1, pts) -> np.ndarray:
    d = p1 - p0
    if d == 0:
        return np.abs(pts - p0)
    s = np.clip(((pts - p0) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
    return np.abs(pts - (p0 + s * d))


__all__ = [
    "BetaValue",
    "BranchTrackingError",
    "IdentityError",
    "PrimeEvaluationError",
    "PrimeEvaluator",
    "auto_level",
    "default_probe_pairs",
    "unwrap_from",
    "DomainError",
]
