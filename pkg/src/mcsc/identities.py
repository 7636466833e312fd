"""Functional identities of the prime function, evaluated as residuals.

Each check returns the worst residual over seeded random samples, so the
suite doubles as a truncation-level diagnostic for a given domain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import CircularDomain, boundary_points, reflect
from .prime import PrimeEvaluator

DEFAULT_TOLERANCES = {
    "antisymmetry": 1e-12,
    "reflection": 1e-9,
    "beta_probe_spread": 1e-8,
    "ratio_identity": 1e-8,
    "beta_modulus": 1e-8,
    "beta_reflection": 1e-8,
    "representative_choice": 1e-10,
    "truncation": 1e-8,
}


@dataclass(frozen=True)
class IdentityRow:
    name: str
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tolerance)

    def to_json(self) -> dict:
        return {"name": self.name, "worst": self.worst, "tolerance": self.tolerance, "passed": self.passed}


def interior_samples(domain: CircularDomain, n: int, rng, clearance: float = 0.02) -> np.ndarray:
    pts = []
    while len(pts) < n:
        r = np.sqrt(rng.uniform(0.0, 1.0))
        z = r * np.exp(2j * np.pi * rng.uniform())
        if domain.contains(z, clearance):
            pts.append(z)
    return np.array(pts)


def antisymmetry_residual(p: PrimeEvaluator, z, a) -> float:
    w = p.omega(z, a)
    return float(np.max(np.abs(w + p.omega(a, z)) / np.abs(w)))


def reflection_residual(p: PrimeEvaluator, z, a) -> float:
    """``conj(omega(1/conj z, 1/conj a)) = -omega(z, a) / (z a)``, relative."""
    lhs = np.conj(p.omega(reflect(z), reflect(a)))
    rhs = -p.omega(z, a) / (z * a)
    return float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))


def ratio_identity_residual(p: PrimeEvaluator, j: int, z1, z2, gamma) -> float:
    """Residual of the transformation law of ``omega(., gamma)`` under ``theta_j``.

    ``omega(th(z1), g) / omega(th(z2), g)`` against
    ``(1 / beta_j(z1, z2)) (1 - conj(d) z2) / (1 - conj(d) z1) omega(z1, g) / omega(z2, g)``
    with ``beta_j`` taken from :meth:`PrimeEvaluator.beta`.
    """
    from .domain import generator

    th = generator(p.domain, j)
    delta, _ = p.domain.circle(j)
    b = p.beta(j, z1, z2).value
    lhs = p.omega(th(z1), gamma) / p.omega(th(z2), gamma)
    rhs = (1 / b) * (1 - np.conj(delta) * z2) / (1 - np.conj(delta) * z1)
    rhs = rhs * p.omega(z1, gamma) / p.omega(z2, gamma)
    return float(abs(lhs - rhs) / abs(rhs))


def identity_suite(
    p: PrimeEvaluator,
    seed: int = 0,
    pairs: int = 100,
    tolerances: dict | None = None,
) -> list[IdentityRow]:
    """Run every identity check on seeded samples; one row per identity."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    rng = np.random.default_rng(seed)
    d = p.domain
    # the suite reports probe spreads instead of raising on them
    lenient = PrimeEvaluator(d, p.level, np.inf, p.cap, p.words)
    z = interior_samples(d, pairs, rng)
    a = interior_samples(d, pairs, rng)
    rows = [
        IdentityRow("antisymmetry", antisymmetry_residual(p, z, a), tol["antisymmetry"]),
        IdentityRow("reflection", reflection_residual(p, z, a), tol["reflection"]),
    ]
    spread = modulus = bar = ratio = 0.0
    for j in range(1, d.M + 1):
        for l in range(d.M + 1):
            t = rng.uniform(0, 2 * np.pi, 2)
            g1, g2 = boundary_points(d, l, t)
            b = lenient.beta(j, g1, g2)
            spread = max(spread, b.spread)
            modulus = max(modulus, abs(abs(b.value) - 1))
            if l > 0:
                br = lenient.beta(j, reflect(g1), reflect(g2))
                bar = max(bar, abs(br.value - b.value))
        # points on the reflected circle are sent onto circle j itself
        t = rng.uniform(0, 2 * np.pi, 2)
        z1, z2 = reflect(boundary_points(d, j, t))
        gam = interior_samples(d, 1, rng, 0.05)[0]
        ratio = max(ratio, ratio_identity_residual(lenient, j, z1, z2, gam))
    rows += [
        IdentityRow("beta_probe_spread", spread, tol["beta_probe_spread"]),
        IdentityRow("ratio_identity", ratio, tol["ratio_identity"]),
        IdentityRow("beta_modulus", modulus, tol["beta_modulus"]),
        IdentityRow("beta_reflection", bar, tol["beta_reflection"]),
    ]
    rep = 0.0
    if len(p.words):
        w0 = p.omega(z[:10], a[:10])
        for i in rng.choice(len(p.words), size=min(5, len(p.words)), replace=False):
            alt = p.with_words(p.words.with_inverse(int(i)))
            rep = max(rep, float(np.max(np.abs(alt.omega(z[:10], a[:10]) - w0) / np.abs(w0))))
    rows.append(IdentityRow("representative_choice", rep, tol["representative_choice"]))
    rows.append(IdentityRow("truncation", p.truncation_estimate(), tol["truncation"]))
    return rows


def format_rows(rows) -> str:
    lines = [f"{'identity':<24}{'worst':>12}{'tolerance':>12}  result"]
    for r in rows:
        lines.append(f"{r.name:<24}{r.worst:>12.3e}{r.tolerance:>12.1e}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
