"""Local stability of equilibria and regime classification.

Eigenvalues of the 3x3 Jacobian come from its characteristic polynomial,
solved in closed form and polished by one Newton step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import BoundaryCase, DegenerateCase, InapplicableError, ResidentUnfit
from .model import (
    CHAIN_TOL,
    DEGENERATE_RTOL,
    ModelParams,
    chain,
    coexistence_equilibrium,
    signed_trait2_equilibrium,
    trait1_equilibrium,
)

EIG_TOL = 1e-9

STABLE = "asymptotically-stable"
UNSTABLE = "unstable"
COINCIDES = "degenerate-coincides-with-origin"
INDETERMINATE = "indeterminate-local"
BOUNDARY = "boundary"
NONEXISTENT = "nonexistent"

RESIDENT_UNFIT = "resident-unfit"


def jacobian(params: ModelParams, state: Sequence[float]) -> np.ndarray:
    """Jacobian of the full mean-field vector field at ``state``."""
    n1a, n1d, n2 = (float(x) for x in state)
    c, p, tau, mu = params.C, params.p, params.tau, params.mu
    return np.array(
        [
            [params.lambda1 - mu - 2 * c * n1a - (c + tau) * n2, params.sigma, -(c + tau) * n1a],
            [2 * p * c * n1a + p * c * n2, -params.dormant_outflow, p * c * n1a],
            [(tau - c) * n2, 0.0, params.lambda2 - mu - 2 * c * n2 - (c - tau) * n1a],
        ]
    )


def _cubic_roots(b: float, c: float, d: float) -> list[complex]:
    """Roots of x^3 + b x^2 + c x + d."""
    shift = b / 3.0
    pp = c - b * b / 3.0
    qq = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    disc = (qq / 2.0) ** 2 + (pp / 3.0) ** 3
    if pp == 0.0 and qq == 0.0:
        roots = [0.0, 0.0, 0.0]
    elif disc < 0:
        # three distinct real roots: trigonometric form
        r = 2.0 * math.sqrt(-pp / 3.0)
        arg = max(-1.0, min(1.0, 3.0 * qq / (pp * r)))
        phi = math.acos(arg) / 3.0
        roots = [r * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]
    else:
        sq = math.sqrt(disc)
        # take the cube root of the larger term; u v = -p/3 gives the other
        big = -qq / 2.0 + math.copysign(sq, -qq / 2.0)
        u = math.copysign(abs(big) ** (1.0 / 3.0), big)
        v = -pp / (3.0 * u) if u != 0.0 else 0.0
        real = u + v
        re_pair = -real / 2.0
        im_pair = (u - v) * math.sqrt(3.0) / 2.0
        roots = [real, complex(re_pair, im_pair), complex(re_pair, -im_pair)]
    return [complex(t) - shift for t in roots]


def _polish(x: complex, b: float, c: float, d: float) -> complex:
    f = ((x + b) * x + c) * x + d
    df = (3.0 * x + 2.0 * b) * x + c
    if df == 0:
        return x
    y = x - f / df
    # near a multiple root the step can jump to a different root; only refine
    scale = max(1.0, abs(b), math.sqrt(abs(c)), abs(d) ** (1.0 / 3.0))
    if abs(y - x) > 1e-6 * scale:
        return x
    f_new = ((y + b) * y + c) * y + d
    return y if abs(f_new) <= abs(f) else x


def characteristic_coefficients(a: np.ndarray) -> tuple[float, float, float]:
    """(trace, sum of principal 2x2 minors, determinant)."""
    tr = float(np.trace(a))
    minors = (
        a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
        + a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    )
    det = (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )
    return tr, float(minors), float(det)


def eigenvalues(a: np.ndarray) -> list[complex]:
    """Eigenvalues of a 3x3 matrix, sorted by descending real part."""
    tr, minors, det = characteristic_coefficients(a)
    b, c, d = -tr, minors, -det
    roots = [_polish(r, b, c, d) for r in _cubic_roots(b, c, d)]
    cleaned = [complex(r.real, 0.0) if abs(r.imag) <= 1e-14 * max(1.0, abs(r)) else r for r in roots]
    return sorted(cleaned, key=lambda z: (-z.real, -z.imag))


def eigen_label(eigs: Iterable[complex], tol: float = EIG_TOL) -> str:
    top = max(z.real for z in eigs)
    if top < -tol:
        return STABLE
    if top > tol:
        return UNSTABLE
    return BOUNDARY


@dataclass(frozen=True)
class EquilibriumStability:
    state: Optional[tuple[float, float, float]]
    label: str
    eigenvalues: tuple[complex, ...] = ()
    trace: Optional[float] = None
    det: Optional[float] = None
    outside_orthant: bool = False
    eigen_label: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "state": list(self.state) if self.state is not None else None,
            "label": self.label,
            "eigen_label": self.eigen_label,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "trace": self.trace,
            "det": self.det,
            "outside_orthant": self.outside_orthant,
        }


def _assess(params: ModelParams, state: tuple[float, float, float], label: Optional[str] = None,
            outside: bool = False) -> EquilibriumStability:
    a = jacobian(params, state)
    tr, _, det = characteristic_coefficients(a)
    eigs = tuple(eigenvalues(a))
    from_eigs = eigen_label(eigs)
    return EquilibriumStability(state, label or from_eigs, eigs, tr, det, outside, from_eigs)


EQUILIBRIA = ("origin", "trait2", "trait1", "coexistence")


def classify_equilibria(params: ModelParams) -> dict[str, EquilibriumStability]:
    """Stability of the origin, both one-trait equilibria and coexistence.

    One-trait equilibria of an unfit trait coincide with the origin.  The
    coexistence point under the stable-coexistence chain is labelled
    indeterminate-local (its local stability is not established analytically)
    unless p = 0, where the planar analysis applies; eigenvalues are attached
    either way.  Chain equalities label everything ``boundary``.
    """
    out: dict[str, EquilibriumStability] = {}
    out["origin"] = _assess(params, (0.0, 0.0, 0.0))

    tilde = signed_trait2_equilibrium(params)
    fit2 = params.lambda2 - params.mu
    if abs(fit2) <= CHAIN_TOL:
        out["trait2"] = EquilibriumStability((0.0, 0.0, 0.0), COINCIDES)
    elif fit2 < 0:
        signed = _assess(params, (0.0, 0.0, tilde), outside=True)
        out["trait2"] = EquilibriumStability(
            signed.state, COINCIDES, signed.eigenvalues, signed.trace, signed.det, True,
            signed.eigen_label,
        )
    else:
        out["trait2"] = _assess(params, (0.0, 0.0, tilde))

    if params.lambda1 - params.mu <= CHAIN_TOL:
        out["trait1"] = EquilibriumStability((0.0, 0.0, 0.0), COINCIDES)
    else:
        n1a, n1d = trait1_equilibrium(params)
        out["trait1"] = _assess(params, (n1a, n1d, 0.0))

    if params.tau == 0:
        out["coexistence"] = EquilibriumStability(None, NONEXISTENT)
        return out

    ch = chain(params)
    if ch.boundary:
        return {
            k: EquilibriumStability(v.state, BOUNDARY, v.eigenvalues, v.trace, v.det,
                                    v.outside_orthant, v.eigen_label)
            for k, v in out.items()
        } | {"coexistence": EquilibriumStability(None, BOUNDARY)}
    try:
        coex = coexistence_equilibrium(params)
    except DegenerateCase:
        out["coexistence"] = EquilibriumStability(None, BOUNDARY)
        return out
    if coex is None:
        out["coexistence"] = EquilibriumStability(None, NONEXISTENT)
    elif ch.stable_coexistence and params.p > 0:
        out["coexistence"] = _assess(params, coex, label=INDETERMINATE)
    else:
        out["coexistence"] = _assess(params, coex)
    return out


def expected_labels(params: ModelParams) -> dict[str, str]:
    """Stability pattern implied by the chain ordering alone (tau > 0, lambda1 > mu)."""
    if params.tau == 0:
        raise InapplicableError("chain-based stability pattern requires tau > 0")
    if params.lambda1 <= params.mu:
        raise ResidentUnfit("chain-based stability pattern assumes lambda1 > mu")
    ch = chain(params)
    if ch.boundary:
        raise BoundaryCase("a coexistence inequality holds with equality")
    trait2_invaded = UNSTABLE if params.lambda2 > params.mu else COINCIDES
    if ch.founder_control:
        return {"origin": UNSTABLE, "trait2": STABLE, "trait1": STABLE, "coexistence": UNSTABLE}
    if ch.trait1_wins:
        return {"origin": UNSTABLE, "trait2": trait2_invaded, "trait1": STABLE,
                "coexistence": NONEXISTENT}
    if ch.stable_coexistence:
        return {"origin": UNSTABLE, "trait2": trait2_invaded, "trait1": UNSTABLE,
                "coexistence": INDETERMINATE if params.p > 0 else STABLE}
    return {"origin": UNSTABLE, "trait2": STABLE, "trait1": UNSTABLE, "coexistence": NONEXISTENT}


def _order(x: float, y: float) -> int:
    if abs(x - y) <= CHAIN_TOL:
        return 0
    return 1 if x > y else -1


def regime(params: ModelParams) -> str:
    """Regime label: I, II, II′, II″, III, III′, IV, IV′, boundary or resident-unfit.

    tau = 0 and p = 0 are delegated to the special-case classifiers.
    """
    if params.lambda1 - params.mu <= CHAIN_TOL:
        return RESIDENT_UNFIT
    if params.tau == 0:
        return hgt_free_regime(params)
    if params.p == 0:
        return dormancy_free_regime(params)
    ch = chain(params)
    if ch.boundary:
        return BOUNDARY
    l1_vs_l2 = _order(params.lambda1, params.lambda2)
    l2_vs_mu = _order(params.lambda2, params.mu)
    if ch.founder_control:
        return "I"
    if ch.trait1_wins:
        if l1_vs_l2 < 0:
            return "II"
        if l1_vs_l2 == 0 or l2_vs_mu == 0:
            return BOUNDARY
        return "II′" if l2_vs_mu > 0 else "II″"
    if ch.stable_coexistence:
        if l1_vs_l2 <= 0 or l2_vs_mu == 0:
            return BOUNDARY
        return "III" if l2_vs_mu > 0 else "III′"
    if l1_vs_l2 == 0:
        return BOUNDARY
    return "IV" if l1_vs_l2 < 0 else "IV′"


def dormancy_free_regime(params: ModelParams) -> str:
    """Outcome of the planar system without dormancy (p = 0, tau > 0)."""
    if params.p != 0:
        raise InapplicableError("dormancy_free_regime requires p = 0")
    if params.tau == 0:
        raise InapplicableError("dormancy_free_regime requires tau > 0")
    fit2 = params.lambda2 - params.mu
    fit1 = params.lambda1 - params.mu
    m = params.C / params.tau * (params.lambda1 - params.lambda2)
    left, right = _order(m, fit2), _order(fit1, m)
    if left == 0 or right == 0:
        return BOUNDARY
    if left > 0 and right > 0:
        return "stable-coexistence"
    if left > 0:
        return "fixation-1"
    if right > 0:
        return "fixation-2"
    return "founder-control-no-coexistence-eq"


def hgt_free_regime(params: ModelParams) -> str:
    """Outcome without transfer (tau = 0): which trait fixes."""
    if params.tau != 0:
        raise InapplicableError("hgt_free_regime requires tau = 0")
    if params.lambda1 - params.mu <= CHAIN_TOL:
        return RESIDENT_UNFIT
    if params.lambda2 - params.mu <= CHAIN_TOL:
        return "fixation-1"
    lhs = params.lambda2 - params.lambda1
    rhs = params.p * (params.lambda2 - params.mu) * params.sigma / params.dormant_outflow
    side = _order(lhs, rhs)
    if side == 0:
        return BOUNDARY
    return "fixation-1" if side < 0 else "fixation-2"


@dataclass(frozen=True)
class Line:
    """The affine line a * lambda1 + b * lambda2 = c."""

    a: float
    b: float
    c: float

    @property
    def slope(self) -> float:
        """d lambda2 / d lambda1."""
        if self.b == 0:
            return math.inf
        return -self.a / self.b

    def value(self, lambda1: float, lambda2: float) -> float:
        return self.a * lambda1 + self.b * lambda2 - self.c

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "slope": self.slope}


@dataclass(frozen=True)
class CriticalLines:
    mutant2: Line = field()
    mutant1: Line = field()

    def to_dict(self) -> dict:
        return {"mutant2": self.mutant2.to_dict(), "mutant1": self.mutant1.to_dict()}


def critical_lines(params: ModelParams) -> CriticalLines:
    """Lines in the (lambda1, lambda2) plane where a chain inequality becomes equality.

    mutant2: lambda1 - mu = M (a trait-2 mutant is critical in a trait-1 resident)
    mutant1: lambda2 - mu = M (a trait-1 mutant is critical in a trait-2 resident)

    The birth rates stored in ``params`` are ignored.
    """
    if params.tau == 0:
        raise InapplicableError("critical lines need tau > 0")
    a_num = params.C * params.p * params.sigma
    a_den = params.tau * params.dormant_outflow
    if abs(a_num - a_den) <= DEGENERATE_RTOL * max(a_num, a_den):
        raise DegenerateCase("critical lines coincide with lambda1 = lambda2")
    ratio = a_num / a_den
    k = params.C / params.tau
    mu = params.mu
    mutant2 = Line(1.0 - k, k - ratio, (1.0 - ratio) * mu)
    mutant1 = Line(-k, 1.0 - ratio + k, (1.0 - ratio) * mu)
    return CriticalLines(mutant2, mutant1)


def regime_map(
    params: ModelParams, lambda1_values: Sequence[float], lambda2_values: Sequence[float]
) -> list[tuple[float, float, str]]:
    """Regime label on a (lambda1, lambda2) grid, rows ordered lambda1-major."""
    cells = []
    for l1 in lambda1_values:
        for l2 in lambda2_values:
            cells.append((float(l1), float(l2), regime(params.with_(lambda1=l1, lambda2=l2))))
    return cells
