"""Branching-process approximations for a rare mutant.

A single trait-2 mutant in a trait-1 resident at equilibrium behaves like a
linear birth-death process with birth rate ``lambda2 + tau * n1a`` and death
rate ``mu + C * n1a``.  A single active trait-1 mutant in a trait-2 resident
is a two-type (active, dormant) process with

    active:  birth lambda1, death mu + ((1 - p) + tau / C)(lambda2 - mu),
             switch to dormant p (lambda2 - mu)
    dormant: death kappa * mu, resuscitation sigma
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit
from scipy.stats import binomtest

from .errors import ConvergenceError, CriticalCase, InapplicableError, ResidentUnfit
from .model import ModelParams, trait1_equilibrium, trait2_equilibrium

CRITICAL_TOL = 1e-10
FIXED_POINT_TOL = 1e-12
FIXED_POINT_CAP = 1_000_000
CROSS_CHECK_RTOL = 1e-10


def _require_trait1_resident(params: ModelParams) -> float:
    if params.lambda1 <= params.mu:
        raise ResidentUnfit(
            "resident trait 1 is unfit (lambda1 <= mu); invasion analysis inapplicable"
        )
    return trait1_equilibrium(params)[0]


def _require_trait2_resident(params: ModelParams) -> float:
    if params.lambda2 <= params.mu:
        raise ResidentUnfit(
            "resident trait 2 is unfit (lambda2 <= mu); invasion analysis inapplicable"
        )
    return trait2_equilibrium(params)


def lambda_hat(params: ModelParams) -> float:
    """Growth rate of a trait-2 mutant in a trait-1 resident."""
    n1a = _require_trait1_resident(params)
    return params.lambda2 - params.mu - (params.C - params.tau) * n1a


def trait2_mutant_rates(params: ModelParams) -> tuple[float, float]:
    """Per-capita (birth, death) of a trait-2 mutant in a trait-1 resident."""
    n1a = _require_trait1_resident(params)
    return params.lambda2 + params.tau * n1a, params.mu + params.C * n1a


@dataclass(frozen=True)
class ActiveDormantRates:
    birth: float
    death: float
    switch: float
    dormant_death: float
    resuscitation: float

    @property
    def active_total(self) -> float:
        return self.birth + self.death + self.switch

    @property
    def dormant_total(self) -> float:
        return self.dormant_death + self.resuscitation


def trait1_mutant_rates(params: ModelParams) -> ActiveDormantRates:
    """Per-capita rates of an active/dormant trait-1 mutant in a trait-2 resident."""
    _require_trait2_resident(params)
    fit2 = params.lambda2 - params.mu
    return ActiveDormantRates(
        birth=params.lambda1,
        death=params.mu + ((1.0 - params.p) + params.tau / params.C) * fit2,
        switch=params.p * fit2,
        dormant_death=params.kappa * params.mu,
        resuscitation=params.sigma,
    )


def mean_matrix(params: ModelParams) -> np.ndarray:
    """Mean matrix J of the active/dormant mutant process, rows = parent type."""
    _require_trait2_resident(params)
    fit2 = params.lambda2 - params.mu
    return np.array(
        [
            [params.lambda1 - params.lambda2 - params.tau / params.C * fit2, params.p * fit2],
            [params.sigma, -params.dormant_outflow],
        ]
    )


def _largest_eigenvalue(j: np.ndarray) -> float:
    half_tr = 0.5 * float(j[0, 0] + j[1, 1])
    det = float(j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0])
    # off-diagonal entries are nonnegative, so the discriminant is too
    root = math.sqrt(max(half_tr * half_tr - det, 0.0))
    if half_tr >= 0:
        return half_tr + root
    # avoid cancellation: product of the roots equals det
    smaller = half_tr - root
    return det / smaller if smaller != 0 else 0.0


def lambda_tilde_closed_form(params: ModelParams) -> float:
    _require_trait2_resident(params)
    c = params.C
    j = mean_matrix(params)
    det = float(j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0])
    alpha = (
        c * params.dormant_outflow
        - c * (params.lambda1 - params.lambda2)
        + (params.lambda2 - params.mu) * params.tau
    )
    # off-diagonals are non-negative, so the discriminant is too; below zero is rounding
    disc = max(alpha * alpha - 4.0 * c * c * det, 0.0)
    return (-alpha + math.sqrt(disc)) / (2.0 * c)


def lambda_tilde(params: ModelParams) -> float:
    """Largest eigenvalue of the mean matrix, cross-checked against the closed form."""
    j = mean_matrix(params)
    value = _largest_eigenvalue(j)
    check = lambda_tilde_closed_form(params)
    scale = max(abs(j).max(), 1.0)
    half_tr = 0.5 * float(j[0, 0] + j[1, 1])
    gap = math.sqrt(max(half_tr * half_tr - float(np.linalg.det(j)), 0.0))
    # near a double root the closed form's square root is only good to ~sqrt(eps)
    abs_tol = 1e-12 * scale if gap > 1e-4 * scale else 1e-7 * scale
    if not math.isclose(value, check, rel_tol=CROSS_CHECK_RTOL, abs_tol=abs_tol):
        raise ArithmeticError(f"eigenvalue cross-check failed: {value} vs {check}")
    return value


def q2(params: ModelParams) -> float:
    """Extinction probability of a single trait-2 mutant."""
    birth, death = trait2_mutant_rates(params)
    return min(1.0, death / birth)


def q1(params: ModelParams) -> float:
    """Extinction probability of a single active trait-1 mutant.

    Minimal fixed point of the offspring generating functions, found by
    monotone iteration from (0, 0).
    """
    if lambda_tilde(params) <= 0:
        return 1.0
    r = trait1_mutant_rates(params)
    total_a, total_d = r.active_total, r.dormant_total
    s_a = s_d = 0.0
    for _ in range(FIXED_POINT_CAP):
        new_a = (r.birth * s_a * s_a + r.death + r.switch * s_d) / total_a
        new_d = (r.dormant_death + r.resuscitation * s_a) / total_d
        step = max(abs(new_a - s_a), abs(new_d - s_d))
        s_a, s_d = new_a, new_d
        if step < FIXED_POINT_TOL:
            return min(s_a, 1.0)
    raise ConvergenceError(f"q1 iteration did not converge in {FIXED_POINT_CAP} steps")


@dataclass(frozen=True)
class Proportions:
    active: float
    dormant: float
    degenerate: bool


def pi_proportions(params: ModelParams) -> Proportions:
    """Normalized positive left eigenvector of J for its largest eigenvalue."""
    lt = lambda_tilde(params)
    if lt <= 0:
        raise InapplicableError("lambda_tilde <= 0: no limiting composition")
    if params.p == 0:
        return Proportions(1.0, 0.0, degenerate=True)
    j = mean_matrix(params)
    ratio = float((lt - j[0, 0]) / j[1, 0])
    active = 1.0 / (1.0 + ratio)
    return Proportions(active, ratio * active, degenerate=False)


@dataclass(frozen=True)
class FitnessReport:
    lambda_hat: Optional[float]
    lambda_tilde: Optional[float]
    q1: Optional[float]
    q2: Optional[float]
    pi_1a: Optional[float]
    pi_1d: Optional[float]
    pi_degenerate: bool
    critical: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "lambda_tilde": self.lambda_tilde,
            "q1": self.q1,
            "q2": self.q2,
            "pi_1a": self.pi_1a,
            "pi_1d": self.pi_1d,
            "pi_degenerate": self.pi_degenerate,
            "critical": list(self.critical),
        }


def fitness_report(params: ModelParams) -> FitnessReport:
    """Everything computable for both invasion directions.

    Quantities whose resident is unfit are None; fitnesses within
    ``CRITICAL_TOL`` of zero are listed in ``critical`` and their extinction
    probabilities omitted.
    """
    critical: list[str] = []
    lh = lt = e1 = e2 = pa = pd = None
    degenerate = False
    if params.lambda1 > params.mu:
        lh = lambda_hat(params)
        if abs(lh) < CRITICAL_TOL:
            critical.append("lambda_hat")
        else:
            e2 = q2(params)
    if params.lambda2 > params.mu:
        lt = lambda_tilde(params)
        if abs(lt) < CRITICAL_TOL:
            critical.append("lambda_tilde")
        else:
            e1 = q1(params)
            if lt > 0:
                props = pi_proportions(params)
                pa, pd, degenerate = props.active, props.dormant, props.degenerate
    return FitnessReport(lh, lt, e1, e2, pa, pd, degenerate, tuple(critical))


def require_noncritical(report: FitnessReport) -> None:
    if report.critical:
        raise CriticalCase(
            f"critical invasion fitness ({', '.join(report.critical)}): predictions unavailable"
        )


@njit(cache=True)
def _branching_kernel(rng, birth, death, switch, d_death, resus, trials, threshold, event_cap):
    # jump chain of the active/dormant process; returns (extinct, capped) counts
    extinct = 0
    capped = 0
    a_total = birth + death + switch
    d_total = d_death + resus
    for _ in range(trials):
        na = 1
        nd = 0
        events = 0
        while True:
            if na == 0 and nd == 0:
                extinct += 1
                break
            if na + nd >= threshold:
                break
            if events >= event_cap:
                capped += 1
                break
            ra = na * a_total
            u = rng.random() * (ra + nd * d_total)
            if u < ra:
                u /= na
                if u < birth:
                    na += 1
                elif u < birth + death:
                    na -= 1
                else:
                    na -= 1
                    nd += 1
            else:
                u = (u - ra) / nd
                nd -= 1
                if u >= d_death:
                    na += 1
            events += 1
    return extinct, capped


@dataclass(frozen=True)
class MonteCarloEstimate:
    extinct: int
    trials: int
    capped: int

    @property
    def estimate(self) -> float:
        return self.extinct / self.trials

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(max(p * (1 - p), 0.0) / self.trials)

    def wilson(self, confidence: float = 0.95) -> tuple[float, float]:
        ci = binomtest(self.extinct, self.trials).proportion_ci(confidence, method="wilson")
        return float(ci.low), float(ci.high)

    def to_dict(self) -> dict:
        low, high = self.wilson()
        return {
            "extinct": self.extinct,
            "trials": self.trials,
            "capped": self.capped,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "wilson95": [low, high],
        }


MAX_SURVIVAL_THRESHOLD = 10_000


def default_survival_threshold(params: ModelParams, trait: int, bias: float = 1e-12) -> int:
    """Population size beyond which extinction is negligible.

    From n individuals extinction has probability at most s**n, where s is
    the largest per-type extinction probability.
    """
    if trait == 2:
        s = q2(params)
    else:
        s_a = q1(params)
        r = trait1_mutant_rates(params)
        s_d = (r.dormant_death + r.resuscitation * s_a) / r.dormant_total
        s = max(s_a, s_d)
    if s >= 1.0 or s <= 0.0:
        return MAX_SURVIVAL_THRESHOLD if s >= 1.0 else 1
    return int(min(MAX_SURVIVAL_THRESHOLD, math.ceil(math.log(bias) / math.log(s))))


def branching_mc(
    params: ModelParams,
    trait: int,
    trials: int,
    seed: int,
    event_cap: int = 10**9,
    survival_threshold: Optional[int] = None,
) -> MonteCarloEstimate:
    """Estimate the extinction probability of one mutant founder by simulation.

    A run counts as surviving once the mutant population reaches
    ``survival_threshold`` or runs out of its event budget.  By default the
    threshold is the smallest size from which extinction has probability below
    1e-12 (at most 10**4).
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if trait == 2:
        birth, death = trait2_mutant_rates(params)
        rates = (birth, death, 0.0, 0.0, 1.0)
    elif trait == 1:
        r = trait1_mutant_rates(params)
        rates = (r.birth, r.death, r.switch, r.dormant_death, r.resuscitation)
    else:
        raise ValueError(f"trait must be 1 or 2, got {trait}")
    if survival_threshold is None:
        survival_threshold = default_survival_threshold(params, trait)
    rng = np.random.default_rng(seed)
    extinct, capped = _branching_kernel(
        rng, *rates, int(trials), int(survival_threshold), int(event_cap)
    )
    return MonteCarloEstimate(int(extinct), int(trials), int(capped))
