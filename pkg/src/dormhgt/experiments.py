"""Monte Carlo protocols: invasion from a single mutant, hitting times,
active/dormant composition of a growing mutant population, and the
deviation of rescaled simulations from the mean-field flow."""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from . import ssa
from .branching import (
    CRITICAL_TOL,
    default_survival_threshold,
    lambda_hat,
    lambda_tilde,
    pi_proportions,
    q1,
    q2,
)
from .errors import BoundaryCase, CriticalCase, ResidentUnfit
from .model import (
    ModelParams,
    chain,
    coexistence_equilibrium,
    trait1_equilibrium,
    trait2_equilibrium,
)
from .ode import integrate

DIRECTIONS = ("2into1", "1into2")

EXTINCTION = "Extinction"
FIXATION = "FixationMutant"
COEXISTENCE = "Coexistence"
CENSORED = "Censored"
KINDS = (EXTINCTION, FIXATION, COEXISTENCE, CENSORED)

_KIND_OF_STOP = {
    "extinction": EXTINCTION,
    "S1": FIXATION,
    "S2": FIXATION,
    "Sco": COEXISTENCE,
    "time-cap": CENSORED,
    "event-cap": CENSORED,
}


@dataclass(frozen=True)
class TrialOutcome:
    kind: str
    t: float
    state: ssa.CountState
    seed: int
    events: int

    @property
    def success(self) -> bool:
        return self.kind in (FIXATION, COEXISTENCE)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _check_direction(direction: str) -> None:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


def validate_invasion(params: ModelParams, direction: str) -> None:
    """Reject parameters for which the invasion analysis has no prediction."""
    _check_direction(direction)
    if params.tau > 0 and chain(params).boundary:
        raise BoundaryCase("a coexistence inequality holds with equality")
    if direction == "2into1":
        if params.lambda1 <= params.mu:
            raise ResidentUnfit("resident trait 1 is unfit (lambda1 <= mu)")
        if abs(lambda_hat(params)) < CRITICAL_TOL:
            raise CriticalCase("lambda_hat is critical")
    else:
        if params.lambda2 <= params.mu:
            raise ResidentUnfit("resident trait 2 is unfit (lambda2 <= mu)")
        if abs(lambda_tilde(params)) < CRITICAL_TOL:
            raise CriticalCase("lambda_tilde is critical")


def _coexistence_target(params: ModelParams) -> Optional[tuple[float, float, float]]:
    if params.tau == 0:
        return None
    return coexistence_equilibrium(params)


def invasion_setup(
    params: ModelParams, K: int, direction: str, beta: float = 0.05,
    t_cap: float = math.inf, event_cap: int = ssa.DEFAULT_EVENT_CAP,
) -> tuple[ssa.CountState, ssa.StopSpec]:
    """Initial counts (resident at rounded equilibrium, one active mutant) and stop rules."""
    validate_invasion(params, direction)
    n1a, n1d = trait1_equilibrium(params)
    n2 = trait2_equilibrium(params)
    coex = _coexistence_target(params)
    if direction == "2into1":
        init = ssa.CountState(round(K * n1a), round(K * n1d), 1)
        stop = ssa.StopSpec(
            mutant=2, extinction=True, trait2=n2 if n2 > 0 else None,
            coexistence=coex, beta=beta, t_cap=t_cap, event_cap=event_cap,
        )
    else:
        init = ssa.CountState(1, 0, round(K * n2))
        stop = ssa.StopSpec(
            mutant=1, extinction=True, trait1=(n1a, n1d) if n1a > 0 else None,
            coexistence=coex, beta=beta, t_cap=t_cap, event_cap=event_cap,
        )
    return init, stop


def invasion_trial(
    params: ModelParams, K: int, direction: str, beta: float = 0.05, seed: int = 0,
    t_cap: float = math.inf, event_cap: int = ssa.DEFAULT_EVENT_CAP,
) -> TrialOutcome:
    init, stop = invasion_setup(params, K, direction, beta, t_cap, event_cap)
    return _trial(params, K, init, stop, seed)


def _trial(params, K, init, stop, seed) -> TrialOutcome:
    res = ssa.run(seed, params, K, init, stop)
    kind = _KIND_OF_STOP.get(res.stop, EXTINCTION)
    return TrialOutcome(kind, res.t, res.state, seed, res.events)


def theory(params: ModelParams, direction: str) -> dict:
    """Limiting success probability and hitting-time constant (T / ln K)."""
    _check_direction(direction)
    lh = lambda_hat(params) if params.lambda1 > params.mu else None
    lt = lambda_tilde(params) if params.lambda2 > params.mu else None
    constant = None
    if direction == "2into1":
        prob = 1.0 - q2(params)
        if lh is not None and lh > 0:
            constant = 1.0 / lh if lt is None or lt > 0 else 1.0 / lh - 1.0 / lt
    else:
        prob = 1.0 - q1(params)
        if lt is not None and lt > 0:
            constant = 1.0 / lt if lh is not None and lh > 0 else (
                1.0 / lt - 1.0 / lh if lh is not None else None
            )
    return {"success_probability": prob, "time_constant": constant,
            "lambda_hat": lh, "lambda_tilde": lt}


@dataclass(frozen=True)
class StudyRow:
    K: int
    trials: int
    extinction: int
    fixation: int
    coexistence: int
    censored: int
    success_probability: Optional[float]
    wilson_low: Optional[float]
    wilson_high: Optional[float]
    theory_success: float
    mean_T_over_lnK: Optional[float]
    median_T_over_lnK: Optional[float]
    se_T_over_lnK: Optional[float]
    theory_time_constant: Optional[float]
    mean_T0_over_lnK: Optional[float]
    censored_fraction: float

    def to_dict(self) -> dict:
        return asdict(self)


COLUMNS = tuple(StudyRow.__dataclass_fields__)


@dataclass
class StudySummary:
    direction: str
    beta: float
    base_seed: int
    rows: list[StudyRow]
    outcomes: dict[int, list[TrialOutcome]]

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "beta": self.beta,
            "base_seed": self.base_seed,
            "rows": [r.to_dict() for r in self.rows],
        }


def wilson(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, n).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


def summarize(K: int, outcomes: Sequence[TrialOutcome], predicted: dict) -> StudyRow:
    counts = {k: sum(o.kind == k for o in outcomes) for k in KINDS}
    decided = len(outcomes) - counts[CENSORED]
    successes = counts[FIXATION] + counts[COEXISTENCE]
    prob = low = high = None
    if decided:
        prob = successes / decided
        low, high = wilson(successes, decided)
    log_k = math.log(K)
    times = [o.t / log_k for o in outcomes if o.success]
    ext_times = [o.t / log_k for o in outcomes if o.kind == EXTINCTION]
    mean = statistics.fmean(times) if times else None
    return StudyRow(
        K=K,
        trials=len(outcomes),
        extinction=counts[EXTINCTION],
        fixation=counts[FIXATION],
        coexistence=counts[COEXISTENCE],
        censored=counts[CENSORED],
        success_probability=prob,
        wilson_low=low,
        wilson_high=high,
        theory_success=predicted["success_probability"],
        mean_T_over_lnK=mean,
        median_T_over_lnK=statistics.median(times) if times else None,
        se_T_over_lnK=statistics.stdev(times) / math.sqrt(len(times)) if len(times) > 1 else None,
        theory_time_constant=predicted["time_constant"],
        mean_T0_over_lnK=statistics.fmean(ext_times) if ext_times else None,
        censored_fraction=counts[CENSORED] / len(outcomes),
    )


def invasion_study(
    params: ModelParams,
    K_list: Sequence[int],
    trials: int,
    direction: str,
    beta: float = 0.05,
    base_seed: int = 0,
    workers: int = 1,
    t_cap: float = math.inf,
    event_cap: int = ssa.DEFAULT_EVENT_CAP,
) -> StudySummary:
    """Run ``trials`` invasion trials per K; trial i at K uses derive_seed(base_seed, K, i)."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    predicted = theory(params, direction)
    rows, outcomes = [], {}
    for K in K_list:
        init, stop = invasion_setup(params, K, direction, beta, t_cap, event_cap)
        seeds = [ssa.derive_seed(base_seed, K, i) for i in range(trials)]
        results = _map(lambda s: _trial(params, K, init, stop, s), seeds, workers)
        outcomes[K] = results
        rows.append(summarize(K, results, predicted))
    return StudySummary(direction, beta, base_seed, rows, outcomes)


def raw_rows(summary: StudySummary) -> list[list]:
    """Per-trial rows ``trial,seed,kind,t,N1a,N1d,N2`` (K-major)."""
    rows = []
    for K, results in summary.outcomes.items():
        for i, o in enumerate(results):
            rows.append([i, o.seed, o.kind, o.t, *o.state.to_list()])
    return rows


@dataclass(frozen=True)
class ProportionResult:
    pi_active: float
    survivors: int
    within: int
    trials: int
    active_fractions: tuple[float, ...]

    @property
    def fraction_within(self) -> Optional[float]:
        return self.within / self.survivors if self.survivors else None


def proportion_check(
    params: ModelParams,
    K: int,
    trials: int,
    eps: float = 0.05,
    delta: float = 0.05,
    base_seed: int = 0,
    workers: int = 1,
) -> ProportionResult:
    """Active fraction of a trait-1 mutant population when it first reaches floor(eps K).

    Trials start from one active mutant in a trait-2 resident; those dying out
    first are discarded.  Returns how many survivors lie within ``delta`` of
    the predicted active proportion.
    """
    validate_invasion(params, "1into2")
    pi_a = pi_proportions(params).active
    level = math.floor(eps * K)
    init = ssa.CountState(1, 0, round(K * trait2_equilibrium(params)))
    stop = ssa.StopSpec(mutant=1, extinction=True, level=level)
    seeds = [ssa.derive_seed(base_seed, K, i) for i in range(trials)]
    results = _map(lambda s: ssa.run(s, params, K, init, stop), seeds, workers)
    fractions = tuple(
        r.state.N1a / (r.state.N1a + r.state.N1d) for r in results if r.stop == "level"
    )
    within = sum(abs(f - pi_a) < delta for f in fractions)
    return ProportionResult(pi_a, len(fractions), within, trials, fractions)


def meanfield_check(
    params: ModelParams,
    K: int,
    horizon: float = 10.0,
    reps: int = 100,
    base_seed: int = 0,
    init: Optional[Sequence[float]] = None,
    dt: float = 0.05,
    workers: int = 1,
) -> np.ndarray:
    """Sup-norm distance between rescaled simulations and the mean-field flow.

    Both are compared on a grid of spacing ``dt`` over [0, horizon]; the flow
    starts from the rounded initial counts divided by K.  ``init`` defaults
    to the trait-1 equilibrium.
    """
    if init is None:
        n1a, n1d = trait1_equilibrium(params)
        init = (n1a, n1d, 0.0)
    counts = ssa.CountState(*(round(K * x) for x in init))
    scaled = counts.as_array() / K
    grid = np.arange(0.0, horizon + 0.5 * dt, dt)
    flow = integrate(params, "full", scaled, float(grid[-1]), t_eval=grid).states
    stop = ssa.StopSpec(t_cap=float(grid[-1]))

    def one(seed: int) -> float:
        res = ssa.run(seed, params, K, counts, stop, record_dt=dt)
        path = res.trajectory[: len(grid), 1:] / K
        if len(path) < len(grid):  # absorbed early: state stays put
            path = np.vstack([path, np.repeat(res.state.as_array()[None] / K, len(grid) - len(path), 0)])
        return float(np.max(np.abs(path - flow)))

    seeds = [ssa.derive_seed(base_seed, K, i) for i in range(reps)]
    return np.array(_map(one, seeds, workers))


def failed_invasion_times(
    params: ModelParams,
    K: int,
    trials: int,
    direction: str,
    level: Optional[int] = None,
    base_seed: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """Extinction times T0 / ln K of mutants that die out before reaching ``level``.

    Runs reaching ``level`` are stopped there, which makes sampling many
    failures cheap.  The default level is the branching-process size from
    which extinction has probability below 1e-12, so almost no failure is
    missed.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    init, _ = invasion_setup(params, K, direction)
    mutant = 2 if direction == "2into1" else 1
    if level is None:
        level = default_survival_threshold(params, mutant)
    stop = ssa.StopSpec(mutant=mutant, extinction=True, level=int(level))
    seeds = [ssa.derive_seed(base_seed, K, i) for i in range(trials)]
    results = _map(lambda s: ssa.run(s, params, K, init, stop), seeds, workers)
    log_k = math.log(K)
    return np.array([r.t / log_k for r in results if r.stop == "extinction"])
