"""Exact stochastic simulation of the individual-based model.

Direct method: the waiting time is exponential with the total rate and the
channel is picked proportionally to its rate.  Competition counts every
active individual including the focal one, so per-capita competition felt by
an active individual is C (N1a + N2) / K.

Randomness comes from NumPy's PCG64 generator.  Trial seeds are derived with
:func:`derive_seed`, which hashes ``(base_seed, K, trial)`` through
``numpy.random.SeedSequence``; results are reproducible across platforms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .model import ModelParams

CHANNELS = (
    "birth-1a",
    "death-1a",
    "switch-1a-1d",
    "transfer-1a-2",
    "death-1d",
    "resuscitate-1d-1a",
    "birth-2",
    "death-2",
)

INCREMENTS = np.array(
    [
        [1, 0, 0],
        [-1, 0, 0],
        [-1, 1, 0],
        [-1, 0, 1],
        [0, -1, 0],
        [1, -1, 0],
        [0, 0, 1],
        [0, 0, -1],
    ],
    dtype=np.int64,
)

ABSORBED, EXTINCTION, LEVEL, HIT_S1, HIT_S2, HIT_SCO, TIME_CAP, EVENT_CAP = range(8)
STOP_NAMES = ("absorbed", "extinction", "level", "S1", "S2", "Sco", "time-cap", "event-cap")

DEFAULT_EVENT_CAP = 10**9


@dataclass(frozen=True)
class CountState:
    N1a: int
    N1d: int
    N2: int

    def __post_init__(self) -> None:
        for name in ("N1a", "N1d", "N2"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def as_array(self) -> np.ndarray:
        return np.array([self.N1a, self.N1d, self.N2], dtype=np.int64)

    def to_list(self) -> list[int]:
        return [self.N1a, self.N1d, self.N2]


def event_rates(params: ModelParams, state: CountState | Sequence[int], K: float) -> np.ndarray:
    """Rates of the eight channels, in the order of ``CHANNELS``."""
    x1a, x1d, x2 = (float(v) for v in (state.to_list() if isinstance(state, CountState) else state))
    comp = params.C / K * (x1a + x2)
    return np.array(
        [
            params.lambda1 * x1a,
            (params.mu + (1.0 - params.p) * comp) * x1a,
            params.p * comp * x1a,
            params.tau / K * x1a * x2,
            params.kappa * params.mu * x1d,
            params.sigma * x1d,
            params.lambda2 * x2,
            (params.mu + comp) * x2,
        ]
    )


class Absorbed(Exception):
    """The chain sits in a state with total rate zero."""


def step(
    rng: np.random.Generator, params: ModelParams, state: CountState, K: float
) -> tuple[float, int, CountState]:
    """One event: (waiting time, channel index, next state)."""
    rates = event_rates(params, state, K)
    total = rates.sum()
    if total <= 0:
        raise Absorbed("total event rate is zero")
    wait = rng.exponential() / total
    u = rng.random() * total
    channel = int(np.searchsorted(np.cumsum(rates), u, side="right"))
    channel = min(channel, len(CHANNELS) - 1)
    while rates[channel] == 0:  # guard against u landing on a zero-width edge
        channel -= 1
    nxt = state.as_array() + INCREMENTS[channel]
    return wait, channel, CountState(*nxt)


@dataclass(frozen=True)
class StopSpec:
    """Stopping conditions, checked at time 0 and after every event.

    mutant: 1 (trait-1 total N1a + N1d) or 2 (N2); needed by ``extinction``
    and ``level``.  ``level`` is the integer count whose attainment stops the
    run.  The boxes are sup-norm balls of radius ``beta`` around the scaled
    equilibria ``trait1`` = (n1a, n1d), ``trait2`` = n2 and ``coexistence``;
    a count N is inside when K (x - beta) <= N <= K (x + beta).  The trait-1
    box also needs N2 = 0 and the trait-2 box N1a = N1d = 0.
    """

    mutant: int = 0
    extinction: bool = False
    level: Optional[int] = None
    trait1: Optional[tuple[float, float]] = None
    trait2: Optional[float] = None
    coexistence: Optional[tuple[float, float, float]] = None
    beta: float = 0.05
    t_cap: float = math.inf
    event_cap: int = DEFAULT_EVENT_CAP

    def __post_init__(self) -> None:
        terminating = (
            self.extinction
            or self.level is not None
            or self.trait1 is not None
            or self.trait2 is not None
            or self.coexistence is not None
            or math.isfinite(self.t_cap)
            or self.event_cap < DEFAULT_EVENT_CAP
        )
        if not terminating:
            raise ValueError("stop spec has no terminating condition")
        if (self.extinction or self.level is not None) and self.mutant not in (1, 2):
            raise ValueError("extinction/level stopping needs mutant = 1 or 2")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.event_cap <= 0:
            raise ValueError("event_cap must be positive")

    def packed(self, K: float) -> tuple[np.ndarray, np.ndarray]:
        """Integer flags and inclusive count bounds of the boxes at scale K."""
        flags = np.array(
            [
                self.mutant,
                int(self.extinction),
                self.level if self.level is not None else -1,
                int(self.trait1 is not None),
                int(self.trait2 is not None),
                int(self.coexistence is not None),
            ],
            dtype=np.int64,
        )
        centres = [
            *(self.trait1 or (0.0, 0.0)),
            self.trait2 or 0.0,
            *(self.coexistence or (0.0, 0.0, 0.0)),
        ]
        bounds = np.empty(12, dtype=np.int64)
        for i, x in enumerate(centres):
            bounds[2 * i] = max(0, math.ceil(K * (x - self.beta)))
            bounds[2 * i + 1] = math.floor(K * (x + self.beta))
        return flags, bounds


@njit(cache=True, nogil=True, inline="always")
def _stop_code(x1a, x1d, x2, flags, bounds):
    mutant = flags[0]
    if mutant == 1:
        m = x1a + x1d
    elif mutant == 2:
        m = x2
    else:
        m = -1
    if flags[1] == 1 and m == 0:
        return EXTINCTION
    if x1a + x1d + x2 == 0:
        return ABSORBED
    if flags[5] == 1:
        if (
            bounds[6] <= x1a <= bounds[7]
            and bounds[8] <= x1d <= bounds[9]
            and bounds[10] <= x2 <= bounds[11]
        ):
            return HIT_SCO
    if flags[3] == 1 and x2 == 0:
        if bounds[0] <= x1a <= bounds[1] and bounds[2] <= x1d <= bounds[3]:
            return HIT_S1
    if flags[4] == 1 and x1a == 0 and x1d == 0:
        if bounds[4] <= x2 <= bounds[5]:
            return HIT_S2
    if flags[2] >= 0 and m >= flags[2]:
        return LEVEL
    return -1


@njit(cache=True, nogil=True)
def _ssa_kernel(rng, state, K, rates, flags, bounds, t_cap, event_cap, record_dt, record):
    # rates = (lambda1, lambda2, mu, C, p, kappa, sigma, tau)
    l1 = rates[0]
    l2 = rates[1]
    mu = rates[2]
    p = rates[4]
    sigma = rates[6]
    c_k = rates[3] / K
    tau_k = rates[7] / K
    dormant_death = rates[5] * mu
    x1a = state[0]
    x1d = state[1]
    x2 = state[2]
    t = 0.0
    events = 0
    n_rec = 0
    max_rec = record.shape[0]
    next_rec = 0.0 if record_dt > 0.0 else np.inf
    code = _stop_code(x1a, x1d, x2, flags, bounds)
    while code < 0:
        if events >= event_cap:
            code = EVENT_CAP
            break
        a = float(x1a)
        d = float(x1d)
        b = float(x2)
        comp = c_k * (a + b)
        r0 = l1 * a
        r1 = (mu + (1.0 - p) * comp) * a
        r2 = p * comp * a
        r3 = tau_k * a * b
        r4 = dormant_death * d
        r5 = sigma * d
        r6 = l2 * b
        r7 = (mu + comp) * b
        total = r0 + r1 + r2 + r3 + r4 + r5 + r6 + r7
        if total <= 0.0:
            code = ABSORBED
            break
        t_next = t + rng.exponential() / total
        while next_rec < t_next and next_rec <= t_cap and n_rec < max_rec:
            record[n_rec, 0] = next_rec
            record[n_rec, 1] = x1a
            record[n_rec, 2] = x1d
            record[n_rec, 3] = x2
            n_rec += 1
            next_rec = n_rec * record_dt
        if t_next > t_cap:
            t = t_cap
            code = TIME_CAP
            break
        t = t_next
        u = rng.random() * total
        # channel ladder in CHANNELS order
        if u < r0:
            x1a += 1
        else:
            u -= r0
            if u < r1:
                x1a -= 1
            else:
                u -= r1
                if u < r2:
                    x1a -= 1
                    x1d += 1
                else:
                    u -= r2
                    if u < r3:
                        x1a -= 1
                        x2 += 1
                    else:
                        u -= r3
                        if u < r4:
                            x1d -= 1
                        else:
                            u -= r4
                            if u < r5:
                                x1d -= 1
                                x1a += 1
                            else:
                                u -= r5
                                if u < r6 or r7 == 0.0:
                                    x2 += 1
                                else:
                                    x2 -= 1
        events += 1
        code = _stop_code(x1a, x1d, x2, flags, bounds)
    if n_rec < max_rec and next_rec <= t:
        # the sample at the stopping time itself
        record[n_rec, 0] = t
        record[n_rec, 1] = x1a
        record[n_rec, 2] = x1d
        record[n_rec, 3] = x2
        n_rec += 1
    state[0] = x1a
    state[1] = x1d
    state[2] = x2
    return code, t, events, n_rec


@dataclass
class RunResult:
    stop: str
    t: float
    state: CountState
    events: int
    trajectory: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"stop": self.stop, "t": self.t, "state": self.state.to_list(), "events": self.events}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def derive_seed(base_seed: int, *key: int) -> int:
    """64-bit seed for a work item, a hash of ``base_seed`` and ``key``."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _param_vector(params: ModelParams) -> np.ndarray:
    return np.array(
        [params.lambda1, params.lambda2, params.mu, params.C, params.p, params.kappa,
         params.sigma, params.tau]
    )


def run(
    seed: int | np.random.Generator,
    params: ModelParams,
    K: int,
    init: CountState | Sequence[int],
    stop: StopSpec,
    record_dt: Optional[float] = None,
) -> RunResult:
    """Simulate until the first stopping condition holds.

    With ``record_dt`` the counts are sampled at 0, dt, 2 dt, ... (values
    hold between events) plus once at the stopping time.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    start = init if isinstance(init, CountState) else CountState(*init)
    state = start.as_array()
    flags, bounds = stop.packed(K)
    if record_dt is not None:
        if not record_dt > 0:
            raise ValueError("record_dt must be positive")
        if not math.isfinite(stop.t_cap):
            raise ValueError("recording needs a finite t_cap")
        buf = np.empty((int(math.floor(stop.t_cap / record_dt)) + 2, 4))
        dt = float(record_dt)
    else:
        buf = np.empty((0, 4))
        dt = 0.0
    code, t, events, n_rec = _ssa_kernel(
        rng, state, float(K), _param_vector(params), flags, bounds,
        float(stop.t_cap), int(stop.event_cap), dt, buf,
    )
    return RunResult(
        STOP_NAMES[code], float(t), CountState(*state), int(events),
        buf[:n_rec].copy() if record_dt is not None else None,
    )
