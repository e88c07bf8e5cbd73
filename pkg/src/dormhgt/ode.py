"""Mean-field vector fields and their numerical integration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, InapplicableError
from .model import (
    ModelParams,
    coexistence_equilibrium,
    dormancy_free_coexistence,
    trait1_equilibrium,
    trait2_equilibrium,
)

RTOL = 1e-9
ATOL = 1e-12
RHS_TOL = 1e-10
MATCH_TOL = 1e-6
T_CAP = 1e4


def rhs_full(params: ModelParams, state: Sequence[float]) -> np.ndarray:
    n1a, n1d, n2 = state
    l1, l2, mu, c = params.lambda1, params.lambda2, params.mu, params.C
    p, sigma, tau = params.p, params.sigma, params.tau
    return np.array(
        [
            n1a * (l1 - mu - c * (n1a + n2) - tau * n2) + sigma * n1d,
            p * c * n1a * (n1a + n2) - params.dormant_outflow * n1d,
            n2 * (l2 - mu - c * (n1a + n2) + tau * n1a),
        ]
    )


def rhs_dormancy_free(params: ModelParams, state: Sequence[float]) -> np.ndarray:
    """Planar system (n1, n2) without dormancy; ``params.p`` is ignored."""
    n1, n2 = state
    l1, l2, mu, c, tau = params.lambda1, params.lambda2, params.mu, params.C, params.tau
    return np.array(
        [
            n1 * (l1 - mu - c * (n1 + n2) - tau * n2),
            n2 * (l2 - mu - c * (n1 + n2) + tau * n1),
        ]
    )


def rhs_hgt_free(params: ModelParams, state: Sequence[float]) -> np.ndarray:
    """Full system without transfer; ``params.tau`` is ignored."""
    n1a, n1d, n2 = state
    l1, l2, mu, c, p = params.lambda1, params.lambda2, params.mu, params.C, params.p
    return np.array(
        [
            n1a * (l1 - mu - c * (n1a + n2)) + params.sigma * n1d,
            p * c * n1a * (n1a + n2) - params.dormant_outflow * n1d,
            n2 * (l2 - mu - c * (n1a + n2)),
        ]
    )


def rhs_reduced(params: ModelParams, state: Sequence[float]) -> np.ndarray:
    """Trait-1 dynamics with trait 2 slaved to C(n1a + n2) = lambda2 - mu + tau n1a."""
    n1a, n1d = state
    l1, l2, mu, c, tau = params.lambda1, params.lambda2, params.mu, params.C, params.tau
    return np.array(
        [
            n1a * (l1 - l2 - tau / c * (l2 - mu) - tau * tau / c * n1a) + params.sigma * n1d,
            n1a * params.p * (l2 - mu + tau * n1a) - params.dormant_outflow * n1d,
        ]
    )


SYSTEMS: dict[str, tuple[Callable[[ModelParams, Sequence[float]], np.ndarray], tuple[str, ...]]] = {
    "full": (rhs_full, ("n1a", "n1d", "n2")),
    "p0": (rhs_dormancy_free, ("n1", "n2")),
    "tau0": (rhs_hgt_free, ("n1a", "n1d", "n2")),
    "reduced": (rhs_reduced, ("n1a", "n1d")),
}


def system(name: str):
    try:
        return SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    columns: tuple[str, ...]
    steps: int
    residual: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _clamp(y: np.ndarray, atol: float) -> np.ndarray:
    y = np.where((y < 0) & (y >= -atol), 0.0, y)
    return y


def integrate(
    params: ModelParams,
    system_name: str,
    init: Sequence[float],
    t_max: float,
    t_eval: Optional[Sequence[float]] = None,
    samples: int = 201,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> Trajectory:
    """Integrate with an embedded 8(5,3) Runge-Kutta scheme and dense output.

    Samples are taken at ``t_eval`` or at ``samples`` evenly spaced times.
    Coordinates no more than ``atol`` below zero are clamped to zero.
    """
    f, columns = system(system_name)
    y0 = np.asarray(init, dtype=float)
    if y0.shape != (len(columns),):
        raise ValueError(f"system {system_name!r} needs {len(columns)} initial values")
    if np.any(y0 < 0) or not np.all(np.isfinite(y0)):
        raise ValueError("initial state must be finite and nonnegative")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    times = np.linspace(0.0, t_max, samples) if t_eval is None else np.asarray(t_eval, float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    sol = solve_ivp(
        lambda _t, y: f(params, y),
        (0.0, float(times[-1])),
        y0,
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if sol.status != 0:
        raise ConvergenceError(f"integration failed: {sol.message}")
    states = _clamp(sol.y.T, atol)
    residual = float(np.linalg.norm(f(params, states[-1])))
    return Trajectory(sol.t, states, columns, int(sol.nfev), residual)


@dataclass(frozen=True)
class ConvergenceResult:
    state: tuple[float, ...]
    label: str
    rhs_norm: float
    t: float
    distance: Optional[float]

    def to_dict(self) -> dict:
        return {
            "state": list(self.state),
            "label": self.label,
            "rhs_norm": self.rhs_norm,
            "t": self.t,
            "distance": self.distance,
        }


def candidate_equilibria(params: ModelParams, system_name: str) -> list[tuple[str, np.ndarray]]:
    """Known equilibria of a system, coexistence first."""
    n1a, n1d = trait1_equilibrium(params)
    n2 = trait2_equilibrium(params)
    out: list[tuple[str, np.ndarray]] = []
    if system_name == "p0":
        coex = dormancy_free_coexistence(params) if params.tau > 0 else None
        if coex is not None:
            out.append(("coexistence", np.array(coex)))
        n1 = max(params.lambda1 - params.mu, 0.0) / params.C
        out += [("trait1", np.array([n1, 0.0])), ("trait2", np.array([0.0, n2]))]
        out.append(("origin", np.zeros(2)))
        return out
    coex = None
    if params.tau > 0 and system_name != "tau0":
        try:
            coex = coexistence_equilibrium(params)
        except InapplicableError:
            coex = None
    if system_name == "reduced":
        if coex is not None:
            out.append(("coexistence", np.array(coex[:2])))
        out.append(("origin", np.zeros(2)))
        return out
    if coex is not None:
        out.append(("coexistence", np.array(coex)))
    out += [
        ("trait1", np.array([n1a, n1d, 0.0])),
        ("trait2", np.array([0.0, 0.0, n2])),
        ("origin", np.zeros(3)),
    ]
    return out


def converge(
    params: ModelParams,
    system_name: str,
    init: Sequence[float],
    match_tol: float = MATCH_TOL,
    t_cap: float = T_CAP,
    rhs_tol: float = RHS_TOL,
    first_chunk: float = 10.0,
    rtol: float = 1e-12,
    atol: float = 1e-14,
) -> ConvergenceResult:
    """Integrate until the vector field is negligible, then name the equilibrium reached.

    Integration proceeds in chunks of doubling length up to ``t_cap``; failing
    to settle yields label ``none`` rather than an exception.  Tolerances are
    tighter than for plain integration so that ``rhs_tol`` is attainable.
    """
    f, _ = system(system_name)
    y = np.asarray(init, dtype=float)
    t = 0.0
    chunk = first_chunk
    norm = float(np.linalg.norm(f(params, y)))
    while norm >= rhs_tol and t < t_cap:
        span = min(chunk, t_cap - t)
        traj = integrate(params, system_name, y, span, samples=2, rtol=rtol, atol=atol)
        # the orthant is invariant; negative values are integration error
        y = np.maximum(traj.final, 0.0)
        t += span
        chunk *= 2
        norm = traj.residual
    best_label, best_dist = "none", None
    if norm < rhs_tol:
        for label, point in candidate_equilibria(params, system_name):
            dist = float(np.linalg.norm(y - point))
            if dist < match_tol:
                best_label, best_dist = label, dist
                break
    if best_dist is None:
        dists = [float(np.linalg.norm(y - pt)) for _, pt in candidate_equilibria(params, system_name)]
        best_dist = min(dists) if dists else math.nan
    return ConvergenceResult(tuple(float(v) for v in y), best_label, norm, t, best_dist)
