"""Model parameters and closed-form equilibria of the mean-field system.

The limiting dynamics for the rescaled densities ``(n1a, n1d, n2)`` are

    n1a' = n1a (lambda1 - mu - C (n1a + n2) - tau n2) + sigma n1d
    n1d' = p C n1a (n1a + n2) - (kappa mu + sigma) n1d
    n2'  = n2 (lambda2 - mu - C (n1a + n2) + tau n1a)

Whether a coordinatewise positive (coexistence) equilibrium exists is decided
by comparing three numbers: ``lambda2 - mu``, the middle expression ``M`` and
``lambda1 - mu`` (see :class:`Chain`).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

from .errors import BoundaryCase, DegenerateCase, InapplicableError, InvalidParameters

CHAIN_TOL = 1e-12
DEGENERATE_RTOL = 1e-12

PARAM_NAMES = ("lambda1", "lambda2", "mu", "C", "p", "kappa", "sigma", "tau")


@dataclass(frozen=True)
class ModelParams:
    """Rates of the individual-based model.

    lambda1, lambda2 are the birth rates of active trait-1 and trait-2
    individuals, mu the death rate of active individuals, C the competition
    strength, p the probability that a competitive event sends a trait-1
    individual into dormancy instead of killing it, kappa*mu the dormant death
    rate, sigma the resuscitation rate and tau the transfer rate.
    """

    lambda1: float
    lambda2: float
    mu: float
    C: float
    p: float
    kappa: float
    sigma: float
    tau: float

    def __post_init__(self) -> None:
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidParameters(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidParameters(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in ("lambda1", "lambda2", "mu", "C", "sigma"):
            if getattr(self, name) <= 0:
                raise InvalidParameters(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 <= self.p < 1.0:
            raise InvalidParameters(f"p must lie in [0, 1), got {self.p}")
        if self.kappa < 0:
            raise InvalidParameters(f"kappa must be >= 0, got {self.kappa}")
        if self.tau < 0:
            raise InvalidParameters(f"tau must be >= 0, got {self.tau}")

    @property
    def dormant_outflow(self) -> float:
        """Total exit rate from dormancy, kappa*mu + sigma."""
        return self.kappa * self.mu + self.sigma

    @property
    def hgt_free(self) -> bool:
        return self.tau == 0.0

    @property
    def dormancy_free(self) -> bool:
        return self.p == 0.0

    def with_(self, **changes: float) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        unknown = set(data) - set(PARAM_NAMES)
        if unknown:
            raise InvalidParameters(f"unknown model keys: {sorted(unknown)}")
        missing = [k for k in PARAM_NAMES if k not in data]
        if missing:
            raise InvalidParameters(f"missing model keys: {missing}")
        return cls(**{k: data[k] for k in PARAM_NAMES})


def trait2_equilibrium(params: ModelParams) -> float:
    """Density of a trait-2 population on its own, ((lambda2 - mu) v 0) / C."""
    return max(params.lambda2 - params.mu, 0.0) / params.C


def signed_trait2_equilibrium(params: ModelParams) -> float:
    """(lambda2 - mu) / C without truncation; negative when trait 2 is unfit."""
    return (params.lambda2 - params.mu) / params.C


def trait1_equilibrium(params: ModelParams) -> tuple[float, float]:
    """Active and dormant densities of a trait-1 population on its own."""
    growth = params.lambda1 - params.mu
    if growth <= 0:
        return 0.0, 0.0
    out = params.dormant_outflow
    stay = params.kappa * params.mu + (1.0 - params.p) * params.sigma
    active = growth / params.C * out / stay
    dormant = growth**2 * params.p * out / (params.C * stay**2)
    return active, dormant


def middle_expression(params: ModelParams) -> float:
    """The middle term M shared by both coexistence chains.

    M = C p sigma / (tau (kappa mu + sigma)) * (lambda2 - mu) + C / tau * (lambda1 - lambda2)
    """
    if params.tau == 0:
        raise InapplicableError(
            "HGT-free case (tau = 0): coexistence chains are undefined; "
            "use stability.hgt_free_regime"
        )
    c, tau = params.C, params.tau
    return (c * params.p * params.sigma / (tau * params.dormant_outflow)) * (
        params.lambda2 - params.mu
    ) + (c / tau) * (params.lambda1 - params.lambda2)


def _compare(x: float, y: float, tol: float = CHAIN_TOL) -> int:
    if abs(x - y) <= tol:
        return 0
    return 1 if x > y else -1


@dataclass(frozen=True)
class Chain:
    """Ordering of ``lambda2 - mu``, ``M`` and ``lambda1 - mu``.

    ``left`` is sign(M - (lambda2 - mu)) and ``right`` is sign((lambda1 - mu) - M),
    each 0 when the two sides agree within ``CHAIN_TOL``.

    * ``left > 0``  <=> the trait-1 mutant's mean matrix has a positive eigenvalue
    * ``right > 0`` <=> a trait-2 mutant grows in a trait-1 resident
    """

    fit2: float
    middle: float
    fit1: float
    left: int
    right: int

    @property
    def boundary(self) -> bool:
        return self.left == 0 or self.right == 0

    @property
    def founder_control(self) -> bool:
        """lambda2 - mu > M > lambda1 - mu."""
        return self.left < 0 and self.right < 0

    @property
    def stable_coexistence(self) -> bool:
        """lambda2 - mu < M < lambda1 - mu."""
        return self.left > 0 and self.right > 0

    @property
    def trait1_wins(self) -> bool:
        """lambda2 - mu < M and M > lambda1 - mu."""
        return self.left > 0 and self.right < 0

    @property
    def trait2_wins(self) -> bool:
        """lambda2 - mu > M and M < lambda1 - mu."""
        return self.left < 0 and self.right > 0

    @property
    def condition(self) -> Optional[str]:
        if self.founder_control:
            return "founder-control"
        if self.stable_coexistence:
            return "stable-coexistence"
        return None


def chain(params: ModelParams, tol: float = CHAIN_TOL) -> Chain:
    fit2 = params.lambda2 - params.mu
    fit1 = params.lambda1 - params.mu
    m = middle_expression(params)
    return Chain(fit2, m, fit1, _compare(m, fit2, tol), _compare(fit1, m, tol))


def transfer_balance(params: ModelParams) -> float:
    """C p sigma - tau (kappa mu + sigma); its sign separates weak from strong transfer."""
    return params.C * params.p * params.sigma - params.tau * params.dormant_outflow


def _check_degenerate(params: ModelParams) -> float:
    a = params.C * params.p * params.sigma
    b = params.tau * params.dormant_outflow
    if abs(a - b) <= DEGENERATE_RTOL * max(a, b):
        raise DegenerateCase(
            "C p sigma == tau (kappa mu + sigma): boundary case, no classification"
        )
    return a - b


def coexistence_formula(params: ModelParams) -> tuple[float, float, float]:
    """Evaluate the closed-form coexistence point without checking positivity."""
    if params.tau == 0:
        raise InapplicableError("no coexistence formula without transfer (tau = 0)")
    balance = _check_degenerate(params)
    c, p, tau = params.C, params.p, params.tau
    l1, l2, mu, sig = params.lambda1, params.lambda2, params.mu, params.sigma
    out = params.dormant_outflow
    shared = c * out * (l2 - l1) + c * p * sig * (mu - l2)
    num_a = shared + out * tau * (l2 - mu)
    num_2 = shared + out * tau * (l1 - mu)
    n1a = num_a / (tau * balance)
    n1d = p * c * (l2 - l1) * num_a / (tau * balance**2)
    n2 = num_2 / (-tau * balance)
    return n1a, n1d, n2


def coexistence_equilibrium(params: ModelParams) -> Optional[tuple[float, float, float]]:
    """The coordinatewise positive equilibrium, or None when it does not exist.

    For p = 0 the dormant coordinate is identically zero.

    Raises BoundaryCase when one of the chain inequalities is an equality and
    DegenerateCase when the common denominator vanishes.
    """
    ch = chain(params)
    if ch.boundary:
        raise BoundaryCase("a coexistence inequality holds with equality")
    if ch.condition is None:
        return None
    point = coexistence_formula(params)
    n1a, n1d, n2 = point
    # without dormancy the seed bank is empty and only n1a, n2 must be positive
    if n1a <= 0 or n2 <= 0 or (params.p > 0 and n1d <= 0):
        return None
    return point


def dormancy_free_coexistence(params: ModelParams) -> Optional[tuple[float, float]]:
    """Coexistence point (n1, n2) of the planar system obtained for p = 0."""
    c, tau = params.C, params.tau
    m = (c / tau) * (params.lambda1 - params.lambda2)
    fit1, fit2 = params.lambda1 - params.mu, params.lambda2 - params.mu
    if not (fit2 < m < fit1):
        return None
    return (params.mu - params.lambda2 + m) / tau, (fit1 - m) / tau


@dataclass(frozen=True)
class EquilibriumReport:
    bar_n1a: float
    bar_n1d: float
    bar_n2: float
    tilde_n2: float
    coexistence: Optional[tuple[float, float, float]]
    which_condition: Optional[str]

    @property
    def coexistence_exists(self) -> bool:
        return self.coexistence is not None

    def to_dict(self) -> dict:
        return {
            "bar_n1a": self.bar_n1a,
            "bar_n1d": self.bar_n1d,
            "bar_n2": self.bar_n2,
            "tilde_n2": self.tilde_n2,
            "coexistence": list(self.coexistence) if self.coexistence else None,
            "coexistence_exists": self.coexistence_exists,
            "which_condition": self.which_condition,
        }


def equilibria(params: ModelParams) -> EquilibriumReport:
    """All equilibria; boundary/degenerate cases propagate as exceptions."""
    n1a, n1d = trait1_equilibrium(params)
    coex = None
    which = None
    if params.tau > 0:
        coex = coexistence_equilibrium(params)
        if coex is not None:
            which = chain(params).condition
    return EquilibriumReport(
        bar_n1a=n1a,
        bar_n1d=n1d,
        bar_n2=trait2_equilibrium(params),
        tilde_n2=signed_trait2_equilibrium(params),
        coexistence=coex,
        which_condition=which,
    )
