"""Contract geometry, reward and penalty families, and quote containers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .errors import AdmissibilityError, DomainError


def _finite(name: str, value: float) -> None:
    if value is None or not math.isfinite(value):
        raise DomainError(f"{name} must be a finite number, got {value}")


# --- rewards ---------------------------------------------------------------


@dataclass(frozen=True)
class ConstantReward:
    """alpha(x) = alpha."""

    alpha: float

    def __post_init__(self):
        _finite("alpha", self.alpha)
        if self.alpha < 0:
            raise DomainError("constant reward must be non-negative")

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.alpha)[()]

    def exp_shift_mean(self, a: float, rho: float) -> float:
        return self.alpha


@dataclass(frozen=True)
class LinearReward:
    """alpha(x) = alpha1 + alpha2 * x."""

    alpha1: float
    alpha2: float

    def __post_init__(self):
        _finite("alpha1", self.alpha1)
        _finite("alpha2", self.alpha2)

    def __call__(self, x):
        return (self.alpha1 + self.alpha2 * np.asarray(x, dtype=float))[()]

    def exp_shift_mean(self, a: float, rho: float) -> float:
        return self.alpha1 + self.alpha2 * (a + 1.0 / rho)


@dataclass(frozen=True)
class ExponentialReward:
    """alpha(x) = omega * exp(kappa * x)."""

    omega: float
    kappa: float

    def __post_init__(self):
        _finite("omega", self.omega)
        _finite("kappa", self.kappa)

    def __call__(self, x):
        return (self.omega * np.exp(self.kappa * np.asarray(x, dtype=float)))[()]

    def exp_shift_mean(self, a: float, rho: float) -> float:
        if self.kappa >= rho:
            raise AdmissibilityError(
                f"exponential reward needs kappa < rho for a finite payout (kappa={self.kappa}, rho={rho})"
            )
        return self.omega * math.exp(self.kappa * a) * rho / (rho - self.kappa)


RewardSpec = Union[ConstantReward, LinearReward, ExponentialReward]


def reward_at_least(reward: RewardSpec, a: float) -> None:
    """Reject rewards that are negative somewhere on [a, a + 50)."""
    probe = np.linspace(a, a + 50.0, 64)
    if np.any(np.asarray(reward(probe)) < 0):
        raise DomainError("reward must be non-negative for drawdowns of at least a")


# --- penalties -------------------------------------------------------------


@dataclass(frozen=True)
class ConstantPenalty:
    """c(d) = c for d < a."""

    c: float

    def __post_init__(self):
        _finite("c", self.c)
        if self.c < 0:
            raise DomainError("penalty must be non-negative")

    def coefficients(self, p, r, a):
        return self.c, 0.0, 0.0  # value, slope, curvature in powers of (a - d)


@dataclass(frozen=True)
class LinearC1:
    """c(d) = p/(r a) * (a - d) for d < a."""

    def coefficients(self, p, r, a):
        return 0.0, p / (r * a), 0.0


@dataclass(frozen=True)
class QuadraticC2:
    """c(d) = p/(r a^2) * (a - d)^2 for d < a."""

    def coefficients(self, p, r, a):
        return 0.0, 0.0, p / (r * a * a)


@dataclass(frozen=True)
class LinearC3:
    """c(d) = (c_end - p/r)/a * d + p/r for d < a, interpolating p/r at 0 and c_end at a."""

    c_end: float

    def __post_init__(self):
        _finite("c_end", self.c_end)

    def coefficients(self, p, r, a):
        return self.c_end, (p / r - self.c_end) / a, 0.0


PenaltySpec = Union[ConstantPenalty, LinearC1, QuadraticC2, LinearC3]


def penalty_fee(penalty: PenaltySpec, d, p: float, r: float, a: float, deriv: int = 0):
    """Fee c(d) (or its derivative in d) for the contract rates p, r and level a.

    Every family is written as k0 + k1*(a - d) + k2*(a - d)^2 on [0, a) and
    is zero from d = a on.
    """
    k0, k1, k2 = penalty.coefficients(p, r, a)
    d = np.asarray(d, dtype=float)
    y = a - d
    if deriv == 0:
        out = k0 + k1 * y + k2 * y * y
    elif deriv == 1:
        out = -k1 - 2.0 * k2 * y
    elif deriv == 2:
        out = np.full_like(y, 2.0 * k2)
    else:
        raise DomainError(f"deriv must be 0, 1 or 2, got {deriv}")
    out = np.where(d < a, out, 0.0)
    return out[()] if out.ndim == 0 else out


def check_penalty(penalty: PenaltySpec, p: float, r: float, a: float) -> None:
    """Reject fees that are negative or increasing on [0, a)."""
    if isinstance(penalty, LinearC3) and r > 0 and not penalty.c_end < p / r:
        raise DomainError(f"LinearC3 needs c_end < p/r (c_end={penalty.c_end}, p/r={p / r})")
    grid = np.linspace(0.0, a, 201)[:-1]
    fees = penalty_fee(penalty, grid, p, r, a)
    if np.any(fees < -1e-12):
        raise DomainError("penalty must be non-negative on [0, a)")
    if np.any(np.diff(fees) > 1e-12):
        raise DomainError("penalty must be non-increasing on [0, a)")


# --- contract geometry -----------------------------------------------------


@dataclass(frozen=True)
class ContractSpec:
    """Drawdown trigger ``a``, optional drawup trigger ``b``, rates and initial state."""

    a: float
    r: float
    p: Optional[float] = None
    d: float = 0.0
    b: Optional[float] = None
    u: float = 0.0

    def __post_init__(self):
        _finite("a", self.a)
        _finite("r", self.r)
        _finite("d", self.d)
        _finite("u", self.u)
        if self.a <= 0:
            raise DomainError(f"drawdown level a must be positive, got {self.a}")
        if self.r < 0:
            raise DomainError(f"discount rate r must be non-negative, got {self.r}")
        if self.p is not None:
            _finite("p", self.p)
            if self.p < 0:
                raise DomainError(f"premium p must be non-negative, got {self.p}")
        if not 0 <= self.d <= self.a:
            raise DomainError(f"initial drawdown d must lie in [0, a], got d={self.d}, a={self.a}")
        if self.b is None:
            if self.u != 0:
                raise DomainError("initial drawup u requires a drawup level b")
        else:
            _finite("b", self.b)
            if not 0 < self.b <= self.a:
                raise DomainError(f"drawup level b must satisfy 0 < b <= a, got b={self.b}, a={self.a}")
            if not 0 <= self.u <= self.b:
                raise DomainError(f"initial drawup u must lie in [0, b], got u={self.u}, b={self.b}")

    def with_(self, **changes) -> "ContractSpec":
        return replace(self, **changes)

    def premium(self) -> float:
        if self.p is None:
            raise DomainError("this operation needs a premium rate p")
        return self.p


# --- results ---------------------------------------------------------------


@dataclass(frozen=True)
class ConditionCheck:
    """Outcome of one numerical optimality-condition check.

    ``margin`` is signed so that margin >= 0 means the condition holds.
    """

    holds: bool
    margin: float
    note: str = ""


@dataclass
class QuoteResult:
    """Value of one contract with optional fair premium, threshold and diagnostics."""

    value: float
    fair_premium: Optional[float] = None
    theta_star: Optional[float] = None
    conditions: dict = field(default_factory=dict)
    flags: tuple = ()

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "fair_premium": self.fair_premium,
            "theta_star": self.theta_star,
            "conditions": {
                name: {"holds": c.holds, "margin": c.margin, "note": c.note}
                for name, c in self.conditions.items()
            },
            "flags": list(self.flags),
        }
