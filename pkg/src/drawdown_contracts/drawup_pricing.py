"""Drawdown insurance that lapses when a drawup of size b occurs first.

With tau_D the first time the drawdown exceeds a and tau_U the first time
the drawup exceeds b, the value is

    k(d, u, p) = (p/r) (nu + lambda) + N - p/r,

where nu = E[exp(-r tau_D); tau_D < tau_U], lambda = E[exp(-r tau_U);
tau_U < tau_D] and N = E[exp(-r tau_D) alpha(D); tau_D < tau_U].

Closed forms exist for b = a under both models and for b < a under
Brownian motion with a constant reward.  Other configurations raise
UnsupportedConfigurationError and are left to the Monte Carlo oracle.

The cancellable version lets the buyer stop by paying c(D).  Stopping
when X first rises to the level d - theta gives the surplus h_>(theta)
over the plain contract, and theta*(d, u) maximizes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from ._numerics import maximize_on_grid
from .contracts import (
    ConditionCheck,
    ConstantReward,
    ContractSpec,
    QuoteResult,
    check_penalty,
    penalty_fee,
)
from .drawdown_pricing import _war1_on_region, penalty_generator, reward_transform
from .errors import (
    DegenerateContractError,
    DomainError,
    UnsupportedConfigurationError,
    UnsupportedModelError,
)
from .levy_models import (
    CramerLundberg,
    LinearBrownian,
    exit_below,
    exp_coeffs,
    levy_density,
    scale_w,
    scale_z,
    w_damped,
    w_ratio,
)

DEGENERATE_TOL = 1e-12


def _as_out(x):
    x = np.asarray(x, dtype=float)
    return x[()] if x.ndim == 0 else x


@dataclass(frozen=True)
class DrawupTransforms:
    """lambda, nu and the discounted reward N at one or more (d, u) points."""

    lam: np.ndarray
    nu: np.ndarray
    big_n: np.ndarray


def _check_state(a, b, d, u):
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(d < 0) or np.any(d > a):
        raise DomainError("initial drawdown d must lie in [0, a]")
    if np.any(u < 0) or np.any(u > b):
        raise DomainError("initial drawup u must lie in [0, b]")
    return np.broadcast_arrays(d, u)


def _immediate_fix(model, a, b, d, u, lam, nu):
    """Overwrite states where a trigger fires at time zero."""
    bm = isinstance(model, LinearBrownian)
    down_now = (d >= a) if bm else np.zeros_like(d, dtype=bool)
    up_now = (u >= b) & ~down_now
    lam = np.where(down_now, 0.0, np.where(up_now, 1.0, lam))
    nu = np.where(down_now, 1.0, np.where(up_now, 0.0, nu))
    return lam, nu


def lambda_nu_N_equal_levels(model, r: float, a: float, d, u, reward) -> DrawupTransforms:
    """lambda, nu and N when the drawup level equals the drawdown level a."""
    if r <= 0:
        raise UnsupportedConfigurationError("the equal-level formulas need r > 0")
    d, u = _check_state(a, a, d, u)
    phi, zeta, cb, cs = exp_coeffs(model, r)
    delta = phi - zeta
    y = a - d
    tail = math.exp(-delta * a)
    den = float(w_damped(model, r, a))
    # d + u >= a: plain two-sided exit from [d - a, a - u]
    span = np.maximum(2.0 * a - d - u, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_two = np.where(span > 0, w_ratio(model, r, y, span), 0.0)
        nu_two = exit_below(model, r, y, span)
    # d + u < a: the closed forms below are written with the e^{phi a} growth cancelled
    u_lo = np.minimum(u, y)
    g = cb * cs * np.exp(zeta * y) * ((phi / zeta - 1.0) + (zeta / phi - 1.0) * np.exp(-delta * d))
    z_u = (cb * np.exp(phi * (u_lo - a)) / phi + cs * np.exp(zeta * u_lo - phi * a) / zeta) / den
    lam_ref = -g * math.exp(-phi * a) / den**2 + (cb * phi + cs * zeta * tail) / den * z_u
    z_u_tail = r * (cb * np.exp(phi * u_lo - delta * a) / phi + cs * np.exp(zeta * u_lo - delta * a) / zeta)
    nu_ref = (-z_u_tail * cb * cs * delta**2 / (phi * zeta * den**2)
              + r * (cb / phi + cs * tail / zeta) / den * g / den)
    reflected = d + u < a
    lam = np.where(reflected, lam_ref, lam_two)
    nu = np.where(reflected, nu_ref, nu_two)
    lam, nu = _immediate_fix(model, a, a, d, u, lam, nu)
    xi_d = np.asarray(reward_transform(model, r, a, d, reward))
    xi_shift = np.asarray(reward_transform(model, r, a, np.maximum(d + u - a, 0.0), reward))
    big_n = xi_d - lam * xi_shift
    big_n = np.where(lam == 1.0, 0.0, big_n)
    return DrawupTransforms(_as_out(lam), _as_out(nu), _as_out(big_n))


def _bm_unequal_two_sided(model, r, a, b, d, u):
    """Regime d + u >= a: the path exits [d - a, b - u] before making a new extreme."""
    span = a + b - d - u
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(span > 0, w_ratio(model, r, a - d, span), 0.0)
        nu = np.where(span > 0, exit_below(model, r, a - d, span), 1.0)
    return lam, nu


def _bm_unequal_reflected(model, r, a, b, d, u):
    """Regime d + u < a, where the range D + U still has to grow before the drawdown can fire.

    The range s = d + u only grows at a new extreme.  On a line of constant
    s the values are two-sided exit combinations of the values at the
    running minimum and maximum, and the reflection conditions there give
    a linear ODE in s.  For Brownian motion it integrates in closed form.
    Each value below is a short sum of exponentials; the e^{phi b} growth
    shared by W and Z is divided out, so every exponent is non-positive.
    """
    phi, zeta, _, _ = exp_coeffs(model, r)
    delta = phi - zeta
    s = d + u
    q = math.exp(-delta * b)
    # decay rate of the value along the range; -zeta for a wide band
    kappa = (-zeta + phi * q) / (1.0 - q)
    decay = math.exp(-kappa * (a - b))
    # s >= b: only the value at the running minimum is unknown
    excursion = exit_below(model, r, u, b)
    above = np.exp(-kappa * (a - np.maximum(s, b)))
    lam_hi = w_ratio(model, r, u, b) + excursion * (1.0 - above) / float(scale_z(model, r, b))
    nu_hi = excursion * above
    # s < b: both reflecting ends are live
    s = np.minimum(s, b)
    ex = lambda x: np.exp(x)
    z_ratio = ex(phi * (u - b)) * (1.0 / phi - ex(-delta * u) / zeta) / (1.0 / phi - q / zeta)
    band = (-delta / phi * ex(phi * (u - s) - delta * b) + delta / zeta * ex(zeta * (u - s) - delta * b)
            - zeta / phi * ex(phi * (u - b) - delta * b) - phi / zeta * ex(zeta * (u - b) - delta * b)
            + ex(phi * (u - b)) + ex(zeta * u - phi * b - delta * b)) / (1.0 - q) ** 2
    lam_lo = z_ratio * (1.0 - decay) + decay * band
    kill = (delta * ex(phi * u - delta * b) / (phi**2 * zeta) - delta * ex(zeta * u - delta * b) / (phi * zeta**2)
            + ex(phi * (u - s) + zeta * b) / phi**2 - ex(zeta * (b + u - s)) / (phi * zeta)
            - ex(phi * (u - s - b) + 2.0 * zeta * b) / (phi * zeta) + ex(zeta * (2.0 * b - s + u) - phi * b) / zeta**2)
    nu_lo = -phi * zeta * decay * kill / (1.0 - q) ** 2
    low = d + u < b
    return np.where(low, lam_lo, lam_hi), np.where(low, nu_lo, nu_hi)


def lambda_nu_bm_unequal(model, r: float, a: float, b: float, d, u, reward=None) -> DrawupTransforms:
    """lambda, nu and N for Brownian motion with b < a and a constant reward."""
    if not isinstance(model, LinearBrownian):
        raise UnsupportedModelError("b < a has closed forms only for Brownian motion")
    if not b < a:
        raise DomainError("use lambda_nu_N_equal_levels when b = a")
    if r <= 0:
        raise UnsupportedConfigurationError("the drawup formulas need r > 0")
    if reward is not None and not isinstance(reward, ConstantReward):
        raise UnsupportedConfigurationError(
            "b < a is priced in closed form only for a constant reward; use the Monte Carlo estimator"
        )
    d, u = _check_state(a, b, d, u)
    lam2, nu2 = _bm_unequal_two_sided(model, r, a, b, d, u)
    lam1, nu1 = _bm_unequal_reflected(model, r, a, b, d, u)
    split = d + u >= a
    lam = np.where(split, lam2, lam1)
    nu = np.where(split, nu2, nu1)
    lam, nu = _immediate_fix(model, a, b, d, u, lam, nu)
    alpha = reward.alpha if reward is not None else 1.0
    return DrawupTransforms(_as_out(lam), _as_out(nu), _as_out(alpha * nu))


def drawup_transforms(model, contract: ContractSpec, reward, d=None, u=None) -> DrawupTransforms:
    """Dispatch to the closed form that covers the contract configuration."""
    if contract.b is None:
        raise DomainError("a drawup contract needs a drawup level b")
    d = contract.d if d is None else d
    u = contract.u if u is None else u
    a, b, r = contract.a, contract.b, contract.r
    if b == a:
        return lambda_nu_N_equal_levels(model, r, a, d, u, reward)
    if isinstance(model, LinearBrownian):
        return lambda_nu_bm_unequal(model, r, a, b, d, u, reward)
    raise UnsupportedConfigurationError(
        "b < a has no closed form for jump models; use the Monte Carlo estimator"
    )


def _require_rate(contract):
    if contract.r <= 0:
        raise UnsupportedConfigurationError("a perpetual premium needs a positive discount rate r")


def value_k_at(model, contract: ContractSpec, reward, d, u):
    """k(d, u, p) for arrays of starting states."""
    _require_rate(contract)
    p, r = contract.premium(), contract.r
    t = drawup_transforms(model, contract, reward, d, u)
    return _as_out((p / r) * (np.asarray(t.nu) + np.asarray(t.lam)) + np.asarray(t.big_n) - p / r)


def value_k(model, contract: ContractSpec, reward) -> float:
    """Value to the buyer of the drawdown contract with drawup contingency."""
    return float(value_k_at(model, contract, reward, contract.d, contract.u))


def fair_premium_drawup(model, contract: ContractSpec, reward) -> float:
    """p*(d, u) = r N / (1 - lambda - nu)."""
    _require_rate(contract)
    t = drawup_transforms(model, contract, reward)
    denom = 1.0 - float(t.lam) - float(t.nu)
    if denom < DEGENERATE_TOL:
        raise DegenerateContractError(
            f"1 - lambda - nu = {denom:.3g}: a trigger fires immediately and no fair premium exists"
        )
    return contract.r * float(t.big_n) / denom


def k_tilde_at(model, contract: ContractSpec, reward, penalty, d, u):
    """Stopping payoff k~(d, u, p) = -k(d, u, p) - c(d)."""
    p, r, a = contract.premium(), contract.r, contract.a
    return _as_out(-np.asarray(value_k_at(model, contract, reward, d, u)) - penalty_fee(penalty, d, p, r, a))


def k_tilde(model, contract: ContractSpec, reward, penalty) -> float:
    return float(k_tilde_at(model, contract, reward, penalty, contract.d, contract.u))


def _h_parts(contract: ContractSpec, theta):
    """Geometry of the stopping rule 'X rises to d - theta' for an array of thetas."""
    a, b, d, u = contract.a, contract.b, contract.d, contract.u
    theta = np.asarray(theta, dtype=float)
    up = d - theta  # distance X must climb
    room = a - np.maximum(up, d)  # how far X may fall below 0 before the drawdown fires
    lower = np.minimum(u, room)
    upper = np.minimum(b + theta - d, room)
    return theta, up, lower, upper


def h_surplus(model, contract: ContractSpec, reward, penalty, theta, points: int = 0):
    """Gain h_>(d, u, p, theta) from cancelling when X first reaches d - theta, for theta in (d+u-b, d].

    The first term covers paths that reach the level without a new
    minimum; the integral runs over the new minimum -y, with density
    d/dy [W(y) / W(d - theta + y)], up to the point where either the drawup
    or the drawdown would fire first.
    """
    b, d, u, r = contract.b, contract.d, contract.u, contract.r
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(theta_arr <= d + u - b) or np.any(theta_arr > d):
        raise DomainError(f"theta must lie in (d+u-b, d] = ({d + u - b}, {d}]")
    th, up, lower, upper = _h_parts(contract, theta_arr)
    th_pos = np.maximum(th, 0.0)
    out = np.empty_like(th)
    at_d = th >= d
    if np.any(at_d):
        out[at_d] = k_tilde_at(model, contract, reward, penalty, d, u)
    idx = np.flatnonzero(~at_d)
    if idx.size:
        th_i, up_i, lo_i, hi_i, thp = th[idx], up[idx], lower[idx], upper[idx], th_pos[idx]
        w = lambda x: scale_w(model, r, x)
        w1 = lambda x: scale_w(model, r, x, 1)
        first = np.asarray(k_tilde_at(model, contract, reward, penalty, thp, np.minimum(up_i + u, b)))
        first = first * w(lo_i) / w(up_i + lo_i)
        first = np.where(th_i > d + u - b, first, 0.0)

        span = np.maximum(hi_i - u, 0.0)

        def integrand(s):
            y = u + s * span
            dd = up_i + y
            wy, wdd = w(y), w(dd)
            dens = (w1(y) * wdd - wy * w1(dd)) / (wdd * wdd)
            kt = np.asarray(k_tilde_at(model, contract, reward, penalty, thp, np.minimum(dd, b)))
            return kt * dens * span

        integral, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-11, epsrel=1e-10, limit=200)
        out[idx] = first + np.where(span > 0, integral, 0.0)
    return _as_out(out if np.ndim(theta) else out[0])


def h_surplus_equal_levels_closed(model, contract: ContractSpec, reward, penalty, theta) -> float:
    """h_> for b = a with the integral done by parts (cross-check of ``h_surplus``).

    Only valid for penalties that do not depend on the drawup, which is
    the case for every supported family.
    """
    a, d, u, r, p = contract.a, contract.d, contract.u, contract.r, contract.premium()
    if contract.b != a:
        raise DomainError("the integrated form needs b = a")
    theta = float(theta)
    if not d + u - a < theta < d:
        raise DomainError("theta must lie in (d+u-a, d)")
    th_pos = max(theta, 0.0)
    room = a - max(d - theta, d)
    w = lambda x: float(scale_w(model, r, x))
    if d + u >= a or room <= u:
        lo = min(u, room)
        kt = float(k_tilde_at(model, contract, reward, penalty, th_pos, min(d - theta + u, a)))
        return kt * w(lo) / w(d - theta + lo)
    w_a = w(a)
    slope = float(scale_w(model, r, a, 1)) / (w_a * w_a)
    xi0 = float(reward_transform(model, r, a, 0.0, reward))
    z_a = float(scale_z(model, r, a))
    kt_end = float(k_tilde_at(model, contract, reward, penalty, th_pos, min(d - theta + room, a)))
    coef = xi0 * slope + (p / r) * z_a * slope - (p / r) * slope - p
    dz = float(scale_z(model, r, room)) - float(scale_z(model, r, u))
    return kt_end * w(room) / w(d - theta + room) - coef * dz / r


@dataclass(frozen=True)
class DrawupThreshold:
    """theta*(d, u); ``stop_now`` means theta* = d (cancel immediately)."""

    theta_star: Optional[float]
    stop_now: bool
    surplus: float


def find_theta_star_drawup(model, contract: ContractSpec, reward, penalty,
                           points: int = 4000) -> DrawupThreshold:
    """Smallest maximizer of h_> over (d+u-b, d]; None when no stopping rule has positive value."""
    b, d, u = contract.b, contract.d, contract.u
    lo = d + u - b
    eps = 1e-6 * max(b, 1.0)
    best = maximize_on_grid(
        lambda th: h_surplus(model, contract, reward, penalty, th),
        lo + eps, d, points,
    )
    if not best.value > 0:
        return DrawupThreshold(None, False, best.value)
    stop_now = best.at_upper
    return DrawupThreshold(d if stop_now else best.x, stop_now, best.value)


def value_K(model, contract: ContractSpec, reward, penalty, with_conditions: bool = True,
            grid_points: int = 60) -> QuoteResult:
    """Value of the cancellable contract with drawup contingency, K = k + H."""
    _require_rate(contract)
    check_penalty(penalty, contract.premium(), contract.r, contract.a)
    k = value_k(model, contract, reward)
    if contract.u >= contract.b or (isinstance(model, LinearBrownian) and contract.d >= contract.a):
        return QuoteResult(value=k, theta_star=None, flags=("expired",))
    search = find_theta_star_drawup(model, contract, reward, penalty)
    flags = []
    if search.theta_star is None:
        h = 0.0
        flags.append("no-early-termination")
    elif search.stop_now:
        h = max(0.0, k_tilde(model, contract, reward, penalty))
        flags.append("stop-immediately")
    else:
        h = max(0.0, float(h_surplus(model, contract, reward, penalty, search.theta_star)))
    conditions = {}
    if with_conditions:
        conditions = check_conditions_drawup(model, contract, reward, penalty, search.theta_star,
                                             grid_points=grid_points)
        fit = conditions.get("smooth_fit")
        if fit is not None and not fit.holds:
            flags.append("unverified-fit")
    try:
        premium = fair_premium_drawup(model, contract, reward)
    except DegenerateContractError:
        premium = None
    return QuoteResult(value=k + h, fair_premium=premium, theta_star=search.theta_star,
                       conditions=conditions, flags=tuple(flags))


def _k_tilde_extended(model, contract, reward, penalty, d: float, u: float) -> float:
    """k~ on d >= 0: past a the drawdown has fired, the buyer receives alpha(d) and owes no fee."""
    if d > contract.a:
        return -float(reward(d))
    return float(k_tilde_at(model, contract, reward, penalty, d, u))


def jump_stop_integral_drawup(model, contract, reward, penalty, theta_star: float, d: float) -> float:
    """int_{((theta* - d)^+, inf)} k~(d + z, (u - z) v 0, p) Pi(-dz) at the contract's u."""
    if isinstance(model, LinearBrownian):
        return 0.0
    a, u = contract.a, contract.u
    lo = max(theta_star - d, 0.0)
    tail = lo - math.log(1e-14) / model.rho
    f = lambda z: _k_tilde_extended(model, contract, reward, penalty, d + z, max(u - z, 0.0)) * \
        float(levy_density(model, z))
    pts = sorted({x for x in (a - d, u) if lo < x < tail}) or None
    val, _ = integrate.quad(f, lo, tail, points=pts, epsabs=1e-10, epsrel=1e-10, limit=400)
    return val


REQUIRED_CONDITIONS = ("war1_region", "war2", "assum_additional2", "continuous_fit", "smooth_fit")


def check_conditions_drawup(model, contract: ContractSpec, reward, penalty,
                            theta_star: Optional[float], grid_points: int = 60,
                            tol: float = 1e-9, fit_tol: float = 1e-3) -> dict:
    """Grid checks of war1 (globally and on [0, theta*)), war2, assum_additional2, continuous and smooth fit."""
    p, a, b, d, u = contract.premium(), contract.a, contract.b, contract.d, contract.u
    out = {}
    grid = np.linspace(0.0, a, grid_points, endpoint=False)
    gen = np.array([penalty_generator(model, contract.with_(b=None, u=0.0), penalty, float(x)) for x in grid])
    m = float(np.min(gen + p))
    out["war1"] = ConditionCheck(m >= -tol, m, "min over d of generator(c) + p")
    out["war1_region"] = _war1_on_region(gen + p, grid, theta_star, tol)

    dg = np.linspace(0.0, d, 41)
    ug = np.linspace(u, b, 41)
    dd, uu = np.meshgrid(dg, ug)
    kt = np.asarray(k_tilde_at(model, contract, reward, penalty, dd.ravel(), uu.ravel()))
    mx = float(np.max(kt))
    out["war2"] = ConditionCheck(mx > 0, mx, "max of k~ over d0 <= d, u0 >= u")

    if isinstance(model, LinearBrownian):
        out["assum_additional2"] = ConditionCheck(True, 0.0, "no jumps: holds trivially")
    elif theta_star is None or theta_star <= 0:
        out["assum_additional2"] = ConditionCheck(True, 0.0, "empty stopping region in [0, theta*)")
    else:
        ds = np.linspace(0.0, theta_star, grid_points, endpoint=False)
        vals = [jump_stop_integral_drawup(model, contract, reward, penalty, theta_star, float(x)) for x in ds]
        mv = float(np.min(vals))
        out["assum_additional2"] = ConditionCheck(mv >= -tol, mv, "min over d < theta* of the jump integral")

    if theta_star is None or theta_star >= d:
        out["continuous_fit"] = ConditionCheck(True, 0.0, "no interior stopping boundary")
        out["smooth_fit"] = ConditionCheck(True, 0.0, "no interior stopping boundary")
        return out

    # continuous fit: h_>(theta -> d) = k~(d, u), limit taken by Richardson extrapolation
    delta = 1e-7 * max(a, 1.0)
    h1 = float(h_surplus(model, contract, reward, penalty, d - delta))
    h2 = float(h_surplus(model, contract, reward, penalty, d - 2 * delta))
    gap = abs(2 * h1 - h2 - float(k_tilde_at(model, contract, reward, penalty, d, u)))
    out["continuous_fit"] = ConditionCheck(gap <= 1e-8, 1e-8 - gap, "|h_>(theta -> d) - k~(d, u)|")

    if isinstance(model, CramerLundberg):
        out["smooth_fit"] = ConditionCheck(True, 0.0, "not required without a Gaussian part")
        return out
    # smooth fit at d = theta* along d + u = const, the direction the state moves while X rises
    th = theta_star
    total = d + u
    h = 1e-4 * a
    if th - 2 * h < 0 or th + 2 * h > a or total - th - 2 * h < 0 or total - th + 2 * h > b:
        out["smooth_fit"] = ConditionCheck(True, 0.0, "boundary too close to the edge of the state space")
        return out
    right = [float(h_surplus(model, contract.with_(d=th + k * h, u=total - th - k * h), reward, penalty, th))
             for k in (1, 2)]
    left = [float(k_tilde_at(model, contract, reward, penalty, th - k * h, total - th + k * h)) for k in (0, 1, 2)]
    d_right = (-3 * left[0] + 4 * right[0] - right[1]) / (2 * h)
    d_left = (3 * left[0] - 4 * left[1] + left[2]) / (2 * h)
    rel = abs(d_right - d_left) / max(abs(d_left), 1e-12)
    out["smooth_fit"] = ConditionCheck(rel <= fit_tol, fit_tol - rel, "relative gap of one-sided derivatives")
    return out
