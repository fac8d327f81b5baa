"""Drawdown insurance: plain contract value, fair premium and the cancellable version.

The buyer pays premium p continuously and receives alpha(D) when the
drawdown first exceeds a.  With value f(d, p) = (p/r) xi(d) - p/r + Xi(d),

* xi(d) = E_d[exp(-r tau)] is the discounted trigger time transform, and
* Xi(d) = E_d[exp(-r tau) alpha(D_tau)] is the discounted reward.

In the cancellable version the buyer may stop at any time by paying the
fee c(D).  The optimal rule stops when the drawdown falls below a level
theta* that does not depend on the starting drawdown.
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
    ContractSpec,
    QuoteResult,
    check_penalty,
    penalty_fee,
)
from .errors import DegenerateContractError, DomainError, UnsupportedConfigurationError
from .levy_models import CramerLundberg, LinearBrownian, exp_coeffs, levy_density, scale_w, scale_z

DEGENERATE_TOL = 1e-12


def _as_out(x):
    x = np.asarray(x, dtype=float)
    return x[()] if x.ndim == 0 else x


def _check_d(a: float, d) -> np.ndarray:
    d_arr = np.asarray(d, dtype=float)
    if not a > 0:
        raise DomainError(f"drawdown level a must be positive, got {a}")
    if np.any(d_arr < 0) or np.any(d_arr > a):
        raise DomainError("initial drawdown d must lie in [0, a]")
    return d_arr


def xi(model, r: float, a: float, d):
    """E_d[exp(-r tau)] for tau the first time the drawdown exceeds a."""
    d_arr = _check_d(a, d)
    y = a - d_arr
    if r == 0:
        w_a = scale_w(model, r, a)
        w1_a = scale_w(model, r, a, 1)
        return _as_out(scale_z(model, r, y) - r * scale_w(model, r, y) * w_a / w1_a)
    # Z(y) - r W(y) W(a)/W'(a) with the e^{phi (y + a)} terms cancelled by hand
    phi, zeta, cb, cs = exp_coeffs(model, r)
    delta = phi - zeta
    num = r * cb * cs * np.exp(zeta * y) * ((phi / zeta - 1.0) + (zeta / phi - 1.0) * np.exp(-delta * d_arr))
    # a discounted probability; clip the last-bit rounding at d = a
    return _as_out(np.clip(num / (cb * phi + cs * zeta * math.exp(-delta * a)), 0.0, 1.0))


def overshoot_mean_reward(model, a: float, reward) -> float:
    """E[alpha(a + e)] with e ~ Exponential(rho), the mean reward after a claim overshoot."""
    return reward.exp_shift_mean(a, model.rho)


def reward_transform(model, r: float, a: float, d, reward):
    """E_d[exp(-r tau) alpha(D_tau)] in closed form.

    Brownian paths creep, so the drawdown at the trigger is exactly a.
    For Cramer-Lundberg the overshoot is Exponential(rho) and independent
    of the trigger time, which gives E[alpha(a + e)] * xi(d).
    """
    d_arr = _check_d(a, d)
    if isinstance(model, LinearBrownian):
        y = a - d_arr
        if r == 0:
            w1_a = scale_w(model, r, a, 1)
            w2_a = scale_w(model, r, a, 2)
            bracket = scale_w(model, r, y, 1) - scale_w(model, r, y) * w2_a / w1_a
        else:
            # W'(y) - W(y) W''(a)/W'(a), cancelled as in xi
            phi, zeta, cb, cs = exp_coeffs(model, r)
            delta = phi - zeta
            bracket = (cb * cs * delta * np.exp(zeta * np.maximum(y, 0.0)) * (zeta * np.exp(-delta * d_arr) - phi)
                       / (cb * phi + cs * zeta * math.exp(-delta * a)))
        out = float(reward(a)) * 0.5 * model.sigma**2 * bracket
        return _as_out(np.where(y <= 0, float(reward(a)), out))
    return _as_out(overshoot_mean_reward(model, a, reward) * np.asarray(xi(model, r, a, d_arr)))


def _overshoot_weight_quad(model, a: float, reward) -> float:
    """int_0^inf alpha(a + h) rho exp(-rho h) dh by quadrature."""
    upper = 200.0 / model.rho
    val, _ = integrate.quad(lambda h: float(reward(a + h)) * model.rho * math.exp(-model.rho * h),
                            0.0, upper, epsabs=1e-11, epsrel=1e-11, limit=400)
    return val


def reward_transform_by_quadrature(model, r: float, a: float, d: float, reward,
                                   route: str = "trigger") -> float:
    """Reward transform from its Levy-measure integral representations.

    ``route="trigger"`` integrates the kernel
    W(a-d) W'(a-z)/W'(a) - W(a-d-z) against the jump measure.
    ``route="first_exit"`` splits the path at the first new maximum:
    the reward collected before X returns to its starting maximum, plus
    W(a-d)/W(a) times the reward transform from zero drawdown.
    Both are evaluated independently of the closed form and must agree
    with it.  For Cramer-Lundberg, W jumps from 0 to 1/mu_hat at the
    origin, so W'(a - z) carries a point mass W(0) at z = a; the kernels
    below include it as ``atom``.
    """
    _check_d(a, d)
    alpha_a = float(reward(a))
    w = lambda x: float(scale_w(model, r, x))
    w1 = lambda x: float(scale_w(model, r, x, 1))
    w2_a = float(scale_w(model, r, a, 2))
    w_a, w1_a = w(a), w1(a)
    s2 = model.sigma**2 if isinstance(model, LinearBrownian) else 0.0

    def jump_part(kernel, atom: float = 0.0) -> float:
        if isinstance(model, LinearBrownian):
            return 0.0
        # Pi(-z - dh) = beta rho exp(-rho (z + h)) dh
        weight = _overshoot_weight_quad(model, a, reward) * model.beta
        pts = [a - d] if 0 < a - d < a else None
        val, _ = integrate.quad(lambda z: math.exp(-model.rho * z) * kernel(z), 0.0, a,
                                points=pts, epsabs=1e-13, epsrel=1e-12, limit=400)
        return weight * (val + math.exp(-model.rho * a) * atom)

    y = a - d
    if route == "trigger":
        creep = alpha_a * 0.5 * s2 * (w1(y) - w(y) * w2_a / w1_a) if y > 0 else alpha_a * (s2 > 0)
        return creep + jump_part(lambda z: w(y) * w1(a - z) / w1_a - w(y - z), w(y) * w(0.0) / w1_a)
    if route == "first_exit":
        if y <= 0 and s2 > 0:
            return alpha_a
        creep_x = alpha_a * 0.5 * s2 * (w1(y) - w(y) * w1_a / w_a) if y > 0 else 0.0
        before = creep_x + jump_part(lambda z: w(y) * w(a - z) / w_a - w(y - z))
        creep_0 = alpha_a * 0.5 * s2 * (w1_a - w2_a * w_a / w1_a)
        from_zero = creep_0 + jump_part(lambda z: w1(a - z) * w_a / w1_a - w(a - z), w(0.0) * w_a / w1_a)
        return before + w(y) / w_a * from_zero
    raise DomainError(f"unknown route {route!r}")


def _require_rate(contract: ContractSpec) -> None:
    if contract.r <= 0:
        raise UnsupportedConfigurationError(
            "a perpetual premium needs a positive discount rate r"
        )


def _reject_drawup(contract: ContractSpec) -> None:
    if contract.b is not None:
        raise DomainError("drawdown pricing takes a contract without a drawup level b")


def value_f_at(model, contract: ContractSpec, reward, d):
    """f(d, p) for an array of starting drawdowns (the contract's own d is ignored)."""
    _reject_drawup(contract)
    _require_rate(contract)
    p, r, a = contract.premium(), contract.r, contract.a
    x = np.asarray(xi(model, r, a, d))
    big_xi = np.asarray(reward_transform(model, r, a, d, reward))
    return _as_out((p / r) * x - p / r + big_xi)


def value_f(model, contract: ContractSpec, reward) -> float:
    """Value to the buyer of the plain drawdown contract."""
    return float(value_f_at(model, contract, reward, contract.d))


def fair_premium(model, contract: ContractSpec, reward) -> float:
    """Premium rate p* = r Xi(d) / (1 - xi(d)) that makes the contract worth zero at inception."""
    _reject_drawup(contract)
    _require_rate(contract)
    r, a, d = contract.r, contract.a, contract.d
    denom = 1.0 - float(xi(model, r, a, d))
    if denom < DEGENERATE_TOL:
        raise DegenerateContractError(
            f"1 - xi(d) = {denom:.3g}: the drawdown triggers immediately and no fair premium exists"
        )
    return r * float(reward_transform(model, r, a, d, reward)) / denom


def f_tilde_at(model, contract: ContractSpec, reward, penalty, d):
    """Stopping payoff f~(d, p) = -f(d, p) - c(d) for an array of drawdowns."""
    p, r, a = contract.premium(), contract.r, contract.a
    return _as_out(-np.asarray(value_f_at(model, contract, reward, d))
                   - penalty_fee(penalty, d, p, r, a))


def f_tilde(model, contract: ContractSpec, reward, penalty) -> float:
    """f~(d, p) at the contract's starting drawdown."""
    return float(f_tilde_at(model, contract, reward, penalty, contract.d))


def _check_theta(a: float, theta) -> None:
    th = np.asarray(theta, dtype=float)
    if np.any(th <= 0) or np.any(th >= a):
        raise DomainError("threshold theta must lie in (0, a)")


def threshold_criterion(model, contract: ContractSpec, reward, penalty, theta):
    """B(theta) = f~(theta, p) / W(a - theta); g_>(d, theta) = B(theta) W(a - d)."""
    theta = np.asarray(theta, dtype=float)
    ft = np.asarray(f_tilde_at(model, contract, reward, penalty, theta))
    return _as_out(ft / scale_w(model, contract.r, contract.a - theta))


def g_surplus(model, contract: ContractSpec, reward, penalty, theta: float, d=None):
    """Gain over the plain contract from cancelling when the drawdown falls below theta.

    Equals f~(theta) W(a - d) / W(a - theta) for d > theta and f~(d) for d <= theta.
    """
    _check_theta(contract.a, theta)
    d = contract.d if d is None else d
    d_arr = _check_d(contract.a, d)
    above = np.asarray(threshold_criterion(model, contract, reward, penalty, theta)) * \
        scale_w(model, contract.r, contract.a - d_arr)
    below = np.asarray(f_tilde_at(model, contract, reward, penalty, np.minimum(d_arr, theta)))
    return _as_out(np.where(d_arr > theta, above, below))


@dataclass(frozen=True)
class ThresholdResult:
    """Outcome of the optimal-threshold search.

    ``theta_star`` is None when stopping is never profitable.
    ``foc_residual`` is B'(theta*) scaled by 1/(1 + |B(theta*)|).
    """

    theta_star: Optional[float]
    interior: bool
    criterion: float
    foc_residual: float


def find_theta_star(model, contract: ContractSpec, reward, penalty,
                    points: int = 10_000) -> ThresholdResult:
    """Maximize B(theta) over (eps, a - eps) with eps = 1e-6 a."""
    a = contract.a
    eps = 1e-6 * a

    def crit(th):
        return threshold_criterion(model, contract, reward, penalty, th)

    best = maximize_on_grid(crit, eps, a - eps, points)
    if not best.value > 0:
        return ThresholdResult(None, False, best.value, 0.0)
    h = 1e-6 * a
    th = min(max(best.x, eps + h), a - eps - h)
    slope = (float(crit(th + h)) - float(crit(th - h))) / (2 * h)
    interior = not (best.at_lower or best.at_upper)
    return ThresholdResult(best.x, interior, best.value, slope / (1.0 + abs(best.value)))


def _surplus_value(model, contract, reward, penalty, theta, d) -> np.ndarray:
    """G(d) = max(0, g_>(d, theta)) with the immediate-stop branch for d <= theta."""
    if theta is None:
        return np.zeros_like(np.asarray(d, dtype=float))
    return np.maximum(0.0, np.asarray(g_surplus(model, contract, reward, penalty, theta, d)))


def value_F(model, contract: ContractSpec, reward, penalty, with_conditions: bool = True,
            grid_points: int = 200) -> QuoteResult:
    """Value of the cancellable drawdown contract, F = f + G."""
    _reject_drawup(contract)
    _require_rate(contract)
    check_penalty(penalty, contract.premium(), contract.r, contract.a)
    search = find_theta_star(model, contract, reward, penalty)
    f = value_f(model, contract, reward)
    g = float(_surplus_value(model, contract, reward, penalty, search.theta_star, contract.d))
    conditions = {}
    flags = []
    if search.theta_star is None:
        flags.append("no-early-termination")
    if with_conditions:
        conditions = check_conditions_drawdown(model, contract, reward, penalty, search.theta_star,
                                               grid_points=grid_points)
    try:
        premium = fair_premium(model, contract, reward)
    except DegenerateContractError:
        premium = None
    return QuoteResult(value=f + g, fair_premium=premium, theta_star=search.theta_star,
                       conditions=conditions, flags=tuple(flags))


# --- optimality conditions -------------------------------------------------


def compensated_drift(model) -> float:
    """Drift mu in the Levy-Khintchine form with small-jump compensation on (0, 1)."""
    if isinstance(model, LinearBrownian):
        return model.mu
    b, rho = model.beta, model.rho
    # int_0^1 z beta rho exp(-rho z) dz
    small_jump_mean = b * (1.0 - math.exp(-rho) * (1.0 + rho)) / rho
    return model.mu_hat - small_jump_mean


def penalty_generator(model, contract: ContractSpec, penalty, d: float,
                      compensated: bool = True) -> float:
    """-r c - mu c' + sigma^2/2 c'' + int (c(d+z) - c(d) - z c'(d) 1{z<1}) Pi(-dz) at d < a.

    With ``compensated=False`` the same quantity is computed from the
    uncompensated form -r c - mu_hat c' + int (c(d+z) - c(d)) Pi(-dz).
    """
    p, r, a = contract.premium(), contract.r, contract.a
    c0 = float(penalty_fee(penalty, d, p, r, a))
    c1 = float(penalty_fee(penalty, d, p, r, a, 1))
    c2 = float(penalty_fee(penalty, d, p, r, a, 2))
    if isinstance(model, LinearBrownian):
        return -r * c0 - model.mu * c1 + 0.5 * model.sigma**2 * c2
    dens = lambda z: float(levy_density(model, z))
    cz = lambda z: float(penalty_fee(penalty, d + z, p, r, a))
    tail = -math.log(1e-12) / model.rho
    brk = [a - d] if 0 < a - d < tail else None
    if compensated:
        integrand = lambda z: (cz(z) - c0 - (z * c1 if z < 1 else 0.0)) * dens(z)
        pts = sorted(set((brk or []) + [1.0]))
        jump, _ = integrate.quad(integrand, 0.0, tail, points=pts, epsabs=1e-10, epsrel=1e-10, limit=400)
        return -r * c0 - compensated_drift(model) * c1 + jump
    integrand = lambda z: (cz(z) - c0) * dens(z)
    jump, _ = integrate.quad(integrand, 0.0, tail, points=brk, epsabs=1e-10, epsrel=1e-10, limit=400)
    return -r * c0 - model.mu_hat * c1 + jump


def _f_tilde_extended(model, contract, reward, penalty, x: float) -> float:
    """f~ on [0, inf): beyond a the contract pays alpha(x) at once and no fee is due."""
    if x > contract.a:
        return -float(reward(x))
    return float(f_tilde_at(model, contract, reward, penalty, x))


def jump_stop_integral(model, contract, reward, penalty, theta_star: float, d: float) -> float:
    """int_{(theta* - d, inf)} f~(d + z, p) Pi(-dz) for d < theta*."""
    if isinstance(model, LinearBrownian):
        return 0.0
    a = contract.a
    lo = theta_star - d
    tail = lo - math.log(1e-14) / model.rho
    integrand = lambda z: _f_tilde_extended(model, contract, reward, penalty, d + z) * float(levy_density(model, z))
    pts = [a - d] if lo < a - d < tail else None
    val, _ = integrate.quad(integrand, lo, tail, points=pts, epsabs=1e-10, epsrel=1e-10, limit=400)
    return val


REQUIRED_CONDITIONS = ("war1_region", "mainzalozenia", "assum_additional", "continuous_fit", "smooth_fit")


def _war1_on_region(margins: np.ndarray, grid: np.ndarray, theta_star: Optional[float],
                    tol: float) -> ConditionCheck:
    inside = grid < theta_star if theta_star is not None else np.zeros_like(grid, dtype=bool)
    if not np.any(inside):
        return ConditionCheck(True, 0.0, "empty stopping region")
    m = float(np.min(margins[inside]))
    return ConditionCheck(m >= -tol, m, "min over d < theta* of generator(c) + p")


def check_conditions_drawdown(model, contract: ContractSpec, reward, penalty,
                              theta_star: Optional[float], grid_points: int = 200,
                              tol: float = 1e-9) -> dict:
    """Evaluate the sufficient optimality conditions on a grid of drawdowns.

    Returns a dict of ConditionCheck keyed war1, war1_region,
    assum_additional, mainzalozenia, continuous_fit, smooth_fit.  Margins
    are signed so that a non-negative margin means the condition holds.
    war1 is checked on all of [0, a); war1_region only on the stopping
    region [0, theta*), which is where the verification argument uses it.
    """
    p, a = contract.premium(), contract.a
    out = {}

    grid = np.linspace(0.0, a, grid_points, endpoint=False)
    gen = np.array([penalty_generator(model, contract, penalty, float(d)) for d in grid])
    margin = float(np.min(gen + p))
    out["war1"] = ConditionCheck(margin >= -tol, margin, "min over d of generator(c) + p")
    out["war1_region"] = _war1_on_region(gen + p, grid, theta_star, tol)

    ft = np.asarray(f_tilde_at(model, contract, reward, penalty, np.linspace(0.0, a, 10 * grid_points)))
    mx = float(np.max(ft))
    out["mainzalozenia"] = ConditionCheck(mx > 0, mx, "max over d of f~(d, p)")

    if isinstance(model, LinearBrownian):
        out["assum_additional"] = ConditionCheck(True, 0.0, "no jumps: holds trivially")
    elif theta_star is None:
        out["assum_additional"] = ConditionCheck(True, 0.0, "no stopping region")
    else:
        ds = np.linspace(0.0, theta_star, grid_points, endpoint=False)
        vals = [jump_stop_integral(model, contract, reward, penalty, theta_star, float(d)) for d in ds]
        m = float(np.min(vals))
        out["assum_additional"] = ConditionCheck(m >= -tol, m, "min over d < theta* of the jump integral")

    if theta_star is None:
        out["continuous_fit"] = ConditionCheck(True, 0.0, "no stopping boundary")
        out["smooth_fit"] = ConditionCheck(True, 0.0, "no stopping boundary")
        return out

    th = theta_star
    delta = 1e-11 * a
    g_right = float(g_surplus(model, contract, reward, penalty, th, min(th + delta, a)))
    f_at = float(f_tilde_at(model, contract, reward, penalty, th))
    gap = abs(g_right - f_at)
    out["continuous_fit"] = ConditionCheck(gap <= 1e-8, 1e-8 - gap, "|g_>(theta*+) - f~(theta*)|")

    if isinstance(model, CramerLundberg):
        out["smooth_fit"] = ConditionCheck(True, 0.0, "not required without a Gaussian part")
        return out
    h = 1e-6 * a
    dg = (float(g_surplus(model, contract, reward, penalty, th, th + h)) - f_at) / h
    df = (f_at - float(f_tilde_at(model, contract, reward, penalty, th - h))) / h
    rel = abs(dg - df) / max(abs(df), 1e-300)
    out["smooth_fit"] = ConditionCheck(rel <= 1e-3, 1e-3 - rel, "relative gap of one-sided derivatives")
    return out


def domination_margin(model, contract, reward, penalty, theta_star, points: int = 500) -> float:
    """min over a grid of d of G(d) - f~(d); non-negative when stopping at theta* dominates."""
    d = np.linspace(0.0, contract.a, points)
    if theta_star is None:
        g = np.zeros_like(d)
    else:
        g = np.asarray(g_surplus(model, contract, reward, penalty, theta_star, d))
    ft = np.asarray(f_tilde_at(model, contract, reward, penalty, d))
    return float(np.min(g - ft))
