"""Spectrally negative Levy models and their scale functions.

Two models are supported, both with closed-form scale functions:

* ``LinearBrownian``: X_t = mu*t + sigma*B_t.
* ``CramerLundberg``: X_t = mu_hat*t - (compound Poisson sum of
  Exponential(rho) jumps arriving at rate beta).

For either model the equation psi(phi) = r has two real roots
zeta <= Phi(r), and the r-scale function is the two-exponential sum

    W(x) = exp(Phi x) / psi'(Phi) + exp(zeta x) / psi'(zeta),   x >= 0.

Internally W is evaluated as exp(zeta x) * (A * E(x) + B) with
E(x) = expm1(delta x) / delta and delta = Phi - zeta, which stays accurate
when the two roots merge (driftless Brownian motion or a zero-mean
Cramer-Lundberg process at r = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import integrate

from .errors import DomainError, UnsupportedModelError


@dataclass(frozen=True)
class LinearBrownian:
    """Brownian motion with drift ``mu`` and volatility ``sigma``."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise DomainError("LinearBrownian parameters must be finite")
        if self.sigma <= 0:
            raise DomainError(f"LinearBrownian requires sigma > 0, got {self.sigma}")


@dataclass(frozen=True)
class CramerLundberg:
    """Premium rate ``mu_hat`` minus compound Poisson Exponential(``rho``) claims at rate ``beta``."""

    mu_hat: float
    beta: float
    rho: float

    def __post_init__(self):
        for name in ("mu_hat", "beta", "rho"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise DomainError(f"CramerLundberg requires {name} > 0, got {value}")


ModelSpec = Union[LinearBrownian, CramerLundberg]


@dataclass(frozen=True)
class ScaleParams:
    """Root data behind the closed-form scale functions at a fixed rate r.

    ``phi_r`` and ``zeta`` are the two roots of psi(phi) = r with
    zeta <= phi_r.  ``bm_rate`` is sqrt(mu^2 + 2 r sigma^2) / sigma^2 for
    Brownian motion (half the root gap) and NaN otherwise.  ``amp`` and
    ``offset`` are the coefficients A and B of the representation
    W(x) = exp(zeta x) * (A * expm1(delta x)/delta + B).
    """

    phi_r: float
    zeta: float
    bm_rate: float
    amp: float
    offset: float
    r: float

    @property
    def delta(self) -> float:
        return self.phi_r - self.zeta


def _check_model(model) -> None:
    if not isinstance(model, (LinearBrownian, CramerLundberg)):
        raise UnsupportedModelError(f"unsupported model type {type(model).__name__}")


def psi(model: ModelSpec, phi):
    """Laplace exponent on its full domain (phi > -rho for Cramer-Lundberg)."""
    phi = np.asarray(phi, dtype=float)
    if isinstance(model, LinearBrownian):
        out = phi * (model.mu + 0.5 * model.sigma**2 * phi)
    else:
        out = phi * (model.mu_hat - model.beta / (model.rho + phi))
    return out[()] if out.ndim == 0 else out


def psi_prime(model: ModelSpec, phi):
    """First derivative of the Laplace exponent."""
    phi = np.asarray(phi, dtype=float)
    if isinstance(model, LinearBrownian):
        out = model.mu + model.sigma**2 * phi
    else:
        out = model.mu_hat - model.beta * model.rho / (model.rho + phi) ** 2
    return out[()] if out.ndim == 0 else out


def laplace_exponent(model: ModelSpec, phi):
    """psi(phi) = log E[exp(phi X_1)] for phi >= 0."""
    _check_model(model)
    if np.any(np.asarray(phi) < 0):
        raise DomainError("laplace_exponent requires phi >= 0")
    return psi(model, phi)


def _psi_argmin(model: ModelSpec) -> float:
    if isinstance(model, LinearBrownian):
        return -model.mu / model.sigma**2
    return math.sqrt(model.beta * model.rho / model.mu_hat) - model.rho


def _closed_form_roots(model: ModelSpec, r: float) -> tuple[float, float]:
    """Both roots of psi(phi) = r from the quadratic formula, in stable form."""
    if isinstance(model, LinearBrownian):
        mu, s2 = model.mu, model.sigma**2
        disc = math.sqrt(mu * mu + 2.0 * r * s2)
        if mu > 0:
            big = 2.0 * r / (mu + disc)
        else:
            big = (-mu + disc) / s2
        small = -2.0 * mu / s2 - big
        if big > 0 and mu < 0:
            small = -2.0 * r / (s2 * big)
        return big, small
    # mu_hat phi^2 + (mu_hat rho - beta - r) phi - r rho = 0
    m, beta, rho = model.mu_hat, model.beta, model.rho
    bq = m * rho - beta - r
    disc = math.sqrt(bq * bq + 4.0 * m * r * rho)
    if bq > 0:
        big = 2.0 * r * rho / (disc + bq)
    else:
        big = (-bq + disc) / (2.0 * m)
    if big > 0:
        small = -r * rho / (m * big)
    else:
        small = (-bq - disc) / (2.0 * m)
    return big, small


def _newton_polish(model: ModelSpec, r: float, phi: float, lo: float) -> float:
    """A few safeguarded Newton steps on psi(phi) - r that never leave [lo, inf)."""
    best, best_res = phi, abs(float(psi(model, phi)) - r)
    x = phi
    for _ in range(4):
        slope = float(psi_prime(model, x))
        if slope <= 0:
            break
        step = (float(psi(model, x)) - r) / slope
        x_new = x - step
        if x_new < lo:
            x_new = 0.5 * (x + lo)
        res = abs(float(psi(model, x_new)) - r)
        if res < best_res:
            best, best_res = x_new, res
        if res == 0.0 or x_new == x:
            break
        x = x_new
    return best


def phi_inverse(model: ModelSpec, r: float) -> float:
    """Right-inverse Phi(r) = sup{phi >= 0 : psi(phi) = r}."""
    _check_model(model)
    if not (r >= 0 and math.isfinite(r)):
        raise DomainError(f"phi_inverse requires r >= 0, got {r}")
    return scale_params(model, r).phi_r


@lru_cache(maxsize=512)
def scale_params(model: ModelSpec, r: float) -> ScaleParams:
    """Roots and representation coefficients of W at rate r (cached)."""
    _check_model(model)
    r = float(r)
    if not (r >= 0 and math.isfinite(r)):
        raise DomainError(f"discount rate must be >= 0, got {r}")
    big, small = _closed_form_roots(model, r)
    lo = max(_psi_argmin(model), 0.0)
    if big > lo:
        big = _newton_polish(model, r, big, lo)
    if isinstance(model, LinearBrownian):
        s2 = model.sigma**2
        bm_rate = math.sqrt(model.mu**2 + 2.0 * r * s2) / s2
        amp, offset = 2.0 / s2, 0.0
    else:
        bm_rate = float("nan")
        amp = (model.rho + big) / model.mu_hat
        offset = 1.0 / model.mu_hat
    return ScaleParams(phi_r=big, zeta=small, bm_rate=bm_rate, amp=amp, offset=offset, r=r)


def _expm1_ratio(delta: float, x):
    """expm1(delta*x)/delta with the x limit at delta = 0."""
    if delta == 0.0:
        return np.array(x, dtype=float)
    return np.expm1(delta * x) / delta


def scale_w(model: ModelSpec, r: float, x, deriv: int = 0):
    """r-scale function W (deriv=0) or its first/second derivative.

    W and its derivatives are taken to be 0 for x < 0.  At x = 0 the
    derivatives are right derivatives.
    """
    if deriv not in (0, 1, 2):
        raise DomainError(f"deriv must be 0, 1 or 2, got {deriv}")
    sp = scale_params(model, r)
    x_arr = np.asarray(x, dtype=float)
    xs = np.maximum(x_arr, 0.0)
    delta, zeta, amp, off = sp.delta, sp.zeta, sp.amp, sp.offset
    # expm1 form near the origin, two-exponential form once delta x > 1 so
    # that W only overflows where W itself does
    near = np.minimum(xs, 1.0 / delta) if delta > 0 else xs
    ez = np.exp(zeta * near)
    core = amp * _expm1_ratio(delta, near) + off
    if deriv == 0:
        out = ez * core
    else:
        ed = np.exp(delta * near)
        if deriv == 1:
            out = ez * (zeta * core + amp * ed)
        else:
            out = ez * (zeta * zeta * core + (2.0 * zeta + delta) * amp * ed)
    if delta > 0:
        c_big = amp / delta
        c_small = off - c_big
        with np.errstate(over="ignore"):
            far = np.exp(sp.phi_r * xs) * (c_big * sp.phi_r**deriv + c_small * zeta**deriv * np.exp(-delta * xs))
        out = np.where(xs * delta > 1.0, far, out)
    out = np.where(x_arr < 0, 0.0, out)
    return out[()] if out.ndim == 0 else out


def scale_z(model: ModelSpec, r: float, x):
    """Second scale function Z(x) = 1 + r * int_0^x W(y) dy, equal to 1 for x < 0."""
    sp = scale_params(model, r)
    x_arr = np.asarray(x, dtype=float)
    xs = np.maximum(x_arr, 0.0)
    if sp.r == 0.0:
        out = np.ones_like(xs)
    else:
        c_big = 1.0 / float(psi_prime(model, sp.phi_r))
        c_small = 1.0 / float(psi_prime(model, sp.zeta))
        out = 1.0 + sp.r * (
            c_big * _expm1_ratio(sp.phi_r, xs) + c_small * _expm1_ratio(sp.zeta, xs)
        )
    out = np.where(x_arr < 0, 1.0, out)
    return out[()] if out.ndim == 0 else out


def _check_interval(x, a) -> None:
    if not a > 0:
        raise DomainError(f"interval length a must be positive, got {a}")
    x_arr = np.asarray(x)
    if np.any(x_arr < 0) or np.any(x_arr > a):
        raise DomainError("starting point must lie in [0, a]")


def two_sided_up(model: ModelSpec, r: float, x, a: float):
    """E_x[exp(-r T_a^+); T_a^+ < T_0^-] = W(x) / W(a)."""
    _check_interval(x, a)
    return w_ratio(model, r, x, a)


def two_sided_down(model: ModelSpec, r: float, x, a: float):
    """E_x[exp(-r T_0^-); T_0^- < T_a^+] = Z(x) - Z(a) W(x) / W(a)."""
    _check_interval(x, a)
    return exit_below(model, r, x, a)


def exp_coeffs(model: ModelSpec, r: float) -> tuple[float, float, float, float]:
    """(phi, zeta, c_big, c_small) with W(x) = c_big e^{phi x} + c_small e^{zeta x}.

    Needs r > 0, so that zeta < 0 < phi.  Then Z(x) = r (c_big e^{phi x} / phi
    + c_small e^{zeta x} / zeta).
    """
    sp = scale_params(model, r)
    if not sp.r > 0:
        raise DomainError("the exponential representation needs r > 0")
    c_big = sp.amp / sp.delta
    return sp.phi_r, sp.zeta, c_big, sp.offset - c_big


def w_damped(model: ModelSpec, r: float, x):
    """W(x) e^{-phi x} = c_big + c_small e^{-delta x}, accurate near x = 0 (r > 0)."""
    sp = scale_params(model, r)
    _, _, _, c_small = exp_coeffs(model, r)
    out = sp.offset + c_small * np.expm1(-sp.delta * np.asarray(x, dtype=float))
    return out[()] if out.ndim == 0 else out


def w_ratio(model: ModelSpec, r: float, x, y):
    """W(x) / W(y) evaluated without forming either factor when r > 0."""
    if float(r) == 0.0:
        return scale_w(model, r, x) / scale_w(model, r, y)
    phi = scale_params(model, r).phi_r
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.exp(phi * (x - y)) * w_damped(model, r, x) / w_damped(model, r, y)
    out = np.where(x < 0, 0.0, out)
    return out[()] if out.ndim == 0 else out


def exit_below(model: ModelSpec, r: float, x, a: float):
    """Z(x) - Z(a) W(x) / W(a) without the interval check.

    For r > 0 the leading exponentials cancel exactly, leaving
    r c_big c_small (1/zeta - 1/phi) (e^{phi a + zeta x} - e^{phi x + zeta a}) / W(a),
    which stays accurate when phi * a is large.
    """
    if float(r) == 0.0:
        ratio = scale_w(model, r, x) / scale_w(model, r, a)
        return scale_z(model, r, x) - scale_z(model, r, a) * ratio
    phi, zeta, cb, cs = exp_coeffs(model, r)
    delta = phi - zeta
    x = np.asarray(x, dtype=float)
    num = r * cb * cs * (1.0 / zeta - 1.0 / phi) * np.exp(zeta * x) * -np.expm1(-delta * (a - x))
    out = num / w_damped(model, r, a)
    return out[()] if out.ndim == 0 else out


def drawup_triple_transform(model: ModelSpec, r: float, b: float, u_arg: float, v: float) -> float:
    """E[exp(-r T + u_arg * inf_{t<=T} X_t); sup_{t<=T} X_t < v] for T the first time the drawup reaches b.

    The process starts at 0 with zero drawdown and drawup.  The two
    integrals int_0^y exp(-u_arg s) W(s) ds are computed by adaptive
    quadrature.
    """
    _check_model(model)
    if not (0 < v <= b):
        raise DomainError(f"v must lie in (0, b], got v={v}, b={b}")
    if u_arg < 0:
        raise DomainError(f"u_arg must be >= 0, got {u_arg}")

    def weighted_integral(y: float) -> float:
        if y <= 0:
            return 0.0
        val, _ = integrate.quad(
            lambda s: math.exp(-u_arg * s) * float(scale_w(model, r, s)),
            0.0, y, epsabs=1e-12, epsrel=1e-12, limit=200,
        )
        return val

    kill = r - float(psi(model, u_arg))
    w_b = float(scale_w(model, r, b))
    w_bv = float(scale_w(model, r, b - v))
    first = math.exp(-u_arg * b) * (1.0 + kill * weighted_integral(b - v)) / (
        1.0 + kill * weighted_integral(b)
    )
    second = math.exp(-u_arg * (b - v)) * w_bv / w_b
    return first - second


def dual_model(model: ModelSpec) -> LinearBrownian:
    """Model of -X; only defined for Brownian motion."""
    if not isinstance(model, LinearBrownian):
        raise UnsupportedModelError("the dual of a Cramer-Lundberg process has upward jumps")
    return LinearBrownian(mu=-model.mu, sigma=model.sigma)


def levy_density(model: ModelSpec, z):
    """Density of the Levy measure of the (positive) jump sizes, zero for Brownian motion."""
    z = np.asarray(z, dtype=float)
    if isinstance(model, LinearBrownian):
        out = np.zeros_like(z)
    else:
        out = np.where(z > 0, model.beta * model.rho * np.exp(-model.rho * np.maximum(z, 0.0)), 0.0)
    return out[()] if out.ndim == 0 else out
