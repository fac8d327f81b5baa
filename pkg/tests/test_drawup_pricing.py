import numpy as np
import pytest

from drawdown_contracts import drawdown_pricing as dd
from drawdown_contracts import drawup_pricing as du
from drawdown_contracts.contracts import ConstantReward, ContractSpec, LinearC3, LinearReward, QuadraticC2
from drawdown_contracts.errors import (
    DegenerateContractError,
    DomainError,
    UnsupportedConfigurationError,
    UnsupportedModelError,
)
from drawdown_contracts.levy_models import CramerLundberg

from conftest import BM, CL, A, R

CL_H = CramerLundberg(0.04, 0.1, 2.5)
SMOOTH_BM = ContractSpec(a=A, r=R, p=1.35, b=8.0, d=9.0, u=1.0)
H_CL = ContractSpec(a=A, r=R, p=0.6, b=A, d=5.0, u=2.0)


def test_equal_levels_drawup_at_zero_state_is_bounded(model, alpha_linear):
    t = du.lambda_nu_N_equal_levels(model, R, A, np.linspace(0, A, 11), 0.0, alpha_linear)
    assert np.all(np.asarray(t.lam) >= 0) and np.all(np.asarray(t.nu) >= 0)
    assert np.all(np.asarray(t.lam) + np.asarray(t.nu) <= 1 + 1e-12)


def test_immediate_triggers():
    t = du.lambda_nu_bm_unequal(BM, R, A, 8.0, 3.0, 8.0, ConstantReward(100.0))
    assert float(t.lam) == 1.0 and float(t.nu) == 0.0
    t = du.lambda_nu_bm_unequal(BM, R, A, 8.0, A, 2.0, ConstantReward(100.0))
    assert float(t.lam) == 0.0 and float(t.nu) == 1.0


def test_nu_below_drawdown_only_transform(model, alpha_linear):
    # the drawup clause can only remove drawdown events
    d = np.linspace(0, 9, 10)
    t = du.lambda_nu_N_equal_levels(model, R, A, d, 1.0, alpha_linear)
    assert np.all(np.asarray(t.nu) <= np.asarray(dd.xi(model, R, A, d)) + 1e-12)
    assert np.all(np.asarray(t.big_n) <= np.asarray(dd.reward_transform(model, R, A, d, alpha_linear)) + 1e-9)


def test_regime_boundary_continuity():
    d = np.linspace(2.0, A, 17)
    lam2, nu2 = du._bm_unequal_two_sided(BM, R, A, 8.0, d, A - d)
    lam1, nu1 = du._bm_unequal_reflected(BM, R, A, 8.0, d, A - d)
    assert np.max(np.abs(lam2 - lam1)) <= 1e-8
    assert np.max(np.abs(nu2 - nu1)) <= 1e-8


def test_unsupported_configurations():
    c = ContractSpec(a=A, r=R, p=0.1, b=8.0)
    with pytest.raises(UnsupportedConfigurationError):
        du.value_k(CL, c, ConstantReward(100.0))
    with pytest.raises(UnsupportedConfigurationError):
        du.value_k(BM, c, LinearReward(100.0, 10.0))
    with pytest.raises(UnsupportedModelError):
        du.lambda_nu_bm_unequal(CL, R, A, 8.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        du.value_k(BM, ContractSpec(a=A, r=R, p=0.1), ConstantReward(100.0))


def test_fair_premium_zeroes_value(model, alpha100):
    b = A if model is CL else 8.0
    c = ContractSpec(a=A, r=R, b=b, d=3.0, u=2.0)
    p = du.fair_premium_drawup(model, c, alpha100)
    assert abs(du.value_k(model, c.with_(p=p), alpha100)) <= 1e-10


def test_fair_premium_degenerate():
    with pytest.raises(DegenerateContractError):
        du.fair_premium_drawup(BM, ContractSpec(a=A, r=R, b=8.0, u=8.0), ConstantReward(100.0))


def test_h_surplus_domain():
    with pytest.raises(DomainError):
        du.h_surplus(BM, SMOOTH_BM, ConstantReward(100.0), QuadraticC2(), 2.0)
    with pytest.raises(DomainError):
        du.h_surplus(BM, SMOOTH_BM, ConstantReward(100.0), QuadraticC2(), 9.5)


def test_h_surplus_at_d_equals_k_tilde(alpha100):
    assert float(du.h_surplus(BM, SMOOTH_BM, alpha100, QuadraticC2(), SMOOTH_BM.d)) == \
        du.k_tilde(BM, SMOOTH_BM, alpha100, QuadraticC2())


@pytest.mark.parametrize("theta", [-2.0, 0.5, 3.0, 4.9])
def test_h_surplus_matches_integrated_form(theta):
    rw, pen = LinearReward(100.0, 20.0), LinearC3(35.0)
    quad = float(du.h_surplus(CL_H, H_CL, rw, pen, theta))
    closed = du.h_surplus_equal_levels_closed(CL_H, H_CL, rw, pen, theta)
    assert quad == pytest.approx(closed, rel=1e-9, abs=1e-10)


def test_theta_star_matches_drawdown_threshold_for_smooth_fit_case(alpha100):
    # interior drawdown threshold inside (d+u-b, d]: both contracts stop at the same level
    up = du.find_theta_star_drawup(BM, SMOOTH_BM, alpha100, QuadraticC2()).theta_star
    down = dd.find_theta_star(BM, ContractSpec(a=A, r=R, p=1.35, d=9.0), alpha100, QuadraticC2()).theta_star
    assert up == pytest.approx(down, abs=1e-6)


def test_value_K_flags(alpha100):
    q = du.value_K(BM, SMOOTH_BM.with_(u=8.0), alpha100, QuadraticC2())
    assert q.flags == ("expired",)
    q = du.value_K(BM, SMOOTH_BM, alpha100, QuadraticC2())
    assert q.theta_star is not None and q.value >= du.value_k(BM, SMOOTH_BM, alpha100)
    assert all(q.conditions[k].holds for k in du.REQUIRED_CONDITIONS)


def test_cl_conditions_with_falling_fee():
    q = du.value_K(CL_H, H_CL, LinearReward(100.0, 20.0), LinearC3(35.0))
    assert all(q.conditions[k].holds for k in du.REQUIRED_CONDITIONS)
    # the global generator check fails near d = a, where the fee drops to zero
    assert not q.conditions["war1"].holds
