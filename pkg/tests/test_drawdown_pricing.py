import numpy as np
import pytest

from drawdown_contracts import drawdown_pricing as dd
from drawdown_contracts.contracts import ConstantPenalty, ConstantReward, ContractSpec, LinearC1, QuadraticC2
from drawdown_contracts.errors import DegenerateContractError, DomainError, UnsupportedConfigurationError

from conftest import BM, CL, A, R


def test_xi_at_trigger():
    assert float(dd.xi(BM, R, A, A)) == pytest.approx(1.0)
    assert float(dd.xi(CL, R, A, A)) < 1.0


def test_xi_increases_with_drawdown(model):
    x = np.asarray(dd.xi(model, R, A, np.linspace(0, A, 21)))
    assert np.all(np.diff(x) > 0)


@pytest.mark.parametrize("d", [0.0, 4.0, 9.0])
def test_reward_transform_closed_form_matches_quadrature(model, alpha_linear, d):
    closed = float(dd.reward_transform(model, R, A, d, alpha_linear))
    quad = dd.reward_transform_by_quadrature(model, R, A, d, alpha_linear)
    assert closed == pytest.approx(quad, rel=1e-8)


def test_fair_premium_zeroes_value(model, alpha100):
    c = ContractSpec(a=A, r=R, d=3.0)
    p = dd.fair_premium(model, c, alpha100)
    assert p > 0
    assert abs(dd.value_f(model, c.with_(p=p), alpha100)) < 1e-10


def test_fair_premium_scales_with_reward(model, alpha100):
    c = ContractSpec(a=A, r=R, d=2.0)
    assert dd.fair_premium(model, c, ConstantReward(200.0)) == pytest.approx(
        2 * dd.fair_premium(model, c, alpha100), rel=1e-14)


def test_degenerate_and_unsupported(alpha100):
    with pytest.raises(DegenerateContractError):
        dd.fair_premium(BM, ContractSpec(a=A, r=R, d=A), alpha100)
    with pytest.raises(UnsupportedConfigurationError):
        dd.value_f(BM, ContractSpec(a=A, r=0.0, p=0.1), alpha100)
    with pytest.raises(DomainError):
        dd.value_f(BM, ContractSpec(a=A, r=R, p=0.1, b=8.0), alpha100)


def test_g_surplus_is_continuous_at_threshold(model, alpha100):
    c = ContractSpec(a=A, r=R, p=0.2)
    th = 6.0
    left = float(dd.g_surplus(model, c, alpha100, LinearC1(), th, th))
    right = float(dd.g_surplus(model, c, alpha100, LinearC1(), th, th + 1e-9))
    assert left == pytest.approx(right, abs=1e-6)
    with pytest.raises(DomainError):
        dd.g_surplus(model, c, alpha100, LinearC1(), A)


def test_theta_star_maximizes_surplus(bm, alpha100):
    c = ContractSpec(a=A, r=R, p=0.2, d=7.0)
    res = dd.find_theta_star(bm, c, alpha100, LinearC1())
    assert res.theta_star is not None and res.interior
    grid = np.linspace(0.1, 9.9, 99)
    crit = np.asarray(dd.threshold_criterion(bm, c, alpha100, LinearC1(), grid))
    assert res.criterion >= crit.max() - 1e-12


def test_no_stopping_when_fee_is_prohibitive(bm, alpha100):
    c = ContractSpec(a=A, r=R, p=0.01, d=5.0)
    q = dd.value_F(bm, c, alpha100, ConstantPenalty(1e4), with_conditions=False)
    assert q.theta_star is None
    assert "no-early-termination" in q.flags
    assert q.value == pytest.approx(dd.value_f(bm, c, alpha100))


def test_compensated_generator_matches_uncompensated():
    c = ContractSpec(a=A, r=R, p=0.1)
    for d in (0.5, 3.0, 8.0):
        assert dd.penalty_generator(CL, c, QuadraticC2(), d) == pytest.approx(
            dd.penalty_generator(CL, c, QuadraticC2(), d, compensated=False), rel=1e-8)


def test_conditions_report_required_keys(model, alpha_linear):
    c = ContractSpec(a=A, r=R, p=0.1, d=7.0)
    q = dd.value_F(model, c, alpha_linear, QuadraticC2(), grid_points=40)
    assert set(dd.REQUIRED_CONDITIONS) <= set(q.conditions)
    assert all(q.conditions[k].holds for k in dd.REQUIRED_CONDITIONS)
