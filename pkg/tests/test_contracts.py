import numpy as np
import pytest

from drawdown_contracts.contracts import (
    ConstantPenalty,
    ConstantReward,
    ContractSpec,
    ExponentialReward,
    LinearC1,
    LinearC3,
    LinearReward,
    QuadraticC2,
    check_penalty,
    penalty_fee,
    reward_at_least,
)
from drawdown_contracts.errors import DomainError


@pytest.mark.parametrize("kwargs", [
    {"a": 0.0, "r": 0.01},
    {"a": 10.0, "r": -0.01},
    {"a": 10.0, "r": 0.01, "d": 11.0},
    {"a": 10.0, "r": 0.01, "p": -1.0},
    {"a": 10.0, "r": 0.01, "u": 1.0},
    {"a": 10.0, "r": 0.01, "b": 12.0},
    {"a": 10.0, "r": 0.01, "b": 8.0, "u": 9.0},
    {"a": float("inf"), "r": 0.01},
])
def test_contract_invariants(kwargs):
    with pytest.raises(DomainError):
        ContractSpec(**kwargs)


def test_premium_required():
    with pytest.raises(DomainError):
        ContractSpec(a=10.0, r=0.01).premium()
    assert ContractSpec(a=10.0, r=0.01).with_(p=0.3).premium() == 0.3


def test_rewards():
    assert ConstantReward(5.0)(12.0) == 5.0
    assert LinearReward(100.0, 10.0)(10.0) == pytest.approx(200.0)
    assert ExponentialReward(2.0, 0.1)(0.0) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        reward_at_least(LinearReward(-200.0, 1.0), 10.0)


def test_penalty_families():
    p, r, a = 0.2, 0.01, 10.0
    d = np.array([0.0, 5.0, 9.0, 10.0])
    np.testing.assert_allclose(penalty_fee(LinearC1(), d, p, r, a), [20.0, 10.0, 2.0, 0.0])
    np.testing.assert_allclose(penalty_fee(QuadraticC2(), d, p, r, a), [20.0, 5.0, 0.2, 0.0])
    np.testing.assert_allclose(penalty_fee(LinearC3(5.0), d, p, r, a), [20.0, 12.5, 6.5, 0.0])
    np.testing.assert_allclose(penalty_fee(ConstantPenalty(3.0), d, p, r, a), [3.0, 3.0, 3.0, 0.0])
    np.testing.assert_allclose(penalty_fee(QuadraticC2(), 5.0, p, r, a, deriv=1), -2.0)
    np.testing.assert_allclose(penalty_fee(QuadraticC2(), 5.0, p, r, a, deriv=2), 0.4)


def test_penalty_admissibility():
    check_penalty(QuadraticC2(), 0.2, 0.01, 10.0)
    with pytest.raises(DomainError):
        check_penalty(LinearC3(30.0), 0.2, 0.01, 10.0)
    with pytest.raises(DomainError):
        ConstantPenalty(-1.0)
