import pytest

from drawdown_contracts.contracts import ConstantReward, LinearReward
from drawdown_contracts.levy_models import CramerLundberg, LinearBrownian

BM = LinearBrownian(0.03, 0.4)
CL = CramerLundberg(0.05, 0.1, 2.5)
R = 0.01
A = 10.0


@pytest.fixture
def bm():
    return BM


@pytest.fixture
def cl():
    return CL


@pytest.fixture(params=["bm", "cl"])
def model(request):
    return BM if request.param == "bm" else CL


@pytest.fixture
def alpha100():
    return ConstantReward(100.0)


@pytest.fixture
def alpha_linear():
    return LinearReward(100.0, 10.0)
