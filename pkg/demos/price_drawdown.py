"""Fair premium and value of a plain drawdown contract, checked against Monte Carlo.

Run: python3 demos/price_drawdown.py
"""

from drawdown_contracts import drawdown_pricing as dd
from drawdown_contracts.contracts import ConstantReward, ContractSpec
from drawdown_contracts.levy_models import LinearBrownian
from drawdown_contracts.simulation import McConfig, mc_estimate, mc_fair_premium


def main():
    model = LinearBrownian(mu=0.03, sigma=0.4)
    reward = ConstantReward(100.0)
    base = ContractSpec(a=10.0, r=0.01)
    p0 = dd.fair_premium(model, base, reward)
    print(f"fair premium at d=0: {p0:.6f}")
    mc = McConfig(n_paths=40_000, seed=1)
    for d in (0.0, 5.0, 8.0):
        c = base.with_(d=d, p=p0)
        analytic = dd.value_f(model, c, reward)
        est = mc_estimate(model, c, reward, "value_f", mc)
        prem = mc_fair_premium(model, c, reward, mc)
        print(f"d={d:4.1f}  f={analytic:9.4f}  mc={est.mean:9.4f} +- {est.std_error:.4f}  "
              f"p*={dd.fair_premium(model, c, reward):.5f}  mc p*={prem.mean:.5f}")


if __name__ == "__main__":
    main()
