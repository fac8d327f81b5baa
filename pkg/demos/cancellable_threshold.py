"""Optimal cancellation threshold for the drawdown and drawup contracts.

Run: python3 demos/cancellable_threshold.py
"""

from drawdown_contracts import drawdown_pricing as dd
from drawdown_contracts import drawup_pricing as du
from drawdown_contracts.contracts import ConstantReward, ContractSpec, LinearC1, LinearReward, QuadraticC2
from drawdown_contracts.levy_models import CramerLundberg, LinearBrownian


def show(label, quote):
    held = [name for name, c in quote.conditions.items() if c.holds]
    print(f"{label}: value={quote.value:.4f} theta*={quote.theta_star} flags={list(quote.flags)}")
    print(f"  conditions holding: {', '.join(held)}")


def main():
    bm = LinearBrownian(0.03, 0.4)
    cl = CramerLundberg(0.05, 0.1, 2.5)
    show("BM drawdown, c1 fee", dd.value_F(bm, ContractSpec(a=10.0, r=0.01, p=0.2, d=7.0),
                                         ConstantReward(100.0), LinearC1()))
    show("CL drawdown, c2 fee", dd.value_F(cl, ContractSpec(a=10.0, r=0.01, p=0.1, d=7.0),
                                         LinearReward(100.0, 10.0), QuadraticC2()))
    show("BM drawup b=8, c2 fee", du.value_K(bm, ContractSpec(a=10.0, r=0.01, p=1.35, b=8.0, d=9.0, u=1.0),
                                           ConstantReward(100.0), QuadraticC2()))


if __name__ == "__main__":
    main()
