"""End-to-end comparison of the analytic prices with the Monte Carlo oracle.

A suite is a list of run configurations.  For each one the closed-form
targets of its contract kind are compared with Monte Carlo estimates
from one shared set of paths.  Brownian runs are repeated at a quarter
of the maximum time step, and the two estimates must agree within two
combined standard errors.  A configuration passes when every
|z| <= Z_LIMIT, every refinement gap is within the gate, and every
required optimality condition holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from . import drawdown_pricing as dd
from . import drawup_pricing as du
from .config import RunConfig, parse_config
from .levy_models import LinearBrownian
from .simulation import McConfig, estimate_leg, estimate_ratio, simulate_contract, _tail_bound

Z_LIMIT = 3.0
REFINE_SE = 2.0
REFINE_FACTOR = 4.0


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    target: str
    analytic: float
    mc_mean: float
    std_error: float
    z: float
    refine_gap: Optional[float] = None  # |difference| / combined SE against the finer run

    @property
    def passed(self) -> bool:
        ok = math.isfinite(self.z) and abs(self.z) <= Z_LIMIT
        if self.refine_gap is not None:
            ok = ok and self.refine_gap < REFINE_SE
        return ok


@dataclass(frozen=True)
class ConditionRow:
    label: str
    name: str
    holds: bool
    margin: float
    required: bool


@dataclass
class ValidationReport:
    comparisons: list = field(default_factory=list)
    conditions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.comparisons) and all(
            c.holds for c in self.conditions if c.required)

    def extend(self, other: "ValidationReport") -> None:
        self.comparisons.extend(other.comparisons)
        self.conditions.extend(other.conditions)

    def table(self) -> str:
        lines = [f"{'case':<26} {'target':<18} {'analytic':>16} {'mc_mean':>16} {'se':>11} {'z':>7} "
                 f"{'refine':>7}  ok"]
        for r in self.comparisons:
            ref = "" if r.refine_gap is None else f"{r.refine_gap:7.2f}"
            lines.append(f"{r.label:<26} {r.target:<18} {r.analytic:16.8g} {r.mc_mean:16.8g} "
                         f"{r.std_error:11.4g} {r.z:7.2f} {ref:>7}  {'yes' if r.passed else 'NO'}")
        if self.conditions:
            lines.append("")
            lines.append(f"{'case':<26} {'condition':<18} {'margin':>16}  required  holds")
            for c in self.conditions:
                lines.append(f"{c.label:<26} {c.name:<18} {c.margin:16.6g}  {'yes' if c.required else 'no':<8}  "
                             f"{'yes' if c.holds else 'NO'}")
        lines.append("")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def _analytic_targets(cfg: RunConfig, model) -> tuple[dict, Optional[float], dict, tuple]:
    """Closed-form values keyed by simulation leg, plus theta* and the condition checks."""
    c, rw, pen = cfg.contract, cfg.reward, cfg.penalty
    vals, theta, conds, required = {}, None, {}, ()
    if cfg.kind in ("drawdown", "drawdown-cancellable"):
        vals["xi"] = ("xi", float(dd.xi(model, c.r, c.a, c.d)))
        vals["reward"] = ("reward_transform", float(dd.reward_transform(model, c.r, c.a, c.d, rw)))
        if c.p is not None:
            vals["value"] = ("value_f", dd.value_f(model, c, rw))
        vals["fair_premium"] = ("fair_premium", dd.fair_premium(model, c, rw))
        if cfg.kind == "drawdown-cancellable":
            q = dd.value_F(model, c, rw, pen)
            theta, conds, required = q.theta_star, q.conditions, dd.REQUIRED_CONDITIONS
            if theta is not None:
                vals["stopped"] = ("value_F", q.value)
                vals["surplus"] = ("g_surplus", float(dd.g_surplus(model, c, rw, pen, theta)))
    else:
        t = du.drawup_transforms(model, c, rw)
        vals["drawup"] = ("lambda", float(t.lam))
        vals["xi"] = ("nu", float(t.nu))
        vals["reward"] = ("N", float(t.big_n))
        if c.p is not None:
            vals["value"] = ("value_k", du.value_k(model, c, rw))
        vals["fair_premium"] = ("fair_premium", du.fair_premium_drawup(model, c, rw))
        if cfg.kind == "drawup-cancellable":
            q = du.value_K(model, c, rw, pen)
            theta, conds, required = q.theta_star, q.conditions, du.REQUIRED_CONDITIONS
            if theta is not None:
                vals["stopped"] = ("value_K", q.value)
                vals["surplus"] = ("h_surplus", float(du.h_surplus(model, c, rw, pen, theta)))
    return vals, theta, conds, required


def _mc_estimates(cfg: RunConfig, mc: McConfig, theta: Optional[float], legs) -> dict:
    paths = simulate_contract(cfg.model, cfg.contract, cfg.reward, mc, cfg.penalty, theta)
    out = {}
    for leg in legs:
        if leg == "fair_premium":
            out[leg] = estimate_ratio(paths.legs["reward"], 1.0 - paths.legs["any"], cfg.contract.r,
                                      paths.events, _tail_bound(paths, "reward"), "fair_premium")
        else:
            out[leg] = estimate_leg(paths, leg, mc, leg)
    return out


def validate_config(cfg: RunConfig, label: str = "config", analytic_model=None,
                    refine: bool = True) -> ValidationReport:
    """Compare every closed-form target of ``cfg`` with Monte Carlo.

    ``analytic_model`` replaces the model on the analytic side only.  It
    exists as a sensitivity control: a perturbed model must fail.
    """
    mc = cfg.mc or McConfig()
    model = analytic_model or cfg.model
    vals, theta, conds, required = _analytic_targets(cfg, model)
    if cfg.contract.p is None:
        vals.pop("stopped", None)
        vals.pop("surplus", None)
    cfg_mc = replace(cfg, contract=cfg.contract.with_(p=cfg.contract.p or 0.0))
    coarse = _mc_estimates(cfg_mc, mc, theta, vals)
    fine = None
    if refine and isinstance(cfg.model, LinearBrownian):
        fine = _mc_estimates(cfg_mc, replace(mc, time_step=mc.time_step / REFINE_FACTOR), theta, vals)
    report = ValidationReport()
    for leg, (target, analytic) in vals.items():
        est = coarse[leg]
        gap = None
        if fine is not None:
            f = fine[leg]
            spread = math.hypot(est.std_error, f.std_error)
            gap = abs(est.mean - f.mean) / spread if spread > 0 else 0.0
        report.comparisons.append(ComparisonRow(label, target, analytic, est.mean, est.std_error,
                                                est.z_score(analytic), gap))
    for name, chk in conds.items():
        report.conditions.append(ConditionRow(label, name, chk.holds, chk.margin, name in required))
    return report


# --- built-in suite -------------------------------------------------------------

_BM = {"type": "brownian", "mu": 0.03, "sigma": 0.4}
_CL = {"type": "cramer-lundberg", "mu_hat": 0.05, "beta": 0.1, "rho": 2.5}
_CL_H = {"type": "cramer-lundberg", "mu_hat": 0.04, "beta": 0.1, "rho": 2.5}
_ALPHA100 = {"type": "constant", "alpha": 100.0}
_ALPHA_LIN10 = {"type": "linear", "alpha1": 100.0, "alpha2": 10.0}
_ALPHA_LIN20 = {"type": "linear", "alpha1": 100.0, "alpha2": 20.0}

SUITE = {
    "bm-drawdown": {"kind": "drawdown", "model": _BM, "reward": _ALPHA100,
                    "contract": {"a": 10, "r": 0.01, "p": 0.2, "d": 5}},
    "cl-drawdown": {"kind": "drawdown", "model": _CL, "reward": _ALPHA_LIN10,
                    "contract": {"a": 10, "r": 0.01, "p": 0.1, "d": 5}},
    "bm-drawdown-cancellable": {"kind": "drawdown-cancellable", "model": _BM, "reward": _ALPHA100,
                                "penalty": {"type": "linear-c1"},
                                "contract": {"a": 10, "r": 0.01, "p": 0.2, "d": 7}},
    "cl-drawdown-cancellable": {"kind": "drawdown-cancellable", "model": _CL, "reward": _ALPHA_LIN10,
                                "penalty": {"type": "quadratic-c2"},
                                "contract": {"a": 10, "r": 0.01, "p": 0.1, "d": 7}},
    "bm-drawup": {"kind": "drawup", "model": _BM, "reward": _ALPHA100,
                  "contract": {"a": 10, "b": 8, "r": 0.01, "p": 0.5, "d": 4, "u": 2}},
    "cl-drawup": {"kind": "drawup", "model": _CL, "reward": _ALPHA_LIN10,
                  "contract": {"a": 10, "b": 10, "r": 0.01, "p": 0.1, "d": 5, "u": 3}},
    "bm-drawup-cancellable": {"kind": "drawup-cancellable", "model": _BM, "reward": _ALPHA100,
                              "penalty": {"type": "quadratic-c2"},
                              "contract": {"a": 10, "b": 8, "r": 0.01, "p": 1.35, "d": 9, "u": 1}},
    "cl-drawup-cancellable": {"kind": "drawup-cancellable", "model": _CL_H, "reward": _ALPHA_LIN20,
                              "penalty": {"type": "linear-c3", "c_end": 35.0},
                              "contract": {"a": 10, "b": 10, "r": 0.01, "p": 0.6, "d": 5, "u": 2}},
}


def validate_suite(names=None, mc: Optional[dict] = None, refine: bool = True) -> ValidationReport:
    """Run the built-in suite (all cases when ``names`` is None)."""
    report = ValidationReport()
    for name in names or SUITE:
        doc = dict(SUITE[name])
        if mc is not None:
            doc["mc"] = mc
        report.extend(validate_config(parse_config(doc), label=name, refine=refine))
    return report
