"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every test evaluates all of its clauses before asserting, so a failing
run still reports which clauses held.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import integrate

from drawdown_contracts import drawdown_pricing as dd
from drawdown_contracts import drawup_pricing as du
from drawdown_contracts.cli import EXIT_FAILED, EXIT_OK, main
from drawdown_contracts.config import parse_config
from drawdown_contracts.contracts import (
    ConstantPenalty,
    ConstantReward,
    ContractSpec,
    LinearC1,
    LinearC3,
    LinearReward,
    QuadraticC2,
)
from drawdown_contracts.levy_models import (
    CramerLundberg,
    LinearBrownian,
    phi_inverse,
    psi,
    scale_w,
    two_sided_down,
    two_sided_up,
)
from drawdown_contracts.presets import run_preset
from drawdown_contracts.simulation import McConfig, mc_two_sided
from drawdown_contracts.validation import REFINE_FACTOR, REFINE_SE, Z_LIMIT, validate_config, validate_suite

BM = LinearBrownian(0.03, 0.4)
CL = CramerLundberg(0.05, 0.1, 2.5)
CL_H = CramerLundberg(0.04, 0.1, 2.5)
R, A = 0.01, 10.0
BM_DOC = {"type": "brownian", "mu": 0.03, "sigma": 0.4}
CL_DOC = {"type": "cramer-lundberg", "mu_hat": 0.05, "beta": 0.1, "rho": 2.5}
ALPHA100 = {"type": "constant", "alpha": 100.0}
ALPHA_LIN10 = {"type": "linear", "alpha1": 100.0, "alpha2": 10.0}
PATHS = 100_000


class Clauses:
    """Collects named clause outcomes and prints one summary line."""

    def __init__(self, number):
        self.number = number
        self.items = []

    def add(self, name, ok, detail=""):
        self.items.append((name, bool(ok), detail))

    def finish(self, capsys):
        failed = [f"{n} ({d})" if d else n for n, ok, d in self.items if not ok]
        status = "FAIL" if failed else "PASS"
        with capsys.disabled():
            print(f"\nACCEPTANCE {self.number}: {status}")
            for name, ok, detail in self.items:
                print(f"  [{'ok' if ok else 'FAIL'}] {name}  {detail}")
        assert not failed, "failed clauses: " + "; ".join(failed)


def add_report(clauses, report, prefix):
    for row in report.comparisons:
        ref = "" if row.refine_gap is None else f" refine={row.refine_gap:.2f}"
        clauses.add(f"{prefix} {row.label} {row.target}", row.passed,
                    f"analytic={row.analytic:.6g} mc={row.mc_mean:.6g} z={row.z:+.2f}{ref}")


def run_config(label, doc, seed):
    return validate_config(parse_config({**doc, "mc": {"n_paths": PATHS, "seed": seed}}), label=label)


def test_criterion_1_laplace_identity(capsys):
    cl = Clauses(1)
    for model in (BM, CL):
        for r in (0.0, 0.01, 0.05):
            big = phi_inverse(model, r)
            for gap in (0.25, 1.0, 3.0):
                phi = big + gap
                val, _ = integrate.quad(lambda x: math.exp(-phi * x) * float(scale_w(model, r, x)),
                                        0.0, 40.0 / gap, epsabs=0, epsrel=1e-12, limit=500)
                expected = 1.0 / (float(psi(model, phi)) - r)
                rel = abs(val - expected) / abs(expected)
                cl.add(f"{type(model).__name__} r={r} phi=Phi+{gap}", rel <= 1e-6, f"rel={rel:.2e}")
    cl.finish(capsys)


@pytest.mark.slow
def test_criterion_2_two_sided_exit(capsys):
    cl = Clauses(2)
    points = [(1.0, 4.0), (3.0, 10.0), (5.0, 10.0), (2.0, 6.0), (7.5, 8.0)]
    for model in (BM, CL):
        for i, (x, a) in enumerate(points):
            cfg = McConfig(n_paths=PATHS, seed=20 + i)
            up, down = mc_two_sided(model, R, x, a, cfg)
            fine = None
            if isinstance(model, LinearBrownian):
                fine = mc_two_sided(model, R, x, a, McConfig(n_paths=PATHS, seed=20 + i,
                                                             time_step=cfg.time_step / REFINE_FACTOR))
            for k, (est, exact) in enumerate(((up, two_sided_up(model, R, x, a)),
                                              (down, two_sided_down(model, R, x, a)))):
                z = est.z_score(float(exact))
                ok = abs(z) <= Z_LIMIT
                detail = f"analytic={float(exact):.6f} mc={est.mean:.6f} z={z:+.2f}"
                if fine is not None:
                    f = fine[k]
                    gap = abs(est.mean - f.mean) / math.hypot(est.std_error, f.std_error)
                    ok = ok and gap < REFINE_SE
                    detail += f" refine={gap:.2f}"
                cl.add(f"{type(model).__name__} x={x} a={a} {'up' if k == 0 else 'down'}", ok, detail)
    cl.finish(capsys)


@pytest.mark.slow
def test_criterion_3_drawdown_contract(capsys):
    start = time.perf_counter()
    cl = Clauses(3)
    for name, model, mdoc, rw, rdoc in (("bm", BM, BM_DOC, ConstantReward(100.0), ALPHA100),
                                        ("cl", CL, CL_DOC, LinearReward(100.0, 10.0), ALPHA_LIN10)):
        p0 = dd.fair_premium(model, ContractSpec(a=A, r=R), rw)
        for i, d in enumerate((0.0, 2.5, 5.0, 7.0, 9.0)):
            c = ContractSpec(a=A, r=R, d=d)
            p_star = dd.fair_premium(model, c, rw)
            fair = abs(dd.value_f(model, c.with_(p=p_star), rw))
            cl.add(f"{name} d={d} f(d, p*(d)) = 0", fair <= 1e-10, f"|f|={fair:.1e}")
            doc = {"kind": "drawdown", "model": mdoc, "reward": rdoc,
                   "contract": {"a": A, "r": R, "p": p0, "d": d}}
            # xi, Xi, f at p*(0), and the premium ratio against p*(d)
            add_report(cl, run_config(f"{name} d={d}", doc, 30 + i), "mc")
    elapsed = time.perf_counter() - start
    cl.add("runtime < 120 s", elapsed < 120, f"{elapsed:.1f} s")
    cl.finish(capsys)


@pytest.mark.slow
def test_criterion_4_cancellable_drawdown(capsys):
    cl = Clauses(4)
    cases = (("bm", BM, ConstantReward(100.0), LinearC1(), 0.2),
             ("cl", CL, LinearReward(100.0, 10.0), QuadraticC2(), 0.1))
    for name, model, rw, pen, p in cases:
        c = ContractSpec(a=A, r=R, p=p, d=7.0)
        thetas = [dd.find_theta_star(model, c.with_(d=d), rw, pen).theta_star for d in (0.0, 2.0, 5.0, 7.0, 9.5)]
        spread = max(thetas) - min(thetas)
        cl.add(f"{name} theta* independent of d", spread <= 1e-6, f"theta*={thetas[0]:.6f} spread={spread:.1e}")
        checks = dd.check_conditions_drawdown(model, c, rw, pen, thetas[0])
        gap = 1e-8 - checks["continuous_fit"].margin
        cl.add(f"{name} continuous fit", gap <= 1e-8, f"gap={gap:.1e}")
        if name == "bm":
            rel = 1e-3 - checks["smooth_fit"].margin
            cl.add("bm smooth fit", rel <= 1e-3, f"relative gap={rel:.1e}")
        dom = dd.domination_margin(model, c, rw, pen, thetas[0], points=500)
        cl.add(f"{name} domination on 500 points", dom >= -1e-9, f"min(G - f~)={dom:.3g}")
    report = validate_suite(["bm-drawdown-cancellable", "cl-drawdown-cancellable"], mc={"n_paths": PATHS, "seed": 41})
    add_report(cl, report, "mc")
    # jump condition on the gcl parameter set and the gcl-condition series
    rw = LinearReward(100.0, 10.0)
    for pen in (LinearC1(), QuadraticC2()):
        for d in (2.0, 5.0, 8.0):
            c = ContractSpec(a=A, r=R, p=0.1, d=d)
            ts = dd.find_theta_star(CL, c, rw, pen).theta_star
            chk = dd.check_conditions_drawdown(CL, c, rw, pen, ts)["assum_additional"]
            cl.add(f"cl assum_additional {type(pen).__name__} d={d}", chk.margin >= 0, f"margin={chk.margin:.3g}")
    table = run_preset("gcl-condition")
    for series in table.series:
        vals = [v for v in table.column(series) if v is not None]
        cl.add(f"gcl-condition {series} >= 0", min(vals) >= 0, f"min={min(vals):.3g} over {len(vals)} points")
    cl.finish(capsys)


K_BM_POINTS = [(0.0, 0.0), (4.0, 2.0), (8.0, 1.0), (5.0, 6.0), (2.0, 7.0)]
K_CL_POINTS = [(5.0, 3.0), (0.0, 0.0), (2.0, 2.0), (7.0, 6.0), (9.0, 9.0)]


@pytest.mark.slow
def test_criterion_5_drawup_contingency(capsys):
    cl = Clauses(5)
    grid = np.linspace(0.0, 1.0, 30)
    for name, model, b in (("bm b=8", BM, 8.0), ("cl a=b", CL, A)):
        d, u = np.meshgrid(grid * A, grid * b)
        t = du.drawup_transforms(model, ContractSpec(a=A, r=R, b=b), ConstantReward(100.0), d, u)
        total = np.asarray(t.lam) + np.asarray(t.nu)
        cl.add(f"{name} lambda + nu <= 1 on 30x30", total.max() <= 1 + 1e-12 and np.asarray(t.lam).min() >= 0
               and np.asarray(t.nu).min() >= 0, f"max={total.max():.15f}")
    d = np.linspace(2.0, A, 41)
    lam2, nu2 = du._bm_unequal_two_sided(BM, R, A, 8.0, d, A - d)
    lam1, nu1 = du._bm_unequal_reflected(BM, R, A, 8.0, d, A - d)
    jump = max(np.max(np.abs(lam2 - lam1)), np.max(np.abs(nu2 - nu1)))
    cl.add("bm regime-boundary continuity", jump <= 1e-8, f"max jump={jump:.1e}")
    for name, model, mdoc, rw, rdoc, b, points in (
            ("bm", BM, BM_DOC, ConstantReward(100.0), ALPHA100, 8.0, K_BM_POINTS),
            ("cl", CL, CL_DOC, LinearReward(100.0, 10.0), ALPHA_LIN10, A, K_CL_POINTS)):
        p0 = du.fair_premium_drawup(model, ContractSpec(a=A, r=R, b=b), rw)
        for i, (dd_, uu) in enumerate(points):
            c = ContractSpec(a=A, r=R, b=b, d=dd_, u=uu)
            p_star = du.fair_premium_drawup(model, c, rw)
            fair = abs(du.value_k(model, c.with_(p=p_star), rw))
            cl.add(f"{name} (d,u)=({dd_:g},{uu:g}) k(p*) = 0", fair <= 1e-10, f"|k|={fair:.1e}")
            doc = {"kind": "drawup", "model": mdoc, "reward": rdoc,
                   "contract": {"a": A, "b": b, "r": R, "p": p0, "d": dd_, "u": uu}}
            add_report(cl, run_config(f"{name} ({dd_:g},{uu:g})", doc, 50 + i), "mc")
    cl.finish(capsys)


@pytest.mark.slow
def test_criterion_6_cancellable_drawup(capsys):
    start = time.perf_counter()
    cl = Clauses(6)
    smooth = ContractSpec(a=A, r=R, p=1.35, b=8.0, d=9.0, u=1.0)
    h_cl = ContractSpec(a=A, r=R, p=0.6, b=A, d=5.0, u=2.0)
    for name, model, c, rw, pen in (("bm smooth_bm", BM, smooth, ConstantReward(100.0), QuadraticC2()),
                                    ("cl h_cl", CL_H, h_cl, LinearReward(100.0, 20.0), LinearC3(35.0))):
        gap = abs(float(du.h_surplus(model, c, rw, pen, c.d - 1e-11)) - du.k_tilde(model, c, rw, pen))
        cl.add(f"{name} h_>(theta -> d) = k~", gap <= 1e-8, f"gap={gap:.1e}")
    report = validate_suite(["bm-drawup-cancellable", "cl-drawup-cancellable"], mc={"n_paths": PATHS, "seed": 61})
    add_report(cl, report, "mc")
    ts = du.find_theta_star_drawup(BM, smooth, ConstantReward(100.0), QuadraticC2()).theta_star
    cl.add("smooth_bm theta* in [1.7, 1.9]", ts is not None and 1.7 <= ts <= 1.9,
           f"recovered theta*={ts:.6f}; feasible range is ({smooth.d + smooth.u - smooth.b:g}, {smooth.d:g}]")
    elapsed = time.perf_counter() - start
    cl.add("runtime < 180 s", elapsed < 180, f"{elapsed:.1f} s")
    cl.finish(capsys)


def test_criterion_7_condition_checkers(capsys):
    cl = Clauses(7)
    for model, rw in ((BM, ConstantReward(100.0)), (CL, LinearReward(100.0, 10.0))):
        name = type(model).__name__
        # convex non-increasing fee with c(d) <= p/r
        c = ContractSpec(a=A, r=R, p=0.1, d=5.0)
        ts = dd.find_theta_star(model, c, rw, QuadraticC2()).theta_star
        war1 = dd.check_conditions_drawdown(model, c, rw, QuadraticC2(), ts)["war1"]
        cl.add(f"{name} c2 war1 holds", war1.holds, f"margin={war1.margin:.3g}")
        # a flat fee of 25 exceeds p/r = 20
        c = ContractSpec(a=A, r=R, p=0.2, d=5.0)
        pen = ConstantPenalty(25.0)
        ts = dd.find_theta_star(model, c, rw, pen).theta_star
        war1 = dd.check_conditions_drawdown(model, c, rw, pen, ts)["war1"]
        cl.add(f"{name} constant fee 25 > p/r war1 fails", not war1.holds, f"margin={war1.margin:.3g}")
    cl.finish(capsys)


@pytest.mark.slow
def test_criterion_8_end_to_end(tmp_path, capsys):
    cl = Clauses(8)
    start = time.perf_counter()
    code = main(["validate", "--preset", "suite"])
    elapsed = time.perf_counter() - start
    capsys.readouterr()
    cl.add("validate --preset suite exits 0", code == EXIT_OK, f"exit={code}")
    cl.add("suite runtime < 600 s", elapsed < 600, f"{elapsed:.1f} s")
    doc = {"kind": "drawup", "model": CL_DOC, "reward": ALPHA100, "mc": {"n_paths": 50000, "seed": 3},
           "contract": {"a": 10, "b": 10, "r": 0.01, "p": 0.1, "d": 5, "u": 3},
           "analytic_model": {**CL_DOC, "mu_hat": 0.1}}
    path = tmp_path / "corrupted.json"
    path.write_text(json.dumps(doc))
    code = main(["validate", "--config", str(path)])
    capsys.readouterr()
    cl.add("corrupted-parameter fixture exits 5", code == EXIT_FAILED, f"exit={code}")
    cl.finish(capsys)
