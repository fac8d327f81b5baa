"""Named data series (presets) and generic parameter sweeps.

Every sweep returns a ``Table``: a header ``x,<series>...`` and one row
per grid point.  Points where a quantity is undefined (a degenerate fair
premium, a series outside its own domain) hold ``None`` and are written
as empty CSV cells.
"""

from __future__ import annotations

import csv
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import drawdown_pricing as dd
from . import drawup_pricing as du
from .contracts import (
    ConstantPenalty,
    ConstantReward,
    ContractSpec,
    LinearC1,
    LinearC3,
    LinearReward,
    QuadraticC2,
)
from .errors import DegenerateContractError, DomainError, UnsupportedConfigurationError
from .levy_models import CramerLundberg, LinearBrownian

BM_FIG = LinearBrownian(0.03, 0.4)
CL_FIG = CramerLundberg(0.05, 0.1, 2.5)
BM_H = LinearBrownian(0.04, 0.3)
CL_H = CramerLundberg(0.04, 0.1, 2.5)
R = 0.01
A = 10.0
B_BM = 8.0


@dataclass
class Table:
    """CSV-ready sweep output."""

    series: list
    x: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def header(self) -> list:
        return ["x", *self.series]

    def column(self, name: str) -> list:
        j = self.series.index(name)
        return [row[j] for row in self.rows]


def _safe(fn: Callable[[], float], notes: list, label: str) -> Optional[float]:
    try:
        v = float(fn())
    except (DegenerateContractError, DomainError, UnsupportedConfigurationError) as exc:
        notes.append(f"{label}: {exc}")
        return None
    if not math.isfinite(v):
        notes.append(f"{label}: non-finite value")
        return None
    return v


def tabulate(xs, series: dict) -> Table:
    """Evaluate each ``series[name](x)`` on the grid ``xs``."""
    t = Table(series=list(series))
    for x in xs:
        x = float(x)
        t.x.append(x)
        t.rows.append([_safe(lambda f=f: f(x), t.notes, f"{name} at x={x!r}") for name, f in series.items()])
    return t


def tabulate_columns(xs, series: dict) -> Table:
    """Like ``tabulate`` for series that accept the whole grid as an array."""
    xs = np.asarray(xs, dtype=float)
    cols = []
    for name, f in series.items():
        try:
            col = np.asarray(f(xs), dtype=float)
        except (DegenerateContractError, DomainError, UnsupportedConfigurationError):
            col = None
        if col is None or not np.all(np.isfinite(col)):
            cols.append(tabulate(xs, {name: f}))
        else:
            cols.append(Table(series=[name], x=xs.tolist(), rows=[[float(v)] for v in col]))
    t = Table(series=list(series), x=[float(x) for x in xs])
    t.rows = [[c.rows[i][0] for c in cols] for i in range(len(xs))]
    t.notes = [n for c in cols for n in c.notes]
    return t


def _grid(lo, hi, n):
    return np.linspace(lo, hi, n)


# --- drawdown contract -------------------------------------------------------


def _p_star(model, alpha_reward, d):
    return dd.fair_premium(model, ContractSpec(a=A, r=R, d=d), alpha_reward)


def preset_pstar_bm(points=101):
    series = {f"alpha={al:g}": (lambda d, al=al: _p_star(BM_FIG, ConstantReward(al), d))
              for al in (50.0, 100.0, 150.0)}
    return tabulate(_grid(0.0, A, points), series)


def preset_f_bm(points=101):
    rw = ConstantReward(100.0)
    series = {}
    for d0 in (0.0, 5.0, 6.0, 7.0):
        p = _p_star(BM_FIG, rw, d0)
        series[f"p=p*({d0:g})"] = lambda d, p=p: dd.value_f(BM_FIG, ContractSpec(a=A, r=R, p=p, d=d), rw)
    return tabulate(_grid(0.0, A, points), series)


CL_SLOPES = (5.0, 10.0, 20.0)


def preset_pstar_cl(points=101):
    series = {f"alpha=100+{s:g}d": (lambda d, s=s: _p_star(CL_FIG, LinearReward(100.0, s), d))
              for s in CL_SLOPES}
    return tabulate(_grid(0.0, A, points), series)


def preset_f_cl(points=101):
    series = {}
    for s in CL_SLOPES:
        rw = LinearReward(100.0, s)
        for d0 in (0.0, 7.5):
            p = _p_star(CL_FIG, rw, d0)
            series[f"alpha=100+{s:g}d,p=p*({d0:g})"] = (
                lambda d, p=p, rw=rw: dd.value_f(CL_FIG, ContractSpec(a=A, r=R, p=p, d=d), rw))
    return tabulate(_grid(0.0, A, points), series)


def _f_tilde_series(model, rw, premiums):
    series = {}
    for name, pen in (("c1", LinearC1()), ("c2", QuadraticC2())):
        for p in premiums:
            series[f"{name},p={p:g}"] = (
                lambda d, p=p, pen=pen: dd.f_tilde(model, ContractSpec(a=A, r=R, p=p, d=d), rw, pen))
    return series


def preset_ftilde_bm(points=101):
    return tabulate(_grid(0.0, A, points), _f_tilde_series(BM_FIG, ConstantReward(100.0), (0.05, 0.1, 0.2)))


def preset_ftilde_cl(points=101):
    return tabulate(_grid(0.0, A, points), _f_tilde_series(CL_FIG, LinearReward(100.0, 10.0), (0.05, 0.1, 0.2)))


def _g_series(model, rw, p, starts):
    series = {}
    for name, pen in (("c1", LinearC1()), ("c2", QuadraticC2())):
        for d in starts:
            c = ContractSpec(a=A, r=R, p=p, d=d)
            series[f"{name},d={d:g}"] = (
                lambda th, c=c, pen=pen: dd.g_surplus(model, c, rw, pen, th))
    return series


def preset_g_bm(points=201):
    return tabulate(_grid(0.0, A, points)[1:-1], _g_series(BM_FIG, ConstantReward(100.0), 0.2, (2.0, 5.0, 8.0)))


def preset_g_cl(points=201):
    return tabulate(_grid(0.0, A, points)[1:-1], _g_series(CL_FIG, LinearReward(100.0, 10.0), 0.1, (2.0, 5.0, 8.0)))


def preset_g_cl_condition(points=101):
    """Jump integral of the extended payoff, which must be non-negative below theta*."""
    rw = LinearReward(100.0, 10.0)
    series = {}
    for name, pen in (("c1", LinearC1()), ("c2", QuadraticC2())):
        c = ContractSpec(a=A, r=R, p=0.1)
        ts = dd.find_theta_star(CL_FIG, c, rw, pen).theta_star
        series[name] = (lambda d, c=c, pen=pen, ts=ts:
                        dd.jump_stop_integral(CL_FIG, c, rw, pen, ts, d) if ts is not None and d < ts
                        else _raise("outside [0, theta*)"))
    return tabulate(_grid(0.0, A, points), series)


def _raise(msg):
    raise DomainError(msg)


# --- drawup contingency --------------------------------------------------------


def _k_panels(model, b, rw, premiums, what):
    """'vs_d' series vary d with u = 0; 'vs_u' series vary u with d = 0."""
    series = {}
    for label, p in premiums:
        def val(d, u, p=p):
            c = ContractSpec(a=A, r=R, p=p, b=b, d=d, u=u)
            return du.value_k(model, c, rw) if what == "k" else du.fair_premium_drawup(model, c, rw)
        series[f"vs_d,{label}"] = lambda x, val=val: val(x, 0.0)
        series[f"vs_u,{label}"] = lambda x, val=val: val(0.0, x)
    return series


def _k_premiums(model, b, rw):
    p0 = du.fair_premium_drawup(model, ContractSpec(a=A, r=R, b=b), rw)
    return [("p=p*(0,0)", p0), ("p=0.5p*(0,0)", 0.5 * p0), ("p=2p*(0,0)", 2.0 * p0)]


def preset_k_bm(points=101):
    rw = ConstantReward(100.0)
    return tabulate(_grid(0.0, A, points), _k_panels(BM_FIG, B_BM, rw, _k_premiums(BM_FIG, B_BM, rw), "k"))


def preset_pstar_k_bm(points=101):
    return tabulate(_grid(0.0, A, points), _k_panels(BM_FIG, B_BM, ConstantReward(100.0), [("p*", 0.0)], "p*"))


def preset_k_cl(points=101):
    rw = LinearReward(100.0, 10.0)
    return tabulate(_grid(0.0, A, points), _k_panels(CL_FIG, A, rw, _k_premiums(CL_FIG, A, rw), "k"))


def preset_pstar_k_cl(points=101):
    return tabulate(_grid(0.0, A, points), _k_panels(CL_FIG, A, LinearReward(100.0, 10.0), [("p*", 0.0)], "p*"))


H_BM_CONTRACT = ContractSpec(a=A, r=R, p=1.35, b=B_BM, d=9.0, u=1.0)
H_BM_CONSTANT_FEE = 5.0
H_CL_CONTRACT = ContractSpec(a=A, r=R, p=0.6, b=A, d=5.0, u=2.0)
H_CL_FEES = (20.0, 35.0, 50.0)


def _theta_grid(c: ContractSpec, points):
    lo = c.d + c.u - c.b
    return _grid(lo, c.d, points)[1:]


def preset_h_bm(points=201):
    rw = ConstantReward(100.0)
    pens = {"constant": ConstantPenalty(H_BM_CONSTANT_FEE), "c1": LinearC1(), "c2": QuadraticC2()}
    series = {name: (lambda th, pen=pen: du.h_surplus(BM_H, H_BM_CONTRACT, rw, pen, th))
              for name, pen in pens.items()}
    return tabulate_columns(_theta_grid(H_BM_CONTRACT, points), series)


def _fit_table(model, c, rw, pen, half_width, points):
    """Left series k~(x, u) for x <= theta*, right series h_>(x, u, theta*) for x >= theta*."""
    ts = du.find_theta_star_drawup(model, c, rw, pen).theta_star
    if ts is None:
        raise DomainError("no stopping threshold: h_> has no positive maximum")
    lo, hi = max(ts - half_width, 0.0), min(ts + half_width, c.a)
    xs = np.union1d(_grid(lo, hi, points), [ts])
    series = {
        "k_tilde_left": lambda x: (du.k_tilde_at(model, c, rw, pen, x, c.u) if x <= ts
                                   else _raise("right of theta*")),
        "h_right": lambda x: (du.h_surplus(model, c.with_(d=x), rw, pen, ts) if x >= ts
                              else _raise("left of theta*")),
    }
    t = tabulate(xs, series)
    t.notes.append(f"theta*={ts!r}")
    return t


def preset_smooth_bm(points=81):
    c = H_BM_CONTRACT
    return _fit_table(BM_FIG, c, ConstantReward(100.0), QuadraticC2(), 1.0, points)


def preset_h_cl(points=201):
    rw = LinearReward(100.0, 20.0)
    series = {f"c3(d,{c:g})": (lambda th, c=c: du.h_surplus(CL_H, H_CL_CONTRACT, rw, LinearC3(c), th))
              for c in H_CL_FEES}
    return tabulate_columns(_theta_grid(H_CL_CONTRACT, points), series)


def preset_h_cl_condition(points=101):
    rw = LinearReward(100.0, 20.0)
    series = {}
    for c_end in H_CL_FEES:
        pen = LinearC3(c_end)
        ts = du.find_theta_star_drawup(CL_H, H_CL_CONTRACT, rw, pen).theta_star
        series[f"c3(d,{c_end:g})"] = (
            lambda d, pen=pen, ts=ts:
            du.jump_stop_integral_drawup(CL_H, H_CL_CONTRACT, rw, pen, ts, d)
            if ts is not None and d < ts else _raise("outside [0, theta*)"))
    return tabulate(_grid(0.0, A, points), series)


def preset_smooth_cl(points=81):
    return _fit_table(CL_H, H_CL_CONTRACT, LinearReward(100.0, 20.0), LinearC3(35.0), 1.0, points)


PRESETS = {
    "p*bm": preset_pstar_bm,
    "fbm": preset_f_bm,
    "p*cl": preset_pstar_cl,
    "fcl": preset_f_cl,
    "ftildebm": preset_ftilde_bm,
    "gbm": preset_g_bm,
    "ftildecl": preset_ftilde_cl,
    "gcl": preset_g_cl,
    "gcl-condition": preset_g_cl_condition,
    "k_bm": preset_k_bm,
    "p*_k_bm": preset_pstar_k_bm,
    "k_cl": preset_k_cl,
    "p*_k_cl": preset_pstar_k_cl,
    "h_bm": preset_h_bm,
    "smooth_bm": preset_smooth_bm,
    "h_cl": preset_h_cl,
    "h_cl-condition": preset_h_cl_condition,
    "smooth_cl": preset_smooth_cl,
}


def run_preset(name: str) -> Table:
    if name not in PRESETS:
        raise DomainError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[name]()


# --- generic sweeps -----------------------------------------------------------


def _with_alpha(reward, alpha):
    if isinstance(reward, ConstantReward):
        return ConstantReward(alpha)
    if isinstance(reward, LinearReward):
        return LinearReward(alpha, reward.alpha2)
    raise DomainError("alpha sweeps need a constant or linear reward")


def _domain(cfg, variable):
    c = cfg.contract
    if variable == "d":
        return 0.0, c.a
    if variable == "u":
        if c.b is None:
            raise DomainError("a u sweep needs a drawup contract")
        return 0.0, c.b
    if variable in ("p", "alpha"):
        return 0.0, math.inf
    if c.b is None:
        return 0.0, c.a
    return c.d + c.u - c.b, c.d


def sweep(cfg) -> Table:
    """Sweep one variable of a run configuration."""
    s = cfg.sweep
    lo, hi = _domain(cfg, s.variable)
    if not (lo <= s.start <= hi and lo <= s.stop <= hi):
        raise DomainError(f"sweep over {s.variable} must stay inside [{lo}, {hi}]")
    if s.variable == "theta" and cfg.penalty is None:
        raise DomainError("a theta sweep needs a penalty")
    model, base, rw, pen = cfg.model, cfg.contract, cfg.reward, cfg.penalty
    drawup = base.b is not None

    def setup(x):
        c, r = base, rw
        if s.variable in ("d", "u", "p"):
            c = base.with_(**{s.variable: x})
        elif s.variable == "alpha":
            r = _with_alpha(rw, x)
        return c, r

    if s.variable == "theta":
        if drawup:
            series = {"h_surplus": lambda x: du.h_surplus(model, base, rw, pen, x)}
        else:
            series = {"g_surplus": lambda x: dd.g_surplus(model, base, rw, pen, x)}
        return tabulate_columns(_grid(s.start, s.stop, s.points), series)

    if drawup:
        series = {
            "value": lambda x: du.value_k(model, *setup(x)),
            "fair_premium": lambda x: du.fair_premium_drawup(model, *setup(x)),
        }
        if pen is not None:
            series["cancellable_value"] = lambda x: du.value_K(model, *setup(x), pen, with_conditions=False).value
    else:
        series = {
            "value": lambda x: dd.value_f(model, *setup(x)),
            "fair_premium": lambda x: dd.fair_premium(model, *setup(x)),
        }
        if pen is not None:
            series["cancellable_value"] = lambda x: dd.value_F(model, *setup(x), pen, with_conditions=False).value
    if base.p is None:
        series.pop("value")
        series.pop("cancellable_value", None)
    return tabulate(_grid(s.start, s.stop, s.points), series)


def write_csv(table: Table, stream) -> None:
    """Shortest round-trip decimal for every number; undefined points become empty cells."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(table.header)
    for x, row in zip(table.x, table.rows):
        w.writerow([repr(x), *("" if v is None else repr(v) for v in row)])


def report_notes(table: Table, stream=None) -> None:
    stream = stream if stream is not None else sys.stderr
    for note in table.notes:
        print(f"note: {note}", file=stream)
