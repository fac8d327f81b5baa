"""Monte Carlo oracle for drawdown and drawup first-passage functionals.

Paths start at X_0 = 0 with running maximum seeded at d and running
minimum seeded at -u, so that D_t = max(d, sup X) - X_t and
U_t = X_t - min(-u, inf X).

Cramer-Lundberg paths are simulated exactly: between claims the path
rises linearly, so every upward crossing time solves a linear equation,
and downward triggers can only fire at claim instants.

Brownian paths use exact Gaussian increments on an adaptive time grid.
The step shrinks like (distance to the nearest trigger / (k sigma))^2
and is capped by ``McConfig.time_step``.  Level crossings inside a step
are detected with the exact Brownian-bridge law of the step maximum and
minimum (each sampled from its own marginal), and a crossing is dated at
the middle of the step.  Near a trigger the step is at most
``time_step * 1e-4``, so the dating error is negligible.

Random numbers come from Philox streams keyed by (seed, block index),
so results are bit-identical for any thread count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .contracts import ContractSpec, penalty_fee
from .errors import DomainError
from .levy_models import CramerLundberg, LinearBrownian

THREADS_ENV = "DRAWDOWN_CONTRACTS_THREADS"

CAPPED, DRAWDOWN, DRAWUP, LOWER, UPPER = 0, 1, 2, 3, 4
KIND_NAMES = {
    CAPPED: "HorizonCapped",
    DRAWDOWN: "DrawdownHit",
    DRAWUP: "DrawupHit",
    LOWER: "LowerExit",
    UPPER: "UpperExit",
}


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    ``time_step`` is the largest step of the adaptive Brownian scheme;
    it is ignored for Cramer-Lundberg paths.  ``horizon_cap`` defaults
    to ln(1e6)/r, where the discount factor drops below 1e-6.
    """

    n_paths: int = 100_000
    seed: int = 20240601
    time_step: float = 8.0
    horizon_cap: Optional[float] = None
    stream_stride: int = 32768
    antithetic: bool = True
    level_sigmas: float = 4.0
    threads: Optional[int] = None
    target_rel_precision: Optional[float] = None

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 100:
            raise DomainError(f"n_paths must be an integer >= 100, got {self.n_paths}")
        if not self.time_step > 0:
            raise DomainError("time_step must be positive")
        if self.horizon_cap is not None and not self.horizon_cap > 0:
            raise DomainError("horizon_cap must be positive")
        if self.stream_stride < 2 or self.stream_stride % 2:
            raise DomainError("stream_stride must be an even integer >= 2")
        if not self.level_sigmas > 0:
            raise DomainError("level_sigmas must be positive")

    def cap_for(self, r: float) -> float:
        if self.horizon_cap is not None:
            return float(self.horizon_cap)
        if r > 0:
            return math.log(1e6) / r
        return 1e4


@dataclass(frozen=True)
class Levels:
    """Trigger geometry of one simulation, relative to X_0 = 0.

    ``a`` and ``b`` are the drawdown and drawup triggers; ``lower`` and
    ``upper`` are fixed exit levels (X < lower, X > upper).  All of those
    end the path.  ``watch`` is a fixed level whose first up-crossing
    (X > watch) is recorded without stopping the path.
    """

    a: Optional[float] = None
    b: Optional[float] = None
    d: float = 0.0
    u: float = 0.0
    lower: Optional[float] = None
    upper: Optional[float] = None
    watch: Optional[float] = None

    def __post_init__(self):
        if all(v is None for v in (self.a, self.b, self.lower, self.upper)):
            raise DomainError("at least one terminal trigger is required")


@dataclass
class PathEvents:
    """Per-path outcome arrays of one simulation run."""

    kind: np.ndarray
    time: np.ndarray
    drawdown_at_event: np.ndarray
    drawup_at_event: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray
    watch_time: np.ndarray
    pair: np.ndarray
    horizon: float

    @property
    def n_paths(self) -> int:
        return self.kind.size

    def discount(self, r: float, kinds=None) -> np.ndarray:
        """exp(-r tau) on paths whose terminal kind is in ``kinds`` (all terminal kinds by default)."""
        hit = self.kind != CAPPED if kinds is None else np.isin(self.kind, kinds)
        out = np.zeros(self.n_paths)
        out[hit] = np.exp(-r * self.time[hit])
        return out

    def watch_discount(self, r: float) -> np.ndarray:
        hit = np.isfinite(self.watch_time)
        out = np.zeros(self.n_paths)
        out[hit] = np.exp(-r * self.watch_time[hit])
        return out

    @property
    def watched(self) -> np.ndarray:
        return np.isfinite(self.watch_time)

    @property
    def capped_fraction(self) -> float:
        return float(np.mean(self.kind == CAPPED))


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with its standard error and bookkeeping."""

    mean: float
    std_error: float
    n_paths: int
    truncation_bias_bound: float
    config_fingerprint: str
    warning: Optional[str] = None

    def z_score(self, reference: float) -> float:
        spread = math.hypot(self.std_error, self.truncation_bias_bound)
        if spread == 0:
            return 0.0 if self.mean == reference else math.inf
        return (self.mean - reference) / spread


# --- path engines ----------------------------------------------------------


class _Block:
    """Result buffers for one block of paths."""

    def __init__(self, n: int):
        self.kind = np.zeros(n, dtype=np.int8)
        self.time = np.full(n, np.inf)
        self.d_at = np.full(n, np.nan)
        self.u_at = np.full(n, np.nan)
        self.x_min = np.zeros(n)
        self.x_max = np.zeros(n)
        self.watch_time = np.full(n, np.inf)


def _immediate(model, lv: Levels, n: int, blk: _Block) -> np.ndarray:
    """Resolve events at time 0; returns the mask of paths still running."""
    bm = isinstance(model, LinearBrownian)
    code = None
    if lv.a is not None and (lv.d > lv.a or (bm and lv.d >= lv.a)):
        code, d_at = DRAWDOWN, lv.d
    elif lv.b is not None and lv.u >= lv.b:
        code, d_at = DRAWUP, lv.d
    elif lv.lower is not None and (lv.lower > 0 or (bm and lv.lower >= 0)):
        code, d_at = LOWER, lv.d
    elif lv.upper is not None and lv.upper <= 0:
        code, d_at = UPPER, lv.d
    if lv.watch is not None and lv.watch <= 0 and code is None:
        blk.watch_time[:] = 0.0
    if code is None:
        return np.ones(n, dtype=bool)
    blk.kind[:] = code
    blk.time[:] = 0.0
    blk.d_at[:] = d_at
    blk.u_at[:] = lv.u
    return np.zeros(n, dtype=bool)


def _simulate_bm_block(model: LinearBrownian, lv: Levels, cfg: McConfig, cap: float,
                       rng: np.random.Generator, n: int) -> _Block:
    mu, sig = model.mu, model.sigma
    blk = _Block(n)
    running = _immediate(model, lv, n, blk)
    ids = np.flatnonzero(running)
    if ids.size == 0:
        return blk

    paired = cfg.antithetic and n >= 2
    n_pairs = n // 2 if paired else n
    if paired:
        pair_of = np.arange(n) % n_pairs
        sign_of = np.where(np.arange(n) < n_pairs, 1.0, -1.0)
        if n % 2:  # odd tail path gets its own slot
            pair_of[-1] = n_pairs
            sign_of[-1] = 1.0
            n_pairs += 1
    else:
        pair_of = np.arange(n)
        sign_of = np.ones(n)

    x = np.zeros(ids.size)
    hi = np.zeros(ids.size)
    lo = np.zeros(ids.size)
    t = np.zeros(ids.size)
    watching = np.full(ids.size, lv.watch is not None) & ~np.isfinite(blk.watch_time[ids])

    dt_max = cfg.time_step
    dt_min = cfg.time_step * 1e-4
    inv_ks2 = 1.0 / (cfg.level_sigmas * sig) ** 2
    var_rate = 2.0 * sig * sig

    while ids.size:
        big_m = np.maximum(hi, lv.d)
        small_m = np.minimum(lo, -lv.u)
        dist = np.full(ids.size, np.inf)
        term_dists = []
        if lv.a is not None:
            s_dd = x - (big_m - lv.a)
            term_dists.append(s_dd)
            np.minimum(dist, s_dd, out=dist)
        if lv.b is not None:
            s_du = small_m + lv.b - x
            term_dists.append(s_du)
            np.minimum(dist, s_du, out=dist)
        if lv.lower is not None:
            s_lo = x - lv.lower
            term_dists.append(s_lo)
            np.minimum(dist, s_lo, out=dist)
        if lv.upper is not None:
            s_up = lv.upper - x
            term_dists.append(s_up)
            np.minimum(dist, s_up, out=dist)
        if lv.watch is not None:
            s_w = np.where(watching, lv.watch - x, np.inf)
            np.minimum(dist, s_w, out=dist)

        dt = np.clip(dist * dist * inv_ks2, dt_min, dt_max)
        np.minimum(dt, cap - t, out=dt)

        # antithetic draws: one (Z, U1, U2) triple per active pair
        slot_active = np.zeros(n_pairs, dtype=bool)
        slot_active[pair_of[ids]] = True
        k = int(slot_active.sum())
        slot_rank = np.cumsum(slot_active) - 1
        z = rng.standard_normal(k)
        uu = rng.random((2, k))
        pos = slot_rank[pair_of[ids]]
        sgn = sign_of[ids]
        flip = sgn < 0
        u_max = np.where(flip, uu[1, pos], uu[0, pos])
        u_min = np.where(flip, uu[0, pos], uu[1, pos])

        sd2 = var_rate * dt
        incr = mu * dt + np.sqrt(dt) * sig * sgn * z[pos]
        x1 = x + incr
        inc2 = incr * incr
        mid = x + 0.5 * incr
        mx = mid + 0.5 * np.sqrt(inc2 - sd2 * np.log1p(-u_max))
        mn = mid - 0.5 * np.sqrt(inc2 - sd2 * np.log1p(-u_min))

        new_hi = np.maximum(big_m, mx)
        new_lo = np.minimum(small_m, mn)
        hits = []
        if lv.a is not None:
            hits.append((mn < big_m - lv.a) | (x1 < new_hi - lv.a))
        if lv.b is not None:
            hits.append((mx > small_m + lv.b) | (x1 > new_lo + lv.b))
        if lv.lower is not None:
            hits.append(mn < lv.lower)
        if lv.upper is not None:
            hits.append(mx > lv.upper)
        kinds = [c for c, v in ((DRAWDOWN, lv.a), (DRAWUP, lv.b), (LOWER, lv.lower), (UPPER, lv.upper))
                 if v is not None]

        any_hit = np.zeros(ids.size, dtype=bool)
        for h in hits:
            any_hit |= h
        t_mid = t + 0.5 * dt

        if lv.watch is not None:
            w_hit = watching & (mx > lv.watch)
            if np.any(w_hit):
                # a terminal trigger in the same step wins only if it was nearer at step start
                term_near = np.full(ids.size, np.inf)
                for h, s in zip(hits, term_dists):
                    term_near = np.where(h, np.minimum(term_near, s), term_near)
                w_first = w_hit & (s_w <= term_near)
                blk.watch_time[ids[w_first]] = t_mid[w_first]
                watching &= ~w_hit

        if np.any(any_hit):
            sel = np.flatnonzero(any_hit)
            stack = np.vstack([np.where(h[sel], s[sel], np.inf) for h, s in zip(hits, term_dists)])
            choice = np.argmin(stack, axis=0)
            code = np.asarray(kinds, dtype=np.int8)[choice]
            gid = ids[sel]
            blk.kind[gid] = code
            blk.time[gid] = t_mid[sel]
            hi_s, lo_s = new_hi[sel], new_lo[sel]
            level = np.select(
                [code == DRAWDOWN, code == DRAWUP, code == LOWER, code == UPPER],
                [
                    big_m[sel] - (lv.a if lv.a is not None else 0.0),
                    small_m[sel] + (lv.b if lv.b is not None else 0.0),
                    np.full(sel.size, lv.lower if lv.lower is not None else 0.0),
                    np.full(sel.size, lv.upper if lv.upper is not None else 0.0),
                ],
            )
            blk.d_at[gid] = np.where(code == DRAWDOWN, lv.a if lv.a is not None else 0.0,
                                     np.maximum(hi_s, level) - level)
            blk.u_at[gid] = np.where(code == DRAWUP, lv.b if lv.b is not None else 0.0,
                                     level - np.minimum(lo_s, level))
            blk.x_min[gid] = np.minimum(np.minimum(lo[sel], mn[sel]), level)
            blk.x_max[gid] = np.maximum(np.maximum(hi[sel], mx[sel]), level)

        t = t + dt
        capped = ~any_hit & (t >= cap)
        if np.any(capped):
            gid = ids[capped]
            blk.kind[gid] = CAPPED
            blk.time[gid] = np.inf
            blk.x_min[gid] = np.minimum(lo[capped], mn[capped])
            blk.x_max[gid] = np.maximum(hi[capped], mx[capped])

        keep = ~(any_hit | capped)
        if keep.all():
            x, hi, lo = x1, np.maximum(hi, mx), np.minimum(lo, mn)
        else:
            ids = ids[keep]
            x = x1[keep]
            hi = np.maximum(hi, mx)[keep]
            lo = np.minimum(lo, mn)[keep]
            t = t[keep]
            watching = watching[keep]
    return blk


def _simulate_cl_block(model: CramerLundberg, lv: Levels, cfg: McConfig, cap: float,
                       rng: np.random.Generator, n: int) -> _Block:
    drift, beta, rho = model.mu_hat, model.beta, model.rho
    blk = _Block(n)
    running = _immediate(model, lv, n, blk)
    ids = np.flatnonzero(running)
    x = np.zeros(ids.size)
    hi = np.zeros(ids.size)
    lo = np.zeros(ids.size)
    t = np.zeros(ids.size)
    watching = np.full(ids.size, lv.watch is not None) & ~np.isfinite(blk.watch_time[ids])

    while ids.size:
        m = ids.size
        gap = rng.exponential(1.0 / beta, m)
        claim = rng.exponential(1.0 / rho, m)
        horizon_left = cap - t
        small_m = np.minimum(lo, -lv.u)

        s_up = np.full(m, np.inf)
        up_code = np.full(m, UPPER, dtype=np.int8)
        if lv.b is not None:
            s_up = (small_m + lv.b - x) / drift
            up_code[:] = DRAWUP
        if lv.upper is not None:
            s_h = (lv.upper - x) / drift
            up_code = np.where(s_h < s_up, UPPER, up_code).astype(np.int8)
            s_up = np.minimum(s_up, s_h)
        seg = np.minimum(gap, horizon_left)

        if lv.watch is not None:
            s_w = (lv.watch - x) / drift
            w_hit = watching & (s_w <= seg) & (s_w <= s_up)
            blk.watch_time[ids[w_hit]] = t[w_hit] + s_w[w_hit]
            watching &= ~w_hit

        done = np.zeros(m, dtype=bool)
        up_hit = s_up <= seg
        if np.any(up_hit):
            gid = ids[up_hit]
            level = x[up_hit] + drift * s_up[up_hit]
            blk.kind[gid] = up_code[up_hit]
            blk.time[gid] = t[up_hit] + s_up[up_hit]
            blk.d_at[gid] = np.maximum(np.maximum(hi[up_hit], level), lv.d) - level
            blk.u_at[gid] = level - small_m[up_hit]
            blk.x_min[gid] = lo[up_hit]
            blk.x_max[gid] = np.maximum(hi[up_hit], level)
            done |= up_hit

        capped = ~done & (gap > horizon_left)
        if np.any(capped):
            gid = ids[capped]
            blk.kind[gid] = CAPPED
            blk.time[gid] = np.inf
            blk.x_min[gid] = lo[capped]
            blk.x_max[gid] = np.maximum(hi[capped], x[capped] + drift * horizon_left[capped])
            done |= capped

        jump = ~done
        peak = x + drift * gap
        hi = np.where(jump, np.maximum(hi, peak), hi)
        x = np.where(jump, peak - claim, x)
        lo = np.where(jump, np.minimum(lo, x), lo)
        t = np.where(jump, t + gap, t)

        term = np.zeros(m, dtype=bool)
        code = np.zeros(m, dtype=np.int8)
        if lv.lower is not None:
            low_hit = jump & (x < lv.lower)
            code[low_hit] = LOWER
            term |= low_hit
        if lv.a is not None:
            dd_hit = jump & (np.maximum(hi, lv.d) - x > lv.a)
            code[dd_hit] = DRAWDOWN
            term |= dd_hit
        if np.any(term):
            gid = ids[term]
            blk.kind[gid] = code[term]
            blk.time[gid] = t[term]
            blk.d_at[gid] = np.maximum(hi[term], lv.d) - x[term]
            blk.u_at[gid] = x[term] - np.minimum(lo[term], -lv.u)
            blk.x_min[gid] = lo[term]
            blk.x_max[gid] = hi[term]
            done |= term

        if np.any(done):
            keep = ~done
            ids, x, hi, lo, t, watching = ids[keep], x[keep], hi[keep], lo[keep], t[keep], watching[keep]
    return blk


def _thread_count(cfg: McConfig) -> int:
    if cfg.threads is not None:
        return max(1, int(cfg.threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def simulate_first_passage(model, levels: Levels, config: McConfig, r: float = 0.0) -> PathEvents:
    """Simulate ``config.n_paths`` paths until a terminal trigger or the horizon cap."""
    if isinstance(model, LinearBrownian):
        engine = _simulate_bm_block
    elif isinstance(model, CramerLundberg):
        engine = _simulate_cl_block
    else:
        raise DomainError(f"cannot simulate model {type(model).__name__}")
    cap = config.cap_for(r)
    n = int(config.n_paths)
    stride = config.stream_stride
    starts = list(range(0, n, stride))

    def run(block_index: int) -> _Block:
        size = min(stride, n - starts[block_index])
        seq = np.random.SeedSequence([int(config.seed) & (2**63 - 1), block_index])
        rng = np.random.Generator(np.random.Philox(seq))
        return engine(model, levels, config, cap, rng, size)

    workers = min(_thread_count(config), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run, range(len(starts))))
    else:
        blocks = [run(i) for i in range(len(starts))]

    pairs = []
    for i, start in enumerate(starts):
        size = min(stride, n - start)
        local = np.arange(size)
        if config.antithetic and isinstance(model, LinearBrownian):
            half = size // 2
            pid = local % half if half else local
            if size % 2:
                pid[-1] = half
        else:
            pid = local
        pairs.append(pid + start)

    def cat(name):
        return np.concatenate([getattr(b, name) for b in blocks])

    return PathEvents(
        kind=cat("kind"),
        time=cat("time"),
        drawdown_at_event=cat("d_at"),
        drawup_at_event=cat("u_at"),
        x_min=cat("x_min"),
        x_max=cat("x_max"),
        watch_time=cat("watch_time"),
        pair=np.concatenate(pairs),
        horizon=cap,
    )


def write_event_csv(events: PathEvents, stream) -> None:
    """Write one record per path: path_index,kind,time,drawdown_at_event,drawup_at_event."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["path_index", "kind", "time", "drawdown_at_event", "drawup_at_event"])
    for i in range(events.n_paths):
        writer.writerow([
            i,
            KIND_NAMES[int(events.kind[i])],
            repr(float(events.time[i])) if np.isfinite(events.time[i]) else "",
            repr(float(events.drawdown_at_event[i])) if np.isfinite(events.drawdown_at_event[i]) else "",
            repr(float(events.drawup_at_event[i])) if np.isfinite(events.drawup_at_event[i]) else "",
        ])


# --- estimators ------------------------------------------------------------


def fingerprint(config: McConfig, **inputs) -> str:
    """SHA-256 of the configuration and the inputs that define the estimated quantity."""

    def plain(obj):
        if hasattr(obj, "__dataclass_fields__"):
            return {"type": type(obj).__name__, **{k: plain(v) for k, v in asdict(obj).items()}}
        if isinstance(obj, dict):
            return {k: plain(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [plain(v) for v in obj]
        if isinstance(obj, float):
            return repr(obj)
        return obj

    cfg = asdict(config)
    cfg.pop("threads")
    blob = json.dumps({"config": cfg, "inputs": plain(inputs)}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _pair_means(values: np.ndarray, pair: np.ndarray) -> np.ndarray:
    counts = np.bincount(pair)
    sums = np.bincount(pair, weights=values)
    used = counts > 0
    return sums[used] / counts[used]


def estimate_mean(values: np.ndarray, events: PathEvents, tail_bound: float, fp: str,
                  rel_precision: Optional[float] = None) -> McEstimate:
    """Mean and standard error, treating antithetic pairs as single samples."""
    pm = _pair_means(np.asarray(values, dtype=float), events.pair)
    mean = float(np.mean(values))
    se = float(np.std(pm, ddof=1) / math.sqrt(pm.size)) if pm.size > 1 else 0.0
    bias = events.capped_fraction * tail_bound
    warning = None
    if rel_precision is not None and mean != 0 and se / abs(mean) > rel_precision:
        warning = f"relative standard error {se / abs(mean):.3g} exceeds target {rel_precision:.3g}"
    return McEstimate(mean, se, events.n_paths, bias, fp, warning)


def estimate_ratio(num: np.ndarray, den: np.ndarray, scale: float, events: PathEvents,
                   tail_bound: float, fp: str) -> McEstimate:
    """scale * mean(num) / mean(den) with a delta-method standard error."""
    pn = _pair_means(num, events.pair)
    pd_ = _pair_means(den, events.pair)
    mn, md = float(np.mean(num)), float(np.mean(den))
    k = pn.size
    warning = None
    if k < 2:
        return McEstimate(math.nan, math.nan, events.n_paths, math.nan, fp, "too few samples")
    cov = np.cov(pn, pd_, ddof=1) / k
    se_den = math.sqrt(cov[1, 1])
    if abs(md) <= 3 * se_den or md == 0:
        warning = "denominator is within 3 standard errors of zero; fair premium is degenerate"
        if md == 0:
            return McEstimate(math.inf, math.inf, events.n_paths, 0.0, fp, warning)
    ratio = mn / md
    var = (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio * ratio * cov[1, 1]) / (md * md)
    se = abs(scale) * math.sqrt(max(var, 0.0))
    bias = abs(scale) * events.capped_fraction * tail_bound / max(abs(md), 1e-300)
    return McEstimate(scale * ratio, se, events.n_paths, bias, fp, warning)


# --- contract-level targets ------------------------------------------------

TARGETS = (
    "xi", "reward_transform", "value_f", "g_surplus", "value_F",
    "lambda", "nu", "N", "value_k", "h_surplus", "value_K", "m2_transform",
)


@dataclass
class ContractPaths:
    """Simulated paths for one contract plus the per-path cash-flow legs."""

    events: PathEvents
    contract: ContractSpec
    reward: object
    penalty: object = None
    theta: Optional[float] = None
    legs: dict = field(default_factory=dict)


def _levels_for(contract: ContractSpec, theta: Optional[float]) -> Levels:
    watch = None if theta is None else contract.d - theta
    return Levels(a=contract.a, b=contract.b, d=contract.d, u=contract.u, watch=watch)


def simulate_contract(model, contract: ContractSpec, reward, config: McConfig,
                      penalty=None, theta: Optional[float] = None) -> ContractPaths:
    """Simulate a drawdown (b absent) or drawup-contingent contract.

    With ``theta`` given, the first time the drawdown falls below theta
    (equivalently X crosses d - theta upwards) is recorded as the
    cancellation time.
    """
    if theta is not None and penalty is None:
        raise DomainError("a cancellation threshold needs a penalty")
    ev = simulate_first_passage(model, _levels_for(contract, theta), config, contract.r)
    r = contract.r
    p = contract.p or 0.0
    out = ContractPaths(ev, contract, reward, penalty, theta)
    dd = ev.kind == DRAWDOWN
    disc_any = ev.discount(r)
    disc_dd = ev.discount(r, [DRAWDOWN])
    payout = np.zeros(ev.n_paths)
    payout[dd] = disc_dd[dd] * np.asarray(reward(ev.drawdown_at_event[dd]), dtype=float)
    legs = out.legs
    legs["xi"] = disc_dd
    legs["reward"] = payout
    legs["any"] = disc_any
    legs["drawup"] = ev.discount(r, [DRAWUP])
    if r > 0:
        legs["value"] = (p / r) * (disc_any - 1.0) + payout
    if theta is not None and r > 0:
        first = ev.watched & ((ev.kind == CAPPED) | (ev.watch_time <= ev.time))
        fee_at = max(theta, 0.0) if theta < contract.d else contract.d
        fee = float(penalty_fee(penalty, fee_at, p, r, contract.a))
        wd = ev.watch_discount(r)
        stopped = np.where(first, (p / r) * (wd - 1.0) - wd * fee, legs["value"])
        legs["stopped"] = stopped
        legs["surplus"] = stopped - legs["value"]
    return out


def _tail_bound(paths: ContractPaths, leg: str) -> float:
    ev, c = paths.events, paths.contract
    disc_cap = math.exp(-c.r * ev.horizon) if c.r > 0 else 1.0
    p = c.p or 0.0
    premium = p / c.r if c.r > 0 else 0.0
    if leg in ("xi", "any", "drawup"):
        size = 1.0
    else:
        probe = np.linspace(c.a, c.a + 60.0, 121)
        size = float(np.max(np.abs(paths.reward(probe)))) + premium
        if leg in ("stopped", "surplus") and paths.penalty is not None:
            size += float(np.max(penalty_fee(paths.penalty, np.linspace(0, c.a, 101), p, c.r, c.a)))
    return disc_cap * size


def estimate_leg(paths: ContractPaths, leg: str, config: McConfig, target: str) -> McEstimate:
    fp = fingerprint(config, target=target, contract=paths.contract, reward=paths.reward,
                     penalty=paths.penalty, theta=paths.theta)
    return estimate_mean(paths.legs[leg], paths.events, _tail_bound(paths, leg), fp,
                         config.target_rel_precision)


_TARGET_LEG = {
    "xi": "xi", "reward_transform": "reward", "value_f": "value",
    "g_surplus": "surplus", "value_F": "stopped",
    "lambda": "drawup", "nu": "xi", "N": "reward", "value_k": "value",
    "h_surplus": "surplus", "value_K": "stopped",
}


def mc_estimate(model, contract: ContractSpec, reward, target: str, config: McConfig,
                penalty=None, theta: Optional[float] = None,
                u_arg: float = 0.0, v: Optional[float] = None) -> McEstimate:
    """Monte Carlo estimate of one analytic target.

    Drawdown targets (xi, reward_transform, value_f, g_surplus, value_F)
    need a contract without b; drawup targets (lambda, nu, N, value_k,
    h_surplus, value_K) need b.  Threshold targets need ``theta`` and a
    penalty.  ``m2_transform`` uses only contract.r and contract.b.
    """
    if target not in TARGETS:
        raise DomainError(f"unknown target {target!r}; choose from {', '.join(TARGETS)}")
    if target == "m2_transform":
        return mc_triple_transform(model, contract.r, contract.b, u_arg, v, config)
    drawup = target in ("lambda", "nu", "N", "value_k", "h_surplus", "value_K")
    if drawup and contract.b is None:
        raise DomainError(f"target {target} needs a drawup level b")
    if not drawup and contract.b is not None:
        raise DomainError(f"target {target} is defined for contracts without a drawup level")
    if target in ("g_surplus", "value_F", "h_surplus", "value_K") and theta is None:
        raise DomainError(f"target {target} needs a threshold theta")
    if target in ("value_f", "value_k", "g_surplus", "value_F", "h_surplus", "value_K"):
        contract.premium()
        if contract.r <= 0:
            raise DomainError("premium-paying targets need r > 0")
    paths = simulate_contract(model, contract, reward, config, penalty,
                              theta if target in ("g_surplus", "value_F", "h_surplus", "value_K") else None)
    return estimate_leg(paths, _TARGET_LEG[target], config, target)


def mc_fair_premium(model, contract: ContractSpec, reward, config: McConfig) -> McEstimate:
    """Ratio estimate r * E[reward leg] / (1 - E[exp(-r tau)])."""
    if contract.r <= 0:
        raise DomainError("fair premium needs r > 0")
    paths = simulate_contract(model, contract.with_(p=0.0), reward, config)
    fp = fingerprint(config, target="fair_premium", contract=contract, reward=reward)
    den = 1.0 - paths.legs["any"]
    return estimate_ratio(paths.legs["reward"], den, contract.r, paths.events,
                          _tail_bound(paths, "reward"), fp)


def mc_two_sided(model, r: float, x: float, a: float, config: McConfig) -> tuple[McEstimate, McEstimate]:
    """Estimates of E_x[exp(-r T_a^+); T_a^+ < T_0^-] and E_x[exp(-r T_0^-); T_0^- < T_a^+]."""
    if not 0 <= x <= a:
        raise DomainError("starting point must lie in [0, a]")
    ev = simulate_first_passage(model, Levels(lower=-x, upper=a - x), config, r)
    tail = math.exp(-r * ev.horizon) if r > 0 else 1.0
    up = ev.discount(r, [UPPER])
    down = ev.discount(r, [LOWER])
    fp_up = fingerprint(config, target="two_sided_up", model=model, r=r, x=x, a=a)
    fp_dn = fingerprint(config, target="two_sided_down", model=model, r=r, x=x, a=a)
    return (estimate_mean(up, ev, tail, fp_up), estimate_mean(down, ev, tail, fp_dn))


def mc_triple_transform(model, r: float, b: float, u_arg: float, v: float, config: McConfig) -> McEstimate:
    """Estimate of E[exp(-r T + u_arg * inf X); sup X < v] with T the first time the drawup exceeds b."""
    if b is None or not 0 < v <= b:
        raise DomainError("need 0 < v <= b")
    ev = simulate_first_passage(model, Levels(b=b), config, r)
    disc = ev.discount(r, [DRAWUP])
    vals = disc * np.exp(u_arg * np.minimum(ev.x_min, 0.0)) * (ev.x_max < v)
    tail = math.exp(-r * ev.horizon) if r > 0 else 1.0
    fp = fingerprint(config, target="m2_transform", model=model, r=r, b=b, u_arg=u_arg, v=v)
    return estimate_mean(vals, ev, tail, fp)
