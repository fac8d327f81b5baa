"""Command-line front end: price, sweep and validate.

Exit codes: 0 success, 2 invalid input, 3 no closed form for the
configuration, 4 degenerate contract (no fair premium), 5 failed
validation.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from typing import Optional

from . import drawdown_pricing as dd
from . import drawup_pricing as du
from .config import RunConfig, parse_config
from .errors import (
    AdmissibilityError,
    DegenerateContractError,
    DomainError,
    UnsupportedConfigurationError,
    UnsupportedModelError,
)
from .presets import PRESETS, report_notes, run_preset, sweep, write_csv
from .validation import SUITE, validate_config, validate_suite

EXIT_OK, EXIT_INVALID, EXIT_UNSUPPORTED, EXIT_DEGENERATE, EXIT_FAILED = 0, 2, 3, 4, 5

MC_HINT = ("no closed form covers this configuration; estimate it with Monte Carlo instead "
           "(add an mc block and run `validate`, or call simulation.mc_estimate)")


class UsageError(DomainError):
    """Command-line arguments are inconsistent."""


def _load_doc(path: Optional[str]) -> dict:
    try:
        if path is None or path == "-":
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        doc = json.loads(text)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    return doc


def _emit(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _plain(obj):
    if isinstance(obj, float) and obj != obj:
        return None
    return obj


def price(cfg: RunConfig) -> dict:
    """Value, fair premium, threshold and condition diagnostics for one contract."""
    m, c, rw, pen = cfg.model, cfg.contract, cfg.reward, cfg.penalty
    out = {"kind": cfg.kind}
    if cfg.kind == "drawdown":
        out["fair_premium"] = dd.fair_premium(m, c, rw)
        if c.p is not None:
            out["value"] = dd.value_f(m, c, rw)
    elif cfg.kind == "drawup":
        out["fair_premium"] = du.fair_premium_drawup(m, c, rw)
        if c.p is not None:
            out["value"] = du.value_k(m, c, rw)
    else:
        if c.p is None:
            raise UsageError(f"kind {cfg.kind} needs contract.p")
        q = dd.value_F(m, c, rw, pen) if cfg.kind == "drawdown-cancellable" else du.value_K(m, c, rw, pen)
        out.update(q.as_dict())
        if q.fair_premium is None:
            raise DegenerateContractError("the plain contract has no fair premium at this state")
    if cfg.solve_premium and "fair_premium" not in out:
        out["fair_premium"] = None
    return {k: _plain(v) for k, v in out.items()}


def _price_text(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    keys = [k for k in ("value", "fair_premium", "theta_star") if k in report]
    buf = io.StringIO()
    buf.write(",".join(keys) + "\n")
    buf.write(",".join("" if report[k] is None else repr(float(report[k])) for k in keys) + "\n")
    return buf.getvalue()


def cmd_price(args) -> int:
    cfg = parse_config(_load_doc(args.config), args.seed_override)
    report = price(cfg)
    _emit(_price_text(report, cfg.output_format), args.out or cfg.output_path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {', '.join(PRESETS)}")
        table = run_preset(args.preset)
        out_path = args.out
    else:
        cfg = parse_config(_load_doc(args.config), args.seed_override)
        if cfg.sweep is None:
            raise UsageError("sweep needs a sweep block in the config or --preset")
        table = sweep(cfg)
        out_path = args.out or cfg.output_path
    buf = io.StringIO()
    write_csv(table, buf)
    _emit(buf.getvalue(), out_path)
    report_notes(table)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.preset is not None:
        names = list(SUITE) if args.preset == "suite" else [args.preset]
        unknown = [n for n in names if n not in SUITE]
        if unknown:
            raise UsageError(f"unknown validation case {unknown[0]!r}; choose 'suite' or one of {', '.join(SUITE)}")
        mc = None if args.seed_override is None else {"seed": args.seed_override}
        report = validate_suite(names, mc=mc)
    else:
        doc = _load_doc(args.config)
        if "mc" not in doc:
            raise UsageError("validate needs an mc block in the config")
        cfg = parse_config(doc, args.seed_override)
        report = validate_config(cfg, label=cfg.kind, analytic_model=cfg.analytic_model)
    _emit(report.table() + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drawdown-contracts",
        description="Price drawdown and drawup insurance contracts and check them against Monte Carlo.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, preset_help=None):
        p.add_argument("--config", help="JSON config file ('-' or omitted: read stdin)")
        if preset_help:
            p.add_argument("--preset", help=preset_help)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed-override", dest="seed_override", type=int, help="replace mc.seed")

    p = sub.add_parser("price", help="value, fair premium and threshold of one contract")
    common(p)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("sweep", help="CSV series over one variable or a named preset")
    common(p, "named preset: " + ", ".join(PRESETS))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="analytic values against Monte Carlo")
    common(p, "'suite' for every built-in case, or one of: " + ", ".join(SUITE))
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UnsupportedConfigurationError, UnsupportedModelError) as exc:
        print(f"error: {exc}\nhint: {MC_HINT}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except DegenerateContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (DomainError, AdmissibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
