import csv
import io
import json

import pytest

from drawdown_contracts import drawdown_pricing as dd
from drawdown_contracts.cli import (
    EXIT_DEGENERATE,
    EXIT_FAILED,
    EXIT_INVALID,
    EXIT_OK,
    EXIT_UNSUPPORTED,
    main,
)
from drawdown_contracts.config import ConfigError, parse_config
from drawdown_contracts.contracts import ConstantReward, ContractSpec, LinearC1
from drawdown_contracts.presets import PRESETS, run_preset

from conftest import BM

BM_BLOCK = {"type": "brownian", "mu": 0.03, "sigma": 0.4}
CL_BLOCK = {"type": "cramer-lundberg", "mu_hat": 0.05, "beta": 0.1, "rho": 2.5}
ALPHA = {"type": "constant", "alpha": 100}


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_price_fair_premium(tmp_path, capsys):
    doc = {"kind": "drawdown", "solve_premium": True, "model": BM_BLOCK, "reward": ALPHA,
           "contract": {"a": 10, "r": 0.01, "d": 0}}
    code, out, _ = run(["price", "--config", write(tmp_path, doc)], capsys)
    assert code == EXIT_OK
    expected = dd.fair_premium(BM, ContractSpec(a=10.0, r=0.01), ConstantReward(100.0))
    assert json.loads(out)["fair_premium"] == expected


def test_price_cancellable_reports_threshold_and_conditions(tmp_path, capsys):
    doc = {"kind": "drawdown-cancellable", "model": BM_BLOCK, "reward": ALPHA,
           "penalty": {"type": "linear-c1"}, "contract": {"a": 10, "r": 0.01, "p": 0.2, "d": 7}}
    code, out, _ = run(["price", "--config", write(tmp_path, doc)], capsys)
    report = json.loads(out)
    assert code == EXIT_OK
    assert report["theta_star"] > 0
    assert report["conditions"]["continuous_fit"]["holds"]


def test_price_csv_output(tmp_path, capsys):
    doc = {"kind": "drawup", "model": BM_BLOCK, "reward": ALPHA, "output": {"format": "csv"},
           "contract": {"a": 10, "b": 8, "r": 0.01, "p": 0.5, "d": 4, "u": 2}}
    code, out, _ = run(["price", "--config", write(tmp_path, doc)], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == EXIT_OK
    assert rows[0] == ["value", "fair_premium"]
    assert float(rows[1][1]) > 0


def test_drawup_b_above_a_is_rejected(tmp_path, capsys):
    doc = {"kind": "drawup", "model": BM_BLOCK, "reward": ALPHA,
           "contract": {"a": 10, "b": 12, "r": 0.01, "p": 1}}
    out_file = tmp_path / "out.json"
    code, out, err = run(["price", "--config", write(tmp_path, doc), "--out", str(out_file)], capsys)
    assert code == EXIT_INVALID
    assert "contract.b" in err
    assert not out_file.exists()


def test_cl_unequal_levels_is_unsupported(tmp_path, capsys):
    doc = {"kind": "drawup", "model": CL_BLOCK, "reward": ALPHA,
           "contract": {"a": 10, "b": 8, "r": 0.01, "p": 1}}
    code, _, err = run(["price", "--config", write(tmp_path, doc)], capsys)
    assert code == EXIT_UNSUPPORTED
    assert "Monte Carlo" in err


def test_degenerate_contract(tmp_path, capsys):
    doc = {"kind": "drawdown", "model": BM_BLOCK, "reward": ALPHA, "contract": {"a": 10, "r": 0.01, "d": 10}}
    code, _, _ = run(["price", "--config", write(tmp_path, doc)], capsys)
    assert code == EXIT_DEGENERATE


@pytest.mark.parametrize("doc,fragment", [
    ({"model": BM_BLOCK, "reward": ALPHA, "contract": {"a": 10}}, "r"),
    ({"kind": "drawup", "model": BM_BLOCK, "reward": ALPHA, "contract": {"a": 10, "r": 0.01}}, "contract.b"),
    ({"kind": "drawdown-cancellable", "model": BM_BLOCK, "reward": ALPHA,
      "contract": {"a": 10, "r": 0.01, "p": 0.1}}, "penalty"),
    ({"kind": "drawdown", "model": BM_BLOCK, "reward": ALPHA,
      "contract": {"a": 10, "b": 5, "r": 0.01}}, "drawup"),
    ({"model": {"type": "brownian", "mu": 0.03, "sigma": -1}, "reward": ALPHA,
      "contract": {"a": 10, "r": 0.01}}, "model"),
])
def test_config_errors(doc, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(doc)


def test_invalid_json_and_stdin(tmp_path, capsys, monkeypatch):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, _ = run(["price", "--config", str(bad)], capsys)
    assert code == EXIT_INVALID
    doc = {"model": CL_BLOCK, "reward": ALPHA, "contract": {"a": 10, "r": 0.01, "p": 0.1, "d": 2}}
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(doc)))
    code, out, _ = run(["price"], capsys)
    assert code == EXIT_OK and "value" in json.loads(out)


def test_seed_override():
    doc = {"model": CL_BLOCK, "reward": ALPHA, "contract": {"a": 10, "r": 0.01}, "mc": {"n_paths": 1000, "seed": 1}}
    assert parse_config(doc, seed_override=7).mc.seed == 7
    assert parse_config(doc).mc.seed == 1


def test_unknown_preset(capsys):
    code, _, err = run(["sweep", "--preset", "nope"], capsys)
    assert code == EXIT_INVALID and "unknown preset" in err


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip_and_idempotent(name, tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["sweep", "--preset", name, "--out", str(a)], capsys)[0] == EXIT_OK
    assert run(["sweep", "--preset", name, "--out", str(b)], capsys)[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    table = run_preset(name)
    rows = list(csv.reader(io.StringIO(a.read_text())))
    assert rows[0] == table.header
    for x, row, parsed in zip(table.x, table.rows, rows[1:]):
        assert float(parsed[0]) == x
        assert [None if cell == "" else float(cell) for cell in parsed[1:]] == row


def test_pstar_preset_increases_toward_trigger():
    t = run_preset("p*bm")
    col = [v for v in t.column("alpha=100") if v is not None]
    assert all(v > 0 for v in col)
    assert all(b > a for a, b in zip(col, col[1:]))


def test_config_sweep(tmp_path, capsys):
    doc = {"kind": "drawdown-cancellable", "model": BM_BLOCK, "reward": ALPHA, "penalty": {"type": "linear-c1"},
           "contract": {"a": 10, "r": 0.01, "p": 0.2, "d": 7},
           "sweep": {"variable": "theta", "from": 0.5, "to": 9.5, "points": 91}}
    code, out, _ = run(["sweep", "--config", write(tmp_path, doc)], capsys)
    rows = list(csv.reader(io.StringIO(out)))[1:]
    best = max(rows, key=lambda row: float(row[1]))
    theta = dd.find_theta_star(BM, ContractSpec(a=10.0, r=0.01, p=0.2, d=7.0), ConstantReward(100.0),
                               LinearC1()).theta_star
    assert code == EXIT_OK
    assert abs(float(best[0]) - theta) <= 0.1


def test_sweep_out_of_domain(tmp_path, capsys):
    doc = {"model": BM_BLOCK, "reward": ALPHA, "contract": {"a": 10, "r": 0.01},
           "sweep": {"variable": "d", "from": 0, "to": 12, "points": 5}}
    code, _, _ = run(["sweep", "--config", write(tmp_path, doc)], capsys)
    assert code == EXIT_INVALID


def test_validate_needs_mc_block(tmp_path, capsys):
    doc = {"model": BM_BLOCK, "reward": ALPHA, "contract": {"a": 10, "r": 0.01, "p": 0.2}}
    code, _, _ = run(["validate", "--config", write(tmp_path, doc)], capsys)
    assert code == EXIT_INVALID
    code, _, _ = run(["validate", "--preset", "no-such-case"], capsys)
    assert code == EXIT_INVALID


def test_validate_config_passes_and_corrupted_model_fails(tmp_path, capsys):
    doc = {"kind": "drawup", "model": CL_BLOCK, "reward": ALPHA, "mc": {"n_paths": 50000, "seed": 3},
           "contract": {"a": 10, "b": 10, "r": 0.01, "p": 0.1, "d": 5, "u": 3}}
    code, out, _ = run(["validate", "--config", write(tmp_path, doc)], capsys)
    assert code == EXIT_OK and out.rstrip().endswith("PASS")
    doc["analytic_model"] = {**CL_BLOCK, "mu_hat": 0.1}
    code, out, _ = run(["validate", "--config", write(tmp_path, doc)], capsys)
    assert code == EXIT_FAILED and out.rstrip().endswith("FAIL")
