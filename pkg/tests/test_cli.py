import json
import os
from pathlib import Path

import pytest

from spreadtree.cli import main
from spreadtree.errors import MarketSpecError
from spreadtree.specfile import (
    MARKET_SPEC_SCHEMA,
    cps_from_dict,
    load_market,
    market_from_dict,
    market_to_dict,
    strategy_from_dict,
    strategy_to_dict,
)
from spreadtree.market import Strategy
from spreadtree.cps import verify_cps

from _gen import binomial_family, family_with_cps, flat_family, random_admissible_strategy, rng_for

REPO = Path(__file__).resolve().parents[1]


def _write_spec(tmp_path, family, name="market.json"):
    path = tmp_path / name
    path.write_text(json.dumps(market_to_dict(family), indent=2, sort_keys=True))
    return str(path)


def test_schema_file_matches_package_constant():
    on_disk = json.loads((REPO / "docs" / "market_spec.schema.json").read_text())
    assert on_disk == MARKET_SPEC_SCHEMA


def test_market_roundtrip_and_validation(tmp_path):
    fam = binomial_family(lam_prime=0.05)
    doc = market_to_dict(fam)
    fam2 = market_from_dict(doc)
    assert fam2.tree == fam.tree
    assert fam2.transaction_cost == fam.transaction_cost
    bad = json.loads(json.dumps(doc))
    bad["scenarios"]["probabilities"] = [0.5, 0.4]
    with pytest.raises(MarketSpecError) as err:
        market_from_dict(bad)
    assert err.value.path == "scenarios.probabilities"


def test_strategy_roundtrip():
    fam = binomial_family()
    strat = Strategy.from_trades(fam.tree, 1.0, right={(0.0, ("u", "d")): (0.25, 0.0)})
    doc = strategy_to_dict(strat)
    again = strategy_from_dict(doc, fam.tree)
    assert again == strat


def test_solve_flat_market_reports_no_trade(tmp_path, capsys):
    spec = _write_spec(tmp_path, flat_family(lam=0.1, lam_prime=0.05))
    out = tmp_path / "report.json"
    code = main(["solve", "--spec", spec, "--utility", "log", "--x", "1.0",
                 "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["value"] == 0.0
    assert all(row["buy"] == 0.0 and row["sell"] == 0.0
               for row in report["strategy"]["left"] + report["strategy"]["right"])


def test_solve_matches_bundled_golden(tmp_path):
    golden = json.loads((REPO / "docs" / "examples" / "binomial_golden.json").read_text())
    spec = str(REPO / "docs" / "examples" / "binomial.json")
    out = tmp_path / "report.json"
    csv = tmp_path / "values.csv"
    code = main(["solve", "--spec", spec, "--utility", "log", "--x", "1.0",
                 "--out", str(out), "--csv", str(csv)])
    assert code == 0
    report = json.loads(out.read_text())
    assert abs(report["value"] - golden["value"]) < 1e-4
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "theta,scenario,probability,terminal_liquidation"
    assert len(lines) == 3


def test_solve_rejects_bad_probabilities(tmp_path, capsys):
    fam = flat_family()
    doc = market_to_dict(fam)
    doc["scenarios"]["probabilities"] = [0.9]
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps(doc))
    code = main(["solve", "--spec", str(spec)])
    assert code == 2
    assert "scenarios.probabilities" in capsys.readouterr().err


def test_solve_exit_3_without_price_system(tmp_path):
    from _gen import single_scenario_family

    fam = single_scenario_family(s0=1.0, s_end=2.0, lam=0.1, lam_prime=0.05)
    spec = _write_spec(tmp_path, fam)
    code = main(["solve", "--spec", spec, "--out", str(tmp_path / "r.json")])
    assert code == 3


def test_check_cps_exit_codes_and_roundtrip(tmp_path):
    fam = binomial_family(lam_prime=0.05)
    spec = _write_spec(tmp_path, fam)
    out = tmp_path / "cert.json"
    code = main(["check-cps", "--spec", spec, "--lambda-prime", "0.05", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["feasible"] is True
    cps = cps_from_dict(report["certificate"], fam.tree)
    assert verify_cps(cps, fam, "m0", 0.05)

    from _gen import single_scenario_family

    rising = single_scenario_family(s0=1.0, s_end=2.0, lam=0.1)
    spec2 = _write_spec(tmp_path, rising, "rising.json")
    code = main(["check-cps", "--spec", spec2, "--out", str(tmp_path / "c2.json")])
    assert code == 1
    assert json.loads((tmp_path / "c2.json").read_text())["feasible"] is False


def test_superhedge_constant_and_call(tmp_path):
    fam = binomial_family(s0=1.0, up=2.0, down=0.5, lam=0.1)
    spec = _write_spec(tmp_path, fam)
    claim = tmp_path / "claim.json"
    claim.write_text(json.dumps({"values": {"u": 2.0, "d": 2.0}}))
    out = tmp_path / "hedge.json"
    code = main(["superhedge", "--spec", spec, "--claim", str(claim), "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert abs(report["price"] - 2.0) < 1e-9
    call = tmp_path / "call.json"
    call.write_text(json.dumps({"values": {"u": 1.0, "d": 0.0}}))
    out2 = tmp_path / "hedge2.json"
    wit = tmp_path / "witness.json"
    code = main(["superhedge", "--spec", spec, "--claim", str(call),
                 "--out", str(out2), "--witness", str(wit)])
    assert code == 0
    report = json.loads(out2.read_text())
    assert abs(report["price"] - 11.0 / 27.0) < 1e-9
    assert report["gap"] < 1e-6
    witness = strategy_from_dict(json.loads(wit.read_text()), fam.tree)
    assert witness.initial_cash == report["price"]


def test_verify_roundtrip_and_tamper(tmp_path):
    rng = rng_for(211)
    fam, cps = family_with_cps(rng, max_events=2, max_scenarios=4,
                               include_horizon_event=True)
    spec = _write_spec(tmp_path, fam)
    strat = random_admissible_strategy(rng, fam, liquidate=True)
    sfile = tmp_path / "strategy.json"
    sfile.write_text(json.dumps(strategy_to_dict(strat)))
    from spreadtree.specfile import cps_to_dict

    cfile = tmp_path / "cert.json"
    cfile.write_text(json.dumps(cps_to_dict(cps, fam.tree)))
    out = tmp_path / "verdict.json"
    code = main(["verify", "--spec", spec, "--strategy", str(sfile),
                 "--certificate", str(cfile), "--out", str(out)])
    assert code == 0
    verdict = json.loads(out.read_text())
    assert verdict["ok"] and verdict["checks"]["supermartingale"]["ok"]
    assert verdict["checks"]["variation_bound"]["ok"]
    assert "bound_total" in verdict["checks"]["variation_bound"]

    doc = json.loads(sfile.read_text())
    doc["right"][0]["buy"] += 100.0  # wildly over-leveraged now
    sfile.write_text(json.dumps(doc))
    code = main(["verify", "--spec", spec, "--strategy", str(sfile),
                 "--certificate", str(cfile), "--out", str(out)])
    assert code == 1
    assert not json.loads(out.read_text())["ok"]


def test_reports_are_byte_identical(tmp_path):
    spec = str(REPO / "docs" / "examples" / "binomial.json")
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        code = main(["solve", "--spec", spec, "--seed", "7", "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_env_override(tmp_path, monkeypatch):
    spec = _write_spec(tmp_path, flat_family(lam=0.1, lam_prime=0.05))
    out = tmp_path / "r.json"
    monkeypatch.setenv("SPREADTREE_X", "4.0")
    code = main(["solve", "--spec", spec, "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["x"] == 4.0
