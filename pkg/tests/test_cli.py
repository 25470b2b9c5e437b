"""CLI behaviour and golden CSV outputs.

Regenerate the golden files with ``POSTEDPRICE_UPDATE_GOLDEN=1 pytest tests/test_cli.py``.
"""

import json
import os
from pathlib import Path

import pytest
from click.testing import CliRunner

from postedprice import __version__
from postedprice.cli import cli
from postedprice.engine import JobRequest
from postedprice.workload import write_requests

GOLDEN = Path(__file__).parent / "golden"
UPDATE = os.environ.get("POSTEDPRICE_UPDATE_GOLDEN") == "1"

CASES = {
    "price": ["price", "--gamma", "10", "--beta", "2", "--rho", "0", "--rho", "0.4", "--rho", "1"],
    "price_mid": ["price", "--beta", "0.5", "--rho", "0.7", "--cost", "0.25"],
    "curve": ["curve", "--beta", "2", "--points", "6"],
    "simulate": ["simulate", "--users", "20", "--horizon", "3", "--resources", "2", "--lambda", "1.5",
                 "--mean-slots", "1.5", "--seed", "1"],
    "oracle": ["oracle", "--users", "8", "--horizon", "4", "--max-slots", "2", "--resources", "2",
               "--lambda", "1.5", "--seed", "2"],
    "ratio": ["ratio", "--users", "8", "--trials", "3", "--beta", "0.5"],
    "sweep": ["sweep", "--axis", "demand", "--grid", "0.75,1.5", "--seeds", "3"],
    "sweep_beta": ["sweep", "--axis", "beta", "--grid", "0.5,2"],
    "tune": ["tune", "--iterations", "2", "--trials", "2", "--users", "30"],
    "adversary": ["adversary", "--beta", "2", "--granularity", "0.01"],
}


def run(args, **kw):
    return CliRunner().invoke(cli, args, catch_exceptions=False, **kw)


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(name):
    res = run(CASES[name])
    assert res.exit_code == 0, res.stderr
    path = GOLDEN / f"{name}.csv"
    if UPDATE:
        path.write_text(res.stdout, encoding="utf-8")
    assert res.stdout == path.read_text(encoding="utf-8")


@pytest.mark.parametrize("name", ["simulate", "oracle", "sweep"])
def test_byte_reproducible(name):
    assert run(CASES[name]).stdout == run(CASES[name]).stdout


def test_price_values():
    rows = run(CASES["price"]).stdout.splitlines()
    assert rows[0].split(",")[:2] == ["rho", "price"]
    assert rows[1].split(",")[1] == "1"
    assert rows[3].split(",")[1] == "EXHAUSTED"
    assert "3.30258509" in rows[1]
    mid = run(["price", "--beta", "0.5", "--rho", "0.7"]).stdout.splitlines()[1]
    assert mid.split(",")[1].startswith("2.7227")


def test_out_writes_meta(tmp_path):
    out = tmp_path / "p.csv"
    res = run(CASES["price"] + ["--out", str(out)])
    assert res.exit_code == 0 and res.stdout == ""
    assert out.read_text() == (GOLDEN / "price.csv").read_text()
    meta = json.loads(Path(f"{out}.meta.json").read_text())
    assert meta["command"] == "price" and meta["version"] == __version__
    assert meta["options"]["gamma"] == 10.0


def test_validation_exit_code():
    res = run(["price", "--beta", "-2"])
    assert res.exit_code == 2 and "error:" in res.stderr
    assert run(["price", "--rho", "1.5"]).exit_code == 2
    assert run(["sweep", "--axis", "nope"]).exit_code == 2


def test_capacity_exit_code():
    assert run(["oracle", "--users", "30"]).exit_code == 3
    assert run(["oracle", "--users", "10", "--horizon", "40", "--max-slots", "2"]).exit_code == 3


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"beta": 2, "price": {"rho": [0.4], "gamma": 10}}))
    base = run(["--config", str(cfg), "price"]).stdout
    assert base == run(["price", "--beta", "2", "--rho", "0.4"]).stdout
    flag = run(["--config", str(cfg), "price", "--beta", "0.5"]).stdout
    assert flag == run(["price", "--beta", "0.5", "--rho", "0.4"]).stdout
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert run(["--config", str(bad), "price"]).exit_code == 2


def test_simulate_from_file(tmp_path):
    path = tmp_path / "reqs.csv"
    write_requests(path, [JobRequest(0, (0.3,), 0.3), JobRequest(1, (0.1,), 0.1), JobRequest(2, (0.1,), 0.2)])
    res = run(["simulate", "--requests", str(path), "--beta", "2"])
    assert res.exit_code == 0
    lines = res.stdout.splitlines()
    assert len(lines) == 4 and all(l.split(",")[header_index(lines[0], "accepted")] == "1" for l in lines[1:])


def header_index(header, name):
    return header.split(",").index(name)


def test_version():
    assert __version__ in run(["--version"]).stdout
