import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mdk import __version__, cli
from mdk.chain import classify
from mdk.errors import NumericalError
from mdk.io import load_chain

HERE = os.path.dirname(__file__)
DATA = os.path.join(HERE, "data")
GOLDEN = os.path.join(HERE, "golden")

# run from tests/data so the recorded file names are stable
CASES = {
    "div_renyi2": ["div", "--m", "a.json", "--l", "b.json", "--pi", "pi.json", "--renyi", "2"],
    "div_kl": ["div", "--m", "a.json", "--l", "b.json", "--pi", "pi.json"],
    "mix": ["mix", "--chain", "rev.json", "--div", "d_alpha", "--alpha", "2", "--eps", "0.01"],
    "mix_tv": ["mix", "--chain", "rev.json", "--eps", "0.01", "--mode", "worst_case"],
    "eta": ["eta", "--chain", "rev.json", "--starts", "3", "--iters", "60"],
    "eta_renyi": ["eta", "--chain", "rev.json", "--renyi", "0.5", "--starts", "3",
                  "--iters", "60"],
    "project": ["project", "--chain", "l2.json", "--pi", "pi.json", "--alpha", "2",
                "--starts", "2", "--probes", "4"],
    "chernoff": ["chernoff", "--p0", "b.json", "--p1", "a.json", "--pi", "pi.json"],
    "httest": ["httest", "--p0", "b.json", "--p1", "a.json", "--pi", "pi.json",
               "--n-grid", "2,4,8", "--trials", "20000", "--exact-n", "1,2", "--aep", "5000",
               "--seed", "7"],
    "spectrum": ["spectrum", "--chain", "rev.json"],
    "make_hypercube": ["make-chain", "hypercube", "--n", "2"],
    "make_random": ["make-chain", "random-reversible", "--n", "3", "--seed", "3"],
}


@pytest.fixture
def in_data(monkeypatch):
    monkeypatch.chdir(DATA)
    monkeypatch.delenv("MDK_THREADS", raising=False)


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_output(name, in_data):
    code, text = cli.run(CASES[name])
    assert code == 0
    path = os.path.join(GOLDEN, f"{name}.json")
    if os.environ.get("MDK_REGEN_GOLDEN"):
        with open(path, "w") as fh:
            fh.write(text)
    with open(path) as fh:
        assert text == fh.read()


@pytest.mark.parametrize("name", sorted(CASES))
def test_thread_count_does_not_change_output(name, in_data):
    outs = {cli.run(CASES[name] + ["--threads", t])[1] for t in ("1", "4")}
    assert len(outs) == 1


def test_env_threads_fallback(in_data, monkeypatch):
    base = cli.run(CASES["eta"])[1]
    monkeypatch.setenv("MDK_THREADS", "3")
    assert cli.run(CASES["eta"])[1] == base
    monkeypatch.setenv("MDK_THREADS", "zero")
    code, text = cli.run(CASES["eta"])
    assert code == 2 and "thread count" in text


def test_document_layout(in_data):
    doc = json.loads(cli.run(CASES["div_renyi2"])[1])
    assert doc["tool"] == "mdk" and doc["version"] == __version__ and doc["seed"] == 0
    assert doc["config"]["subcommand"] == "div"
    assert "threads" not in doc["config"]
    assert round(doc["results"]["value"], 10) == 0.2876820725


def test_make_chain_round_trip(tmp_path, in_data):
    out = tmp_path / "hc.json"
    code, text = cli.run(["make-chain", "hypercube", "--n", "3", "-o", str(out)])
    assert code == 0 and text == ""
    states, P, pi = load_chain(out)
    assert len(states) == 8
    assert np.abs(P.sum(axis=1) - 1).max() <= 1e-12
    assert classify(P, pi).reversible
    code, text = cli.run(["mix", "--chain", str(out), "--div", "tv", "--eps", "0.01",
                          "--mode", "average"])
    assert code == 0
    report = json.loads(text)["results"]["report"]
    assert isinstance(report["t_exact"], int)
    assert "sandwich_holds" in report


def test_csv_output(in_data):
    code, text = cli.run(CASES["chernoff"] + ["--format", "csv"])
    lines = text.splitlines()
    assert code == 0 and lines[0] == "key,value"
    assert any(line.startswith("results.chernoff.value,") for line in lines)


def test_malformed_chain_reports_location(tmp_path, in_data):
    bad = tmp_path / "bad.json"
    bad.write_text('{"matrix": [[0.5, 0.5],\n [0.5, 0.5,]]}')
    code, text = cli.run(["spectrum", "--chain", str(bad)])
    assert code == 2 and "line 2" in text
    bad.write_text('{"matrix": [[0.5, 0.5], [0.7, -0.1]]}')
    code, text = cli.run(["spectrum", "--chain", str(bad)])
    assert code == 2 and "matrix[1][1]" in text
    bad.write_text('{"matrix": [[0.5, 0.5], [0.7, NaN]]}')
    assert cli.run(["spectrum", "--chain", str(bad)])[0] == 2


def test_domain_and_numerical_exit_codes(in_data, monkeypatch):
    code, text = cli.run(["project", "--chain", "a.json", "--pi", "pi.json", "--alpha", "1"])
    assert code == 2 and text.startswith("error:")

    def boom(args, threads):
        raise NumericalError("did not converge")

    monkeypatch.setattr(cli, "cmd_spectrum", boom)
    code, text = cli.run(["spectrum", "--chain", "rev.json"])
    assert code == 3 and "did not converge" in text


def test_module_entry_point(in_data):
    proc = subprocess.run([sys.executable, "-m", "mdk", *CASES["spectrum"]],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["gamma_star"] == pytest.approx(0.75)
