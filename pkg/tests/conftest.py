import json
from pathlib import Path

import pytest

from sailkit.netlist import Netlist, parse_bench

BENCH_DIR = Path(__file__).resolve().parents[1] / "benchmarks"


def load_bench(name: str) -> Netlist:
    return parse_bench((BENCH_DIR / f"{name}.bench").read_text())


@pytest.fixture(scope="session")
def suite_manifest():
    return json.loads((BENCH_DIR / "suite.json").read_text())


@pytest.fixture(scope="session")
def c17():
    return load_bench("c17")


@pytest.fixture()
def xor_pair():
    return parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n")


@pytest.fixture()
def small_locked():
    text = """
INPUT(a)
INPUT(b)
INPUT(keyinput0)
OUTPUT(y)
t = XOR(a, keyinput0)
y = AND(t, b)
"""
    return parse_bench(text)
