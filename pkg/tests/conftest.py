import json
import os
import sys

import numpy as np
import pytest


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {name}: {outcome}", file=sys.stderr)

sys.path.insert(0, os.path.dirname(__file__))  # make oracles importable

from specground.core import DenseLayer, InputSample, Network

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


def golden_path(name: str) -> str:
    return os.path.join(GOLDEN, name)


def load_fixture_json(name: str):
    with open(fixture_path(name), encoding="utf-8") as fh:
        return json.load(fh)


def random_network(rng, widths, scale=1.0) -> Network:
    layers = []
    for i, (din, dout) in enumerate(zip(widths, widths[1:])):
        w = rng.standard_normal((dout, din)) * (scale / np.sqrt(din))
        b = rng.standard_normal(dout) * 0.1
        act = "none" if i == len(widths) - 2 else "relu"
        layers.append(DenseLayer(w, b, act))
    return Network(tuple(layers))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def line_net():
    """y = (x1, 1 - x1): argmax flips exactly at x1 = 0.5."""
    return Network((DenseLayer(np.array([[1.0], [-1.0]]), np.array([0.0, 1.0]), "none"),))


@pytest.fixture
def identity2_net():
    return Network((DenseLayer(np.eye(2), np.zeros(2), "none"),))


@pytest.fixture
def bird_sample():
    return InputSample.from_dict(load_fixture_json("bird_16x16.json"))


@pytest.fixture
def image_net():
    return Network.from_dict(load_fixture_json("image_net_16x16.json"))
