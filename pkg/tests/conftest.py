import json
from pathlib import Path

import numpy as np
import pytest

from meandim import nn

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_net():
    return nn.load_network(FIXTURES / "model.mdnn")


@pytest.fixture(scope="session")
def goldens():
    return json.loads((FIXTURES / "goldens.json").read_text())


@pytest.fixture(scope="session")
def fixture_histograms():
    paths = [FIXTURES / f"h_{k}.mdhs" for k in [*range(10), "combined"]]
    return nn.PixelHistogramSet.load(paths)


def make_dense_net(weights, bias=None, input_side=10):
    """Flatten + one identity dense layer on a square single-channel input."""
    weights = np.asarray(weights, dtype=np.float32)
    if bias is None:
        bias = np.zeros(weights.shape[1], dtype=np.float32)
    return nn.NetworkSpec(
        (input_side, input_side, 1),
        [nn.Flatten(), nn.Dense(weights, np.asarray(bias, dtype=np.float32))],
    )


@pytest.fixture(scope="session")
def identity_net():
    """Passes the first 10 pixels straight through to the 10 outputs."""
    w = np.zeros((100, 10), dtype=np.float32)
    for k in range(10):
        w[k, k] = 1.0
    return make_dense_net(w)


@pytest.fixture(scope="session")
def single_pixel_net():
    """Output 0 reads only pixel (0, 0); everything else is constant."""
    w = np.zeros((100, 10), dtype=np.float32)
    w[0, 0] = 2.0
    return make_dense_net(w)


@pytest.fixture(scope="session")
def constant_net():
    b = np.zeros(10, dtype=np.float32)
    b[0] = 10.0
    return make_dense_net(np.zeros((100, 10), dtype=np.float32), bias=b)
