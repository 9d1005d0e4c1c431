import numpy as np
import pytest

from enumsr.datasets import Dataset
from enumsr.grammar import build_default_grammar


@pytest.fixture(scope="session")
def grammar1():
    return build_default_grammar(("x",))


@pytest.fixture(scope="session")
def grammar2():
    return build_default_grammar(("x", "y"))


@pytest.fixture(scope="session")
def linear_data():
    rng = np.random.default_rng(42)
    X = rng.uniform(-2.0, 2.0, size=(40, 1))
    return Dataset("linear", ("x",), X, 3.0 * X[:, 0] + 2.0)


@pytest.fixture(scope="session")
def sine_data():
    rng = np.random.default_rng(43)
    X = rng.uniform(-2.0, 2.0, size=(60, 1))
    y = 2.5 * np.sin(1.7 * X[:, 0] - 0.3) + 0.8
    Xt = rng.uniform(-2.0, 2.0, size=(30, 1))
    yt = 2.5 * np.sin(1.7 * Xt[:, 0] - 0.3) + 0.8
    return Dataset("sine", ("x",), X, y, Xt, yt)


@pytest.fixture(scope="session")
def planar_data():
    """Two features, smooth target, used where the 1-feature space is too
    small to be interesting."""
    rng = np.random.default_rng(44)
    X = rng.uniform(-1.5, 1.5, size=(50, 2))
    y = 2.0 * X[:, 0] * X[:, 1] + 0.5 * X[:, 0] + 1.0
    return Dataset("planar", ("x", "y"), X, y)
