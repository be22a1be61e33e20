import numpy as np
import pytest

from kfhe import Column, Dataset, load_bundled


def make_dataset(n=60, d=3, c=3, seed=0, categorical=(), name="synthetic"):
    """Random dataset whose labels depend on the first feature, so trees can learn."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    schema = []
    for j in range(d):
        if j in categorical:
            X[:, j] = rng.integers(0, 4, size=n)
            schema.append(Column(f"x{j}", "categorical", ("a", "b", "c", "d")))
        else:
            schema.append(Column(f"x{j}", "numeric"))
    score = X[:, 0] + 0.5 * rng.normal(size=n)
    y = np.digitize(score, np.quantile(score, np.linspace(0, 1, c + 1)[1:-1]))
    return Dataset(X, y.astype(np.int64), c, tuple(schema), name=name)


@pytest.fixture(scope="session")
def iris():
    return load_bundled("iris")


@pytest.fixture
def small():
    return make_dataset()


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    if acceptance and acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance.VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
