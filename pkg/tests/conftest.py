import numpy as np
import pytest

from dmtree.dataset import Dataset, parse_dataset
from tests.oracles.entropy_oracle import WEATHER_HEADER, WEATHER_ROWS, XOR_ROWS


def csv_text(header, rows):
    return "\n".join([",".join(header)] + [",".join(str(v) for v in r) for r in rows]) + "\n"


@pytest.fixture
def weather():
    return parse_dataset(csv_text(WEATHER_HEADER + ["play"], WEATHER_ROWS), "play", name="weather")


@pytest.fixture
def xor():
    return parse_dataset(csv_text(["x1", "x2", "y"], XOR_ROWS), "y", name="xor")


def separable(n=40, m=5, seed=0, name="sep"):
    """Attribute ``a0`` separates the classes; the rest are noise."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.standard_normal((n, m))
    X[:, 0] = np.where(y == 1, 5.0, -5.0) + rng.uniform(-1, 1, n)
    return Dataset.from_arrays(X, np.where(y == 1, "pos", "neg"), name=name)


def random_mixed(rng, n, m, n_classes=2, cat_fraction=0.3, missing=0.0, name="rand"):
    """Random dataset with continuous and categorical attributes."""
    cols = {}
    for j in range(m):
        if rng.random() < cat_fraction:
            k = int(rng.integers(2, 5))
            col = [f"c{v}" for v in rng.integers(0, k, n)]
        else:
            col = [float(v) for v in np.round(rng.standard_normal(n), 3)]
        if missing:
            col = [None if rng.random() < missing else v for v in col]
        cols[f"f{j:03d}"] = col
    labels = [f"k{v}" for v in rng.integers(0, n_classes, n)]
    if len(set(labels)) < 2:
        labels[0], labels[-1] = "k0", "k1"
    return Dataset.from_columns(cols, labels, name=name)


# acceptance outcomes, printed as one line each at the end of the run
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split("-")[1])):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {status}: {detail}")
