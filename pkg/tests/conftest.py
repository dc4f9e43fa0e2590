import numpy as np
import pandas as pd
import pytest

from gppi.sim.wine import WINE_COLUMNS


def write_fake_wine(directory, seed=0, n_red=1000, n_white=3000, drop=None):
    """Synthetic files in the public wine-quality layout (not real data)."""
    rng = np.random.default_rng(seed)
    paths = []
    for name, n, shift in (("red", n_red, 1.0), ("white", n_white, 0.0)):
        df = pd.DataFrame(rng.normal(size=(n, len(WINE_COLUMNS))), columns=WINE_COLUMNS)
        df["density"] = 0.994 + 0.002 * shift + 0.0025 * rng.normal(size=n)
        df["total sulfur dioxide"] += -2.0 * shift
        df["quality"] = rng.integers(3, 9, size=n)
        if drop:
            df = df.drop(columns=drop)
        path = directory / f"winequality-{name}.csv"
        df.to_csv(path, sep=";", index=False)
        paths.append(path)
    return paths


@pytest.fixture
def fake_wine(tmp_path):
    return write_fake_wine(tmp_path)
