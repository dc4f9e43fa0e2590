"""Data-generating processes and labeling mechanisms for the simulations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import InvalidInput, NotPositiveDefinite

MAIN_SIGMA = np.array([
    [1.0, 0.5, 0.3, 0.2, 0.0, 0.0],
    [0.5, 1.0, 0.4, 0.3, 0.0, 0.0],
    [0.3, 0.4, 1.0, 0.2, 0.0, 0.0],
    [0.2, 0.3, 0.2, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 2.0],
])
MAIN_COLUMNS = ("r", "x1", "x2", "x3", "x4", "x5")

ALT_MEAN = np.array([0.0, 2.0, 0.0])
ALT_SIGMA = np.array([
    [1.0, 0.9, 0.82],
    [0.9, 1.0, 0.49],
    [0.82, 0.49, 1.0],
])
ALT_COLUMNS = ("r", "x1", "x2")


@dataclass
class SimData:
    """Simulated rows: the score is always the first feature column."""

    features: np.ndarray
    columns: tuple[str, ...]
    true_prob: np.ndarray
    labels: np.ndarray

    @property
    def scores(self) -> np.ndarray:
        return self.features[:, 0]

    def __len__(self):
        return len(self.features)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.features[:, self.columns.index(name)]
        except ValueError:
            raise InvalidInput(f"unknown column {name!r}; have {list(self.columns)}") from None


def gen_mvn(m: int, mean, sigma, rng: np.random.Generator) -> np.ndarray:
    """``m`` multivariate normal rows via the Cholesky factor of ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    mean = np.broadcast_to(np.asarray(mean, dtype=float), sigma.shape[:1])
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise NotPositiveDefinite("sigma must be a square matrix")
    if not np.allclose(sigma, sigma.T):
        raise NotPositiveDefinite("sigma is not symmetric")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("sigma is not positive definite") from None
    return rng.standard_normal((m, len(mean))) @ chol.T + mean


def main_logit(x: np.ndarray) -> np.ndarray:
    r, x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    return (-0.5 + r - 0.9 * x1**2 + 0.6 * np.abs(x2) + 0.5 * x3**3
            + 1.5 * r * x3 - 0.7 * x1 * x2)


def alt_logit(x: np.ndarray) -> np.ndarray:
    return x[:, 0].copy()


def _finish(x, logit, columns, rng):
    p = expit(logit(x))
    y = (rng.random(len(x)) < p).astype(float)
    return SimData(x, columns, p, y)


def dgp_main(m: int, rng: np.random.Generator) -> SimData:
    """Six correlated normal covariates with a nonlinear logistic outcome."""
    x = gen_mvn(m, np.zeros(6), MAIN_SIGMA, rng)
    return _finish(x, main_logit, MAIN_COLUMNS, rng)


def dgp_alt(m: int, rng: np.random.Generator) -> SimData:
    """Three strongly correlated covariates; the outcome depends on the score only."""
    x = gen_mvn(m, ALT_MEAN, ALT_SIGMA, rng)
    return _finish(x, alt_logit, ALT_COLUMNS, rng)


DGPS = {"main": dgp_main, "alt": dgp_alt}


def labeling_index(x: np.ndarray) -> np.ndarray:
    return x[:, 0] - 0.9 * x[:, 1] + 0.7 * x[:, 2] * x[:, 3] - 0.5


def labeling_pi_main(x: np.ndarray) -> np.ndarray:
    """Labeling probability bounded in (0.2, 0.8)."""
    return 0.2 + 0.6 * expit(labeling_index(np.asarray(x, dtype=float)))


def labeling_pi_logistic(x: np.ndarray) -> np.ndarray:
    """Plain logistic labeling on the same index (correctly specified by
    a logistic model on ``r, x1, x2*x3``)."""
    return expit(labeling_index(np.asarray(x, dtype=float)))


def labeling_design(x: np.ndarray) -> np.ndarray:
    """Features under which :func:`labeling_pi_logistic` is exactly logistic."""
    return np.column_stack([x[:, 0], x[:, 1], x[:, 2] * x[:, 3]])


LABELINGS = {"main": labeling_pi_main, "logistic": labeling_pi_logistic}


