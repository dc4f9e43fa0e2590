"""Prediction models ``f`` used by the simulations.

A predictor maps a :class:`~gppi.sim.dgp.SimData` batch (plus a random
stream, used only by the noise model) to predictions in ``[0, 1]``.  All
predictors are independent of the evaluation data: the fitted model is
trained once per run on its own sample.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from ..errors import InvalidInput
from ..shift import LogisticConfig, fit_logistic_pi
from .dgp import DGPS, SimData


class Predictor:
    name: str = "predictor"

    def predict(self, data: SimData, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


@dataclass
class Ideal(Predictor):
    """The true conditional probability ``Pr(Y = 1 | X)``."""

    name: str = "ideal"

    def predict(self, data, rng):
        return data.true_prob


@dataclass
class UniformNoise(Predictor):
    """Pure noise, independent of everything: ``Unif[low, high]``."""

    low: float = 0.01
    high: float = 0.99
    name: str = "uniform"

    def predict(self, data, rng):
        return rng.uniform(self.low, self.high, size=len(data))


@dataclass
class FittedLogistic(Predictor):
    """Main-effects logistic regression of ``Y`` on a subset of columns."""

    columns: tuple[str, ...]
    coefficients: np.ndarray = field(repr=False)
    name: str = "logistic"

    def predict(self, data, rng):
        x = np.column_stack([data.column(c) for c in self.columns])
        return expit(self.coefficients[0] + x @ self.coefficients[1:])


@dataclass
class ExternalColumn(Predictor):
    """Wraps any callable ``fn(data) -> predictions`` supplied by the user."""

    fn: Callable[[SimData], np.ndarray]
    name: str = "external"

    def predict(self, data, rng):
        pred = np.asarray(self.fn(data), dtype=float)
        if pred.shape != (len(data),) or np.any((pred < 0) | (pred > 1)):
            raise InvalidInput("external predictions must be a [0, 1] vector per row")
        return pred


def train_logistic(train: SimData, columns=None, ridge: float = 1e-8) -> FittedLogistic:
    columns = tuple(columns or train.columns)
    x = np.column_stack([train.column(c) for c in columns])
    cfg = LogisticConfig(ridge=ridge, eps=0.0)
    model = fit_logistic_pi(x, train.labels, cfg)
    label = "logistic" if columns == train.columns else f"logistic({','.join(columns)})"
    return FittedLogistic(columns, model.coefficients, name=label)


_SPEC = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")


def make_predictor(
    spec: str | Predictor,
    dgp: str = "main",
    rng: np.random.Generator | None = None,
    train_size: int = 100_000,
) -> Predictor:
    """Build a predictor from ``"ideal"``, ``"uniform"``, ``"logistic"`` or
    ``"logistic(x1,x2)"``.  Fitted models draw an independent training
    sample of ``train_size`` rows from ``dgp`` using ``rng``."""
    if isinstance(spec, Predictor):
        return spec
    match = _SPEC.match(spec)
    if not match:
        raise InvalidInput(f"cannot parse predictor {spec!r}")
    kind, args = match.group(1).lower(), match.group(2)
    if kind == "ideal":
        return Ideal()
    if kind in ("uniform", "noise"):
        return UniformNoise()
    if kind == "logistic":
        if rng is None:
            raise InvalidInput("a fitted predictor needs a random stream for its training data")
        train = DGPS[dgp](train_size, rng)
        columns = [c.strip() for c in args.split(",")] if args else None
        return train_logistic(train, columns)
    raise InvalidInput(f"unknown predictor {kind!r}")
