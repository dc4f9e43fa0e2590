"""PPI without covariate shift.

The labeled-data estimate is corrected by a rectifier built from the
prediction model: ``theta_n + omega * (theta_f_pool - theta_f_n)``.  The
tuning weight and the Wald standard error come from influence values on the
labeled set; no bootstrap is involved.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import asdict, dataclass
from statistics import NormalDist

import numpy as np

from .errors import AllLabeled, InvalidInput, InvalidLevel, LengthMismatch, NoneLabeled
from .estimands import Estimand, WeightedColumns, influence_values, plugin_estimate


class Mode(str, enum.Enum):
    ALL = "all"  # rectifier uses labeled + unlabeled predictions
    ONLY_N = "only-n"  # rectifier uses unlabeled predictions only


@dataclass(frozen=True)
class LabeledUnlabeledData:
    labeled_scores: np.ndarray
    labeled_predictions: np.ndarray
    labels: np.ndarray
    unlabeled_scores: np.ndarray
    unlabeled_predictions: np.ndarray

    def __post_init__(self):
        names = ("labeled_scores", "labeled_predictions", "labels",
                 "unlabeled_scores", "unlabeled_predictions")
        for name in names:
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        n, N = self.n, self.N
        if not (len(self.labeled_predictions) == len(self.labels) == n):
            raise LengthMismatch("labeled columns differ in length")
        if len(self.unlabeled_predictions) != N:
            raise LengthMismatch("unlabeled columns differ in length")
        if n < 2:
            raise InvalidInput("need at least 2 labeled observations")
        if N < 1:
            raise InvalidInput("no unlabeled data")
        for name in ("labeled_predictions", "labels", "unlabeled_predictions"):
            col = getattr(self, name)
            if np.any((col < 0) | (col > 1)) or not np.all(np.isfinite(col)):
                raise InvalidInput(f"{name} must lie in [0, 1]")

    @property
    def n(self) -> int:
        return len(self.labeled_scores)

    @property
    def N(self) -> int:
        return len(self.unlabeled_scores)

    @property
    def lam(self) -> float:
        return self.n / self.N

    @classmethod
    def from_pooled(cls, scores, predictions, labels, c):
        c = np.asarray(c).astype(bool)
        scores = np.asarray(scores, dtype=float)
        predictions = np.asarray(predictions, dtype=float)
        labels = np.asarray(labels, dtype=float)
        return cls(scores[c], predictions[c], labels[c], scores[~c], predictions[~c])


@dataclass
class PpiResult:
    point: float
    omega_hat: float
    se: float
    ci_low: float
    ci_high: float
    baseline_point: float
    baseline_se: float
    se_ratio: float
    n_effective: int
    level: float
    estimator: str = "ppi"
    degenerate: bool = False

    def to_dict(self):
        return asdict(self)


def z_quantile(level: float) -> float:
    if not 0 < level < 1:
        raise InvalidLevel(f"level must lie in (0, 1), got {level}")
    return NormalDist().inv_cdf(0.5 + level / 2)


def _finish(point, omega, var, base_point, base_var, m, level, estimator, degenerate):
    z = z_quantile(level)
    base_se = float(np.sqrt(max(base_var, 0.0) / m))
    se = float(np.sqrt(max(var, 0.0) / m))
    ratio = se / base_se if base_se > 0 else 1.0
    return PpiResult(
        point=float(point),
        omega_hat=float(omega),
        se=se,
        ci_low=float(point - z * se),
        ci_high=float(point + z * se),
        baseline_point=float(base_point),
        baseline_se=base_se,
        se_ratio=float(ratio),
        n_effective=int(m),
        level=float(level),
        estimator=estimator,
        degenerate=bool(degenerate),
    )


def estimate_omega(phi_y, phi_f) -> float:
    """Ratio ``sum(phi_y * phi_f) / sum(phi_f ** 2)``; 0 when phi_f is degenerate."""
    phi_y = np.asarray(phi_y, dtype=float)
    phi_f = np.asarray(phi_f, dtype=float)
    if phi_y.shape != phi_f.shape:
        raise LengthMismatch("influence vectors differ in length")
    ss = np.dot(phi_f, phi_f)
    if ss < 1e-12 * len(phi_f):
        return 0.0
    return float(np.dot(phi_y, phi_f) / ss)


def ppi_no_shift(
    e: Estimand,
    data: LabeledUnlabeledData,
    level: float = 0.95,
    mode: Mode | str = Mode.ALL,
    omega: float | None = None,
) -> PpiResult:
    """PPI estimate, standard error and Wald interval without covariate shift.

    ``omega`` overrides the estimated tuning weight (mainly for testing).  In
    ``only-n`` mode the rectifier uses the unlabeled predictions alone and the
    weight is shrunk by ``1 + n/N``; the standard error is the same in both
    modes.
    """
    mode = Mode(mode)
    z_quantile(level)
    n = data.n
    lam = data.lam
    lab_y = WeightedColumns(data.labeled_scores, data.labels)
    lab_f = WeightedColumns(data.labeled_scores, data.labeled_predictions)

    theta_n = plugin_estimate(e, lab_y)
    theta_f_n = plugin_estimate(e, lab_f)
    phi_y = influence_values(e, lab_y)
    phi_f = influence_values(e, lab_f)

    var_y = np.dot(phi_y, phi_y) / n
    var_f = np.dot(phi_f, phi_f) / n
    cov = np.dot(phi_y, phi_f) / n
    degenerate = var_f < 1e-12
    if degenerate:
        warnings.warn("prediction influence values are degenerate; using omega = 0",
                      RuntimeWarning, stacklevel=2)
        w = 0.0
        var = var_y
    else:
        w = estimate_omega(phi_y, phi_f)
        var = var_y - cov**2 / ((1 + lam) * var_f)
    if omega is not None:
        w = float(omega)

    if mode is Mode.ALL:
        pooled = WeightedColumns(
            np.concatenate([data.labeled_scores, data.unlabeled_scores]),
            np.concatenate([data.labeled_predictions, data.unlabeled_predictions]),
        )
        theta_f_other = plugin_estimate(e, pooled)
        used = w
    else:
        unl = WeightedColumns(data.unlabeled_scores, data.unlabeled_predictions)
        theta_f_other = plugin_estimate(e, unl)
        used = w / (1 + lam) if omega is None else w

    point = theta_n + used * (theta_f_other - theta_f_n)
    return _finish(point, used, var, theta_n, var_y, n, level,
                   f"ppi-no-shift[{mode.value}]", degenerate)


def ppi_md_form(
    e: Estimand,
    scores,
    predictions,
    labels,
    c,
    level: float = 0.95,
    omega: float | None = None,
) -> PpiResult:
    """Missing-data (AIPW-type) form of the no-shift PPI estimator.

    One-step construction around the labeled plug-in ``theta_n``::

        theta_n + mean_i[(c_i / p) phi_y_i + omega (1 - c_i / p) phi_f_i]

    with ``p`` the labeled fraction.  ``phi_y`` uses labeled-data moments,
    ``phi_f`` pooled-prediction moments.  The weight minimizes the sample
    variance of the summand and is consistent for the no-shift weight.
    """
    z_quantile(level)
    scores = np.asarray(scores, dtype=float)
    predictions = np.asarray(predictions, dtype=float)
    c = np.asarray(c).astype(float)
    m = len(scores)
    p = c.mean()
    if p >= 1:
        raise AllLabeled("every observation is labeled; the MD form needs unlabeled rows")
    if p <= 0:
        raise NoneLabeled("no labeled observations")
    lab = c == 1
    y = np.where(lab, np.nan_to_num(np.asarray(labels, dtype=float)), 0.0)

    cols_y = WeightedColumns(scores, y, c)
    theta_n = plugin_estimate(e, cols_y)
    phi_y = np.where(lab, influence_values(e, cols_y), 0.0)
    phi_f = influence_values(e, WeightedColumns(scores, predictions))

    a = c / p * phi_y
    b = (1 - c / p) * phi_f
    var_a = np.var(a)
    var_b = np.var(b)
    cov_ab = np.mean((a - a.mean()) * (b - b.mean()))
    degenerate = var_b < 1e-12
    if omega is None:
        omega = 0.0 if degenerate else -cov_ab / var_b
        var = var_a if degenerate else var_a - cov_ab**2 / var_b
    else:
        var = np.var(a + omega * b)
    point = theta_n + np.mean(a + omega * b)
    return _finish(point, omega, var, theta_n, var_a, m, level,
                   "ppi-md", degenerate)
