"""PPI under covariate distribution shift.

Three targets are supported, each built from weighted plug-in components:

=========  ========================  ========================  ======================
target     labeled (Y) weights       labeled (f) weights       pooled (f) weights
=========  ========================  ========================  ======================
full       c / pi                    c / pi                    1
unlabeled  c (1 - pi) / pi           c (1 - pi) / pi           1 - pi
labeled    c                         c                         pi
=========  ========================  ========================  ======================

When ``pi`` is unknown it can be estimated with a logistic model; the
estimation error of ``pi`` then enters the influence values of the labeled
components as a first-order correction (full target only).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import (
    InvalidInput,
    LengthMismatch,
    NotConverged,
    OverlapViolation,
    Separation,
    UnsupportedTarget,
)
from .estimands import Estimand, WeightedColumns, influence_values, plugin_estimate
from .rectifier import PpiResult, _finish, z_quantile

DEFAULT_EPS = 1e-3


class Target(str, enum.Enum):
    FULL = "full"
    UNLABELED = "unlabeled"
    LABELED = "labeled"


@dataclass(frozen=True)
class ShiftSample:
    """Pooled labeled and unlabeled rows with labeling indicators.

    ``labels`` may hold anything (e.g. NaN) where ``c == 0``.  ``pi`` is the
    known labeling probability per row, or None when it must be estimated.
    """

    scores: np.ndarray
    predictions: np.ndarray
    labels: np.ndarray
    c: np.ndarray
    pi: np.ndarray | None = None
    features: np.ndarray | None = None
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float).ravel()
        m = len(scores)
        predictions = np.asarray(self.predictions, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        labels = np.asarray(self.labels, dtype=float).ravel()
        if not (len(predictions) == len(c) == len(labels) == m):
            raise LengthMismatch("shift sample columns differ in length")
        if not np.all((c == 0) | (c == 1)):
            raise InvalidInput("c must be 0/1")
        if c.sum() < 2:
            raise InvalidInput("need at least 2 labeled observations")
        if (1 - c).sum() < 1:
            raise InvalidInput("need at least 1 unlabeled observation")
        lab = c == 1
        if not np.all(np.isfinite(labels[lab])):
            raise InvalidInput("labeled rows need finite labels")
        if np.any((predictions < 0) | (predictions > 1)):
            raise InvalidInput("predictions must lie in [0, 1]")
        labels = np.where(lab, labels, 0.0)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "predictions", predictions)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "c", c)
        if self.pi is not None:
            pi = np.asarray(self.pi, dtype=float).ravel()
            if len(pi) != m:
                raise LengthMismatch("pi has the wrong length")
            bad = np.flatnonzero(~((pi >= self.eps) & (pi <= 1 - self.eps)))
            if len(bad):
                raise OverlapViolation(
                    f"pi outside [{self.eps}, {1 - self.eps}] at rows {bad[:10].tolist()}"
                )
            object.__setattr__(self, "pi", pi)
        if self.features is not None:
            feats = np.asarray(self.features, dtype=float)
            if feats.ndim == 1:
                feats = feats[:, None]
            if len(feats) != m:
                raise LengthMismatch("features have the wrong number of rows")
            object.__setattr__(self, "features", feats)

    def __len__(self):
        return len(self.scores)

    def with_pi(self, pi) -> "ShiftSample":
        return ShiftSample(self.scores, self.predictions, self.labels, self.c, pi,
                           self.features, self.eps)


@dataclass
class Components:
    """Component estimates and their (scaled) influence values.

    ``phi_*`` are the raw plug-in influence values under each weighting;
    ``varphi_*`` are the scaled versions ``weight * phi / normalizer`` whose
    plain means are the linear terms of the component estimators.
    """

    theta_lab: float
    theta_lab_f: float
    theta_f: float
    phi_lab: np.ndarray
    phi_lab_f: np.ndarray
    phi_f: np.ndarray
    varphi_lab: np.ndarray
    varphi_lab_f: np.ndarray
    varphi_f: np.ndarray
    weights_lab: np.ndarray
    weights_f: np.ndarray


def _target_weights(t: Target, c, pi):
    if t is Target.FULL:
        return c / pi, np.ones_like(pi), 1.0
    if t is Target.UNLABELED:
        return c * (1 - pi) / pi, 1 - pi, np.mean(1 - c)
    return c, pi, np.mean(c)


def component_estimates(e: Estimand, s: ShiftSample, t: Target | str) -> Components:
    t = Target(t)
    if s.pi is None:
        raise InvalidInput("component_estimates needs known pi")
    w_lab, w_f, norm = _target_weights(t, s.c, s.pi)
    cols_y = WeightedColumns(s.scores, s.labels, w_lab)
    cols_lf = WeightedColumns(s.scores, s.predictions, w_lab)
    cols_f = WeightedColumns(s.scores, s.predictions, w_f)
    phi_lab = influence_values(e, cols_y)
    phi_lab_f = influence_values(e, cols_lf)
    phi_f = influence_values(e, cols_f)
    return Components(
        theta_lab=plugin_estimate(e, cols_y),
        theta_lab_f=plugin_estimate(e, cols_lf),
        theta_f=plugin_estimate(e, cols_f),
        phi_lab=phi_lab,
        phi_lab_f=phi_lab_f,
        phi_f=phi_f,
        varphi_lab=w_lab * phi_lab / norm,
        varphi_lab_f=w_lab * phi_lab_f / norm,
        varphi_f=w_f * phi_f / norm,
        weights_lab=w_lab,
        weights_f=w_f,
    )


def _cov(a, b):
    return float(np.mean((a - a.mean()) * (b - b.mean())))


def generic_omega(varphi_lab_y, varphi_lab_f, varphi_f) -> float:
    """``Cov(lab_y, lab_f - f) / Var(f - lab_f)``; 0 for a degenerate denominator."""
    a = np.asarray(varphi_lab_y, dtype=float)
    lf = np.asarray(varphi_lab_f, dtype=float)
    f = np.asarray(varphi_f, dtype=float)
    if not (a.shape == lf.shape == f.shape):
        raise LengthMismatch("influence vectors differ in length")
    d = f - lf
    var_d = _cov(d, d)
    if var_d * len(d) < 1e-12 * len(d):
        return 0.0
    return _cov(a, lf - f) / var_d


def _combine(theta_lab, theta_lab_f, theta_f, a, lf, f, level, estimator, omega=None):
    m = len(a)
    d = f - lf
    var_a = _cov(a, a)
    var_d = _cov(d, d)
    degenerate = var_d < 1e-12
    w = generic_omega(a, lf, f)
    var = var_a if degenerate else var_a - _cov(a, d) ** 2 / var_d
    if omega is not None:
        w = float(omega)
    point = theta_lab + w * (theta_f - theta_lab_f)
    return _finish(point, w, var, theta_lab, var_a, m, level, estimator, degenerate)


def ppi_shift(
    e: Estimand,
    s: ShiftSample,
    t: Target | str = Target.FULL,
    level: float = 0.95,
    omega: float | None = None,
) -> PpiResult:
    """PPI for the full, unlabeled or labeled population with known ``pi``."""
    t = Target(t)
    z_quantile(level)
    comp = component_estimates(e, s, t)
    return _combine(comp.theta_lab, comp.theta_lab_f, comp.theta_f,
                    comp.varphi_lab, comp.varphi_lab_f, comp.varphi_f,
                    level, f"ppi-shift[{t.value}]", omega)


# ---------------------------------------------------------------------------
# estimated labeling mechanism
# ---------------------------------------------------------------------------


@dataclass
class LogisticConfig:
    tol: float = 1e-8
    max_iter: int = 100
    ridge: float = 0.0
    eps: float = DEFAULT_EPS
    separation_norm: float = 30.0


@dataclass
class LogisticPiModel:
    """Fitted logistic model for ``Pr(C = 1 | x)``.

    ``info_matrix`` is the summed Fisher information
    ``sum_i x_i x_i' p_i (1 - p_i)`` (plus ridge); ``design`` is the
    intercept-augmented feature matrix used in the fit.
    """

    coefficients: np.ndarray
    info_matrix: np.ndarray
    converged: bool
    n_iter: int
    design: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    eps: float = DEFAULT_EPS

    @property
    def n_obs(self) -> int:
        return len(self.design)

    def linear_predictor(self, features=None):
        x = self.design if features is None else _augment(features)
        return x @ self.coefficients

    def predict(self, features=None):
        p = expit(self.linear_predictor(features))
        return np.clip(p, self.eps, 1 - self.eps)

    def score(self):
        return self.design.T @ (self.c - expit(self.design @ self.coefficients))

    def influence_basis(self) -> np.ndarray:
        """Rows ``I^{-1} x_i (c_i - p_i)`` with per-observation information.

        The influence of ``pi_hat(x)`` at observation i is
        ``x' basis[i] * p(x) (1 - p(x))``.
        """
        per_obs = self.info_matrix / self.n_obs
        resid = self.c - expit(self.design @ self.coefficients)
        return np.linalg.solve(per_obs, (self.design * resid[:, None]).T).T


def _augment(features):
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(len(x)), x])


def fit_logistic_pi(features, c, config: LogisticConfig | None = None) -> LogisticPiModel:
    """Newton/IRLS maximum likelihood fit of a logistic labeling model.

    ``features`` may have zero columns (intercept-only).  Raises
    :class:`Separation` when the coefficient norm diverges without ridge.
    """
    cfg = config or LogisticConfig()
    c = np.asarray(c, dtype=float).ravel()
    if features is None:
        x = np.ones((len(c), 1))
    else:
        x = _augment(features)
    if len(x) != len(c):
        raise LengthMismatch("features and c differ in length")
    if c.sum() in (0, len(c)):
        raise InvalidInput("c must contain both labeled and unlabeled rows")
    k = x.shape[1]
    penalty = cfg.ridge * np.eye(k)
    beta = np.zeros(k)
    beta[0] = np.log(c.mean() / (1 - c.mean()))
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        p = expit(x @ beta)
        grad = x.T @ (c - p) - penalty @ beta
        info = (x * (p * (1 - p))[:, None]).T @ x + penalty
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]
        beta = beta + step
        if cfg.ridge == 0 and np.linalg.norm(beta) > cfg.separation_norm:
            raise Separation(
                f"coefficient norm {np.linalg.norm(beta):.3g} exceeds "
                f"{cfg.separation_norm}; the MLE may not exist (try ridge > 0)"
            )
        p = expit(x @ beta)
        if np.max(np.abs(x.T @ (c - p) - penalty @ beta)) <= cfg.tol:
            converged = True
            break
    p = expit(x @ beta)
    info = (x * (p * (1 - p))[:, None]).T @ x + penalty
    return LogisticPiModel(beta, info, converged, it, x, c, cfg.eps)


def estimated_pi_correction(phi, c, pi_hat, basis, design) -> np.ndarray:
    """First-order term from estimating ``pi`` for an IPW component.

    Returns ``corr_i = E_j[c_j phi_j / pi_j^2 * phi_pi(c_i, x_i; x_j)]`` with
    the expectation replaced by the average over all rows.
    """
    g = design.T @ (c * phi * (1 - pi_hat) / pi_hat) / len(c)
    return basis @ g


def ppi_shift_estimated_pi(
    e: Estimand,
    s: ShiftSample,
    model: LogisticPiModel,
    level: float = 0.95,
    target: Target | str = Target.FULL,
    pi_correction: bool = True,
    omega: float | None = None,
) -> PpiResult:
    """Full-population PPI with ``pi`` replaced by a fitted logistic model.

    With ``pi_correction=False`` the first-order term is dropped, which
    reduces exactly to :func:`ppi_shift` at ``pi = pi_hat``.
    """
    if Target(target) is not Target.FULL:
        raise UnsupportedTarget("estimated pi is only supported for the full target")
    if not model.converged:
        raise NotConverged(f"logistic fit did not converge after {model.n_iter} iterations")
    if model.n_obs != len(s):
        raise LengthMismatch("model was fitted on a different number of rows")
    z_quantile(level)
    pi_hat = model.predict()
    comp = component_estimates(e, s.with_pi(pi_hat), Target.FULL)
    a, lf = comp.varphi_lab, comp.varphi_lab_f
    if pi_correction:
        basis = model.influence_basis()
        a = a - estimated_pi_correction(comp.phi_lab, s.c, pi_hat, basis, model.design)
        lf = lf - estimated_pi_correction(comp.phi_lab_f, s.c, pi_hat, basis, model.design)
    return _combine(comp.theta_lab, comp.theta_lab_f, comp.theta_f, a, lf, comp.varphi_f,
                    level, "ppi-shift[full, estimated pi]", omega)
