"""Plug-in estimators over weighted empirical CDFs and their influence values.

Every estimand is a functional of the self-normalized weighted empirical
distribution of ``(score, response)`` pairs.  Responses are either binary
labels or soft predictions in ``[0, 1]``; soft responses are treated as
fractional positive mass, never thresholded.

AUC uses the strict-inequality convention: tied (positive, negative) score
pairs contribute 0 rather than 1/2.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDenominator, InvalidInput, LengthMismatch


class Kind(str, enum.Enum):
    MEAN = "mean"
    TPR = "tpr"
    FPR = "fpr"
    AUC = "auc"
    MSE = "mse"


@dataclass(frozen=True)
class Estimand:
    kind: Kind
    alpha: float | None = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (Kind.TPR, Kind.FPR):
            if self.alpha is None or not np.isfinite(self.alpha):
                raise InvalidInput(f"{kind.value} needs a finite threshold alpha")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise InvalidInput(f"{kind.value} takes no threshold")

    @classmethod
    def mean(cls):
        return cls(Kind.MEAN)

    @classmethod
    def tpr(cls, alpha):
        return cls(Kind.TPR, alpha)

    @classmethod
    def fpr(cls, alpha):
        return cls(Kind.FPR, alpha)

    @classmethod
    def auc(cls):
        return cls(Kind.AUC)

    @classmethod
    def mse(cls):
        return cls(Kind.MSE)

    @classmethod
    def parse(cls, text: str, alpha: float | None = None) -> "Estimand":
        """Build from ``"tpr"``, ``"tpr(0.6)"``, ``"auc"`` and so on."""
        text = text.strip().lower()
        if "(" in text:
            name, _, rest = text.partition("(")
            alpha = float(rest.rstrip(")"))
            text = name.strip()
        kind = Kind(text)
        if kind not in (Kind.TPR, Kind.FPR):
            alpha = None
        return cls(kind, alpha)

    @property
    def label(self) -> str:
        if self.alpha is None:
            return self.kind.value
        return f"{self.kind.value}({self.alpha:g})"

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class WeightedColumns:
    """Scores, responses and nonnegative weights of equal length."""

    scores: np.ndarray
    responses: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float).ravel()
        responses = np.asarray(self.responses, dtype=float).ravel()
        if self.weights is None:
            weights = np.ones_like(scores)
        else:
            weights = np.asarray(self.weights, dtype=float).ravel()
        if not (len(scores) == len(responses) == len(weights)):
            raise LengthMismatch(
                f"lengths differ: scores={len(scores)}, responses={len(responses)}, "
                f"weights={len(weights)}"
            )
        if len(scores) == 0:
            raise InvalidInput("need at least one observation")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InvalidInput("weights must be finite and nonnegative")
        if weights.sum() <= 0:
            raise DegenerateDenominator("weights sum to zero")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "responses", responses)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.scores)


# ---------------------------------------------------------------------------
# core computations on normalized weights (no validation: the Gateaux oracle
# evaluates at slightly negative weights)
# ---------------------------------------------------------------------------


def _normalized(w):
    return w / w.sum()


def _ratio_parts(kind, r, v, wn, alpha):
    pos = v if kind is Kind.TPR else 1.0 - v
    denom = np.dot(wn, pos)
    if not denom > 0:
        raise DegenerateDenominator(
            f"{kind.value}: weighted {'positive' if kind is Kind.TPR else 'negative'} "
            "mass is zero"
        )
    above = (r > alpha).astype(float)
    numer = np.dot(wn, above * pos)
    return pos, above, numer, denom


def _auc_parts(r, v, wn):
    """Mass-weighted conditional CDFs at each observation's own score.

    Returns (theta, P, Q, neg_below, pos_at_or_below) where ``neg_below[i]`` is
    the negative mass with score strictly below r_i (normalized by Q) and
    ``pos_at_or_below[i]`` the positive mass with score <= r_i (normalized by P).
    """
    pm = wn * v
    nm = wn * (1.0 - v)
    if not (pm.sum() > 0 and nm.sum() > 0):
        raise DegenerateDenominator("auc: needs positive and negative response mass")
    order = np.argsort(r, kind="mergesort")
    rs = r[order]
    cum_neg = np.concatenate(([0.0], np.cumsum(nm[order])))
    cum_pos = np.concatenate(([0.0], np.cumsum(pm[order])))
    # normalize by the cumulative totals so the extreme CDF values are exactly 0 and 1
    P, Q = cum_pos[-1], cum_neg[-1]
    lo = np.searchsorted(rs, r, side="left")
    hi = np.searchsorted(rs, r, side="right")
    neg_below = cum_neg[lo] / Q
    pos_at_or_below = cum_pos[hi] / P
    theta = np.sum(pm * neg_below) / np.sum(pm)
    return theta, P, Q, neg_below, pos_at_or_below


def _estimate(e: Estimand, r, v, w):
    wn = _normalized(w)
    kind = e.kind
    if kind is Kind.MEAN:
        return float(np.dot(wn, v))
    if kind is Kind.MSE:
        return float(np.dot(wn, (v - r) ** 2))
    if kind in (Kind.TPR, Kind.FPR):
        _, _, numer, denom = _ratio_parts(kind, r, v, wn, e.alpha)
        return float(numer / denom)
    return float(_auc_parts(r, v, wn)[0])


def _influence(e: Estimand, r, v, w):
    wn = _normalized(w)
    kind = e.kind
    if kind is Kind.MEAN:
        return v - np.dot(wn, v)
    if kind is Kind.MSE:
        sq = (v - r) ** 2
        return sq - np.dot(wn, sq)
    if kind in (Kind.TPR, Kind.FPR):
        pos, above, numer, denom = _ratio_parts(kind, r, v, wn, e.alpha)
        return above * pos / denom - numer * pos / denom**2
    theta, P, Q, neg_below, pos_le = _auc_parts(r, v, wn)
    return (
        (1.0 - v) / Q * (1.0 - pos_le)
        + v / P * neg_below
        - ((1.0 - v) / Q + v / P) * theta
    )


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def plugin_estimate(e: Estimand, cols: WeightedColumns) -> float:
    """Evaluate the estimand at the weights-normalized empirical CDF."""
    return _estimate(e, cols.scores, cols.responses, cols.weights)


def influence_values(e: Estimand, cols: WeightedColumns) -> np.ndarray:
    """Per-observation influence values with plug-in moments.

    Population moments in the influence function are replaced by their
    weighted empirical counterparts (the same weights as the estimate), so
    ``sum(weights * phi) == 0`` up to rounding.
    """
    return _influence(e, cols.scores, cols.responses, cols.weights)


def gateaux_oracle(
    e: Estimand, cols: WeightedColumns, i: int, eps: float = 1e-5, central: bool = False
) -> float:
    """Numerical derivative of the estimand along a point mass at observation ``i``.

    The mixture ``(1 - eps) F_w + eps * delta_i`` is realized exactly by
    rescaling the normalized weights and adding ``eps`` to entry ``i``.
    """
    if not 0 < eps <= 0.1:
        raise InvalidInput("eps must lie in (0, 0.1]")
    n = len(cols)
    if not -n <= i < n:
        raise IndexError(i)
    r, v = cols.scores, cols.responses
    wn = _normalized(cols.weights)
    point = np.zeros(n)
    point[i] = 1.0

    def at(t):
        return _estimate(e, r, v, (1.0 - t) * wn + t * point)

    if central:
        return (at(eps) - at(-eps)) / (2 * eps)
    return (at(eps) - at(0.0)) / eps


def auc_pairwise(cols: WeightedColumns) -> float:
    """Quadratic-time AUC by explicit pair enumeration (test oracle)."""
    r, v = cols.scores, cols.responses
    wn = _normalized(cols.weights)
    pm = wn * v
    nm = wn * (1.0 - v)
    wins = (r[:, None] > r[None, :]).astype(float)
    denom = pm.sum() * nm.sum()
    if not denom > 0:
        raise DegenerateDenominator("auc: needs positive and negative response mass")
    return float(pm @ wins @ nm / denom)
