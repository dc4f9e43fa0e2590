"""Density as a biomarker of wine colour, with PPI under a quality-based
labeling mechanism.

Reads the two public wine-quality CSV files (semicolon-delimited, header
row).  A logistic model of colour on all columns is fitted to a held-out
model-building split; on the remaining rows labels are revealed with
probability 0.2 (quality <= 6) or 0.3 (otherwise), and TPR, FPR and AUC of
density for red wine are estimated (i) from the labeled rows only, (ii) by
PPI for the full population, and (iii) from all labels (an oracle).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import expit

from ..errors import MissingColumn, SchemaMismatch
from ..estimands import Estimand, WeightedColumns, influence_values, plugin_estimate
from ..rectifier import z_quantile
from ..shift import LogisticConfig, ShiftSample, Target, fit_logistic_pi, ppi_shift

WINE_COLUMNS = (
    "fixed acidity", "volatile acidity", "citric acid", "residual sugar",
    "chlorides", "free sulfur dioxide", "total sulfur dioxide", "density",
    "pH", "sulphates", "alcohol", "quality",
)
RED_FILE = "winequality-red.csv"
WHITE_FILE = "winequality-white.csv"
DATA_ENV = "GPPI_WINE_DIR"


def find_wine_files(search=None) -> tuple[str, str] | None:
    """Locate the red/white CSVs in ``$GPPI_WINE_DIR``, ``./data`` or ``search``."""
    dirs = [d for d in (search, os.environ.get(DATA_ENV), "data") if d]
    for d in dirs:
        red, white = os.path.join(d, RED_FILE), os.path.join(d, WHITE_FILE)
        if os.path.isfile(red) and os.path.isfile(white):
            return red, white
    return None


def read_wine_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path, sep=";", float_precision="round_trip")
    df.columns = [c.strip().strip('"') for c in df.columns]
    if len(df.columns) == 1:
        raise SchemaMismatch(
            f"{path}: found a single column {df.columns[0]!r}; expected a "
            "semicolon-delimited file with a header row"
        )
    for col in ("density", "quality"):
        if col not in df.columns:
            raise MissingColumn(f"{path}: required column {col!r} is missing "
                                f"(found {list(df.columns)})")
    missing = [c for c in WINE_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaMismatch(f"{path}: missing columns {missing}")
    bad = [c for c in WINE_COLUMNS if not pd.api.types.is_numeric_dtype(df[c])]
    if bad:
        raise SchemaMismatch(f"{path}: non-numeric columns {bad}")
    return df[list(WINE_COLUMNS)]


def load_wine(red_csv, white_csv) -> pd.DataFrame:
    red = read_wine_csv(red_csv).assign(red=1.0)
    white = read_wine_csv(white_csv).assign(red=0.0)
    return pd.concat([red, white], ignore_index=True)


@dataclass
class WineReport:
    table: pd.DataFrame
    n_eval: int
    n_labeled: int
    model_auc: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_eval": self.n_eval,
            "n_labeled": self.n_labeled,
            "model_auc": self.model_auc,
            "results": self.table.to_dict(orient="records"),
        }

    def to_text(self) -> str:
        head = (f"evaluation rows {self.n_eval}, labeled {self.n_labeled}, "
                f"prediction-model AUC {self.model_auc:.6g}\n")
        return head + self.table.to_string(index=False, float_format=lambda v: f"{v:.6g}")


def _plain_se(e, r, v):
    phi = influence_values(e, WeightedColumns(r, v))
    return float(np.sqrt(np.mean(phi**2) / len(r)))


def wine_analysis(
    red_csv,
    white_csv,
    model_train_size: int = 2000,
    seed: int = 0,
    split_seed: int = 0,
    threshold: float = 0.998,
    quality_cut: int = 6,
    label_probs: tuple[float, float] = (0.2, 0.3),
    ridge: float = 1.0,
    level: float = 0.95,
) -> WineReport:
    """TPR, FPR (at ``threshold``) and AUC of density for red wine.

    ``split_seed`` fixes the model-building split; ``seed`` drives only the
    labeling draws, so the oracle column does not depend on it.
    """
    z_quantile(level)
    df = load_wine(red_csv, white_csv)
    if not 0 < model_train_size < len(df) - 10:
        raise SchemaMismatch(f"model_train_size {model_train_size} leaves too few rows")
    order = np.random.default_rng(split_seed).permutation(len(df))
    train, evald = df.iloc[order[:model_train_size]], df.iloc[order[model_train_size:]]

    feats = list(WINE_COLUMNS)
    mu = train[feats].mean()
    sd = train[feats].std(ddof=0).replace(0, 1.0)
    model = fit_logistic_pi(((train[feats] - mu) / sd).to_numpy(), train["red"].to_numpy(),
                            LogisticConfig(ridge=ridge, eps=0.0))
    f = expit(model.linear_predictor(((evald[feats] - mu) / sd).to_numpy()))

    r = evald["density"].to_numpy(dtype=float)
    y = evald["red"].to_numpy(dtype=float)
    pi = np.where(evald["quality"].to_numpy() <= quality_cut, *label_probs)
    c = (np.random.default_rng(seed).random(len(evald)) < pi).astype(float)
    sample = ShiftSample(r, f, np.where(c == 1, y, np.nan), c, pi)

    rows = []
    for e in (Estimand.tpr(threshold), Estimand.fpr(threshold), Estimand.auc()):
        res = ppi_shift(e, sample, Target.FULL, level=level)
        rows.append({
            "metric": e.label,
            "labeled_point": res.baseline_point,
            "ppi_point": res.point,
            "oracle_point": plugin_estimate(e, WeightedColumns(r, y)),
            "labeled_se": res.baseline_se,
            "ppi_se": res.se,
            "oracle_se": _plain_se(e, r, y),
            "se_ratio": res.se_ratio,
            "omega_hat": res.omega_hat,
        })
    model_auc = plugin_estimate(Estimand.auc(), WeightedColumns(f, y))
    return WineReport(pd.DataFrame(rows), len(evald), int(c.sum()), model_auc, seed)
