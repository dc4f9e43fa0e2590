import warnings

import numpy as np
import pytest

from gppi import (
    AllLabeled,
    Estimand,
    InvalidInput,
    InvalidLevel,
    LabeledUnlabeledData,
    LengthMismatch,
    Mode,
    NoneLabeled,
    WeightedColumns,
    estimate_omega,
    influence_values,
    plugin_estimate,
    ppi_md_form,
    ppi_no_shift,
)
from gppi.sim import dgp_main

ESTIMANDS = [Estimand.mean(), Estimand.tpr(0.6), Estimand.fpr(0.6), Estimand.auc()]


def simulated(n, N, seed, predictor="ideal"):
    rng = np.random.default_rng(seed)
    d = dgp_main(n + N, rng)
    if predictor == "ideal":
        f = d.true_prob
    else:
        f = rng.uniform(0.01, 0.99, n + N)
    r, y = d.scores, d.labels
    return LabeledUnlabeledData(r[:n], f[:n], y[:n], r[n:], f[n:]), (r, f, y)


# -- estimate_omega -------------------------------------------------------


def test_omega_examples():
    phi = np.array([0.3, -1.0, 0.7])
    assert estimate_omega(phi, phi) == pytest.approx(1.0)
    assert estimate_omega([1, -1, 1, -1], [1, 1, -1, -1]) == 0.0
    assert estimate_omega(phi, 2 * phi) == pytest.approx(0.5)


def test_omega_degenerate_and_lengths():
    assert estimate_omega([1.0, 2.0], [0.0, 0.0]) == 0.0
    with pytest.raises(LengthMismatch):
        estimate_omega([1, 2], [1, 2, 3])


def test_omega_scale_invariance():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=50), rng.normal(size=50)
    for k in (-3.0, 0.01, 7.0):
        w = estimate_omega(a, b)
        wk = estimate_omega(a, k * b)
        assert wk == pytest.approx(w / k)
        np.testing.assert_allclose(wk * (k * b), w * b)


# -- data container ---------------------------------------------------------


def test_data_validation():
    with pytest.raises(InvalidInput, match="no unlabeled data"):
        LabeledUnlabeledData([0, 1], [0.1, 0.2], [0, 1], [], [])
    with pytest.raises(InvalidInput):
        LabeledUnlabeledData([0], [0.1], [0], [1], [0.2])
    with pytest.raises(InvalidInput):
        LabeledUnlabeledData([0, 1], [0.1, 1.2], [0, 1], [1], [0.2])
    with pytest.raises(LengthMismatch):
        LabeledUnlabeledData([0, 1], [0.1], [0, 1], [1], [0.2])
    d = LabeledUnlabeledData.from_pooled([1, 2, 3], [0.1, 0.2, 0.3], [0, 1, np.nan], [1, 1, 0])
    assert (d.n, d.N, d.lam) == (2, 1, 2.0)


# -- ppi_no_shift -----------------------------------------------------------


def test_result_fields_consistent():
    data, _ = simulated(500, 5000, 0)
    res = ppi_no_shift(Estimand.auc(), data, level=0.9)
    assert res.ci_low <= res.point <= res.ci_high
    assert res.se >= 0
    assert res.se <= res.baseline_se
    assert res.se_ratio == pytest.approx(res.se / res.baseline_se)
    assert res.n_effective == 500
    lab = WeightedColumns(data.labeled_scores, data.labels)
    assert res.baseline_point == plugin_estimate(Estimand.auc(), lab)
    phi = influence_values(Estimand.auc(), lab)
    assert res.baseline_se == pytest.approx(np.sqrt(np.mean(phi**2) / 500))


def test_invalid_level():
    data, _ = simulated(50, 50, 0)
    for level in (0, 1, 1.5):
        with pytest.raises(InvalidLevel):
            ppi_no_shift(Estimand.mean(), data, level=level)


def test_mse_rectifier_vanishes():
    rng = np.random.default_rng(3)
    r = rng.random(300)
    y = (rng.random(300) < r).astype(float)
    data = LabeledUnlabeledData(r[:100], r[:100], y[:100], r[100:], r[100:])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = ppi_no_shift(Estimand.mse(), data)
    assert res.point == res.baseline_point
    assert res.se == res.baseline_se
    assert res.degenerate


def test_degenerate_rectifier_warns():
    r = np.linspace(0, 1, 20)
    y = (r > 0.5).astype(float)
    data = LabeledUnlabeledData(r[:10], r[:10], y[:10], r[10:], r[10:])
    with pytest.warns(RuntimeWarning):
        ppi_no_shift(Estimand.mse(), data)


def test_perfect_predictions_lambda_formula():
    # f == y on labeled rows makes phi_f == phi_y
    rng = np.random.default_rng(2)
    n, N = 400, 1600
    r = rng.normal(size=n + N)
    y = (rng.random(n + N) < 0.4).astype(float)
    data = LabeledUnlabeledData(r[:n], y[:n], y[:n], r[n:], y[n:])
    for e in ESTIMANDS:
        res = ppi_no_shift(e, data)
        phi = influence_values(e, WeightedColumns(r[:n], y[:n]))
        lam = n / N
        assert res.se**2 * n == pytest.approx(np.mean(phi**2) * lam / (1 + lam), rel=1e-9)
        assert res.omega_hat == pytest.approx(1.0)


def test_modes_share_se_and_mean_points_coincide():
    data, _ = simulated(300, 3000, 4)
    for e in ESTIMANDS:
        a = ppi_no_shift(e, data, mode=Mode.ALL)
        b = ppi_no_shift(e, data, mode="only-n")
        assert a.se == b.se
        assert b.omega_hat == pytest.approx(a.omega_hat / (1 + data.lam))
    a = ppi_no_shift(Estimand.mean(), data, mode="all")
    b = ppi_no_shift(Estimand.mean(), data, mode="only-n")
    assert a.point == pytest.approx(b.point, abs=1e-12)


def test_mode_difference_is_higher_order():
    scaled = []
    for n in (250, 1000, 4000):
        diffs = []
        for seed in range(20):
            data, _ = simulated(n, 4 * n, 100 + seed)
            a = ppi_no_shift(Estimand.tpr(0.6), data, mode="all")
            b = ppi_no_shift(Estimand.tpr(0.6), data, mode="only-n")
            diffs.append(abs(a.point - b.point))
        scaled.append(np.sqrt(n) * np.mean(diffs))
    assert scaled[2] < scaled[0]


def test_never_worse_random():
    for seed in range(30):
        data, _ = simulated(60, 200, seed, predictor="noise" if seed % 2 else "ideal")
        for e in ESTIMANDS + [Estimand.mse()]:
            for mode in Mode:
                res = ppi_no_shift(e, data, mode=mode)
                assert res.se <= res.baseline_se


def test_omega_override():
    data, _ = simulated(200, 800, 5)
    res = ppi_no_shift(Estimand.mean(), data, omega=0.0)
    assert res.point == res.baseline_point


# -- ppi_md_form --------------------------------------------------------


def test_md_all_labeled_raises():
    r = np.arange(5.0)
    with pytest.raises(AllLabeled):
        ppi_md_form(Estimand.mean(), r, np.full(5, 0.5), np.ones(5), np.ones(5))
    with pytest.raises(NoneLabeled):
        ppi_md_form(Estimand.mean(), r, np.full(5, 0.5), np.ones(5), np.zeros(5))


def test_md_zero_omega_is_baseline():
    _, (r, f, y) = simulated(200, 800, 6)
    c = np.zeros(1000)
    c[:200] = 1
    for e in ESTIMANDS:
        res = ppi_md_form(e, r, f, np.where(c == 1, y, np.nan), c, omega=0.0)
        lab = plugin_estimate(e, WeightedColumns(r[:200], y[:200]))
        assert res.point == pytest.approx(lab, abs=1e-12)
        assert res.baseline_point == pytest.approx(lab, abs=1e-15)


def test_md_close_to_no_shift():
    data, (r, f, y) = simulated(1000, 10000, 7)
    c = np.zeros(len(r))
    c[:1000] = 1
    for e in ESTIMANDS:
        md = ppi_md_form(e, r, f, np.where(c == 1, y, np.nan), c)
        ns = ppi_no_shift(e, data)
        assert md.se <= md.baseline_se
        assert abs(md.point - ns.point) < 0.25 * ns.se
        assert md.se == pytest.approx(ns.se, rel=0.1)
