import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lppd_quadrature, lppd_vi_quadrature, press_refit, safebayes_sequential
from powerpost import tuning
from powerpost.errors import (
    AlphaOutOfRange,
    ConfigError,
    DegenerateFold,
    EmptyFold,
    NonPositiveAlpha,
)
from powerpost.linmodel import Dataset
from powerpost.tuning import (
    DATA_GRIDS,
    SIMULATION_GRIDS,
    Grid,
    Split,
    lppd_loo,
    lppd_loo_curve,
    lppd_loo_vi,
    lppd_loo_vi_curve,
    parse_grid,
    press,
    random_split,
    recode_alpha,
    safe_bayes_loss,
    train_test_loss,
    tune,
)


def random_data(seed, n=20, p=2, sigma2=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    return Dataset(X, X @ rng.standard_normal(p) + rng.standard_normal(n), sigma2)


# --- leave-one-out predictive density ----------------------------------------

def test_lppd_matches_quadrature_n5_p2():
    d = random_data(11, n=5, p=2)
    assert lppd_loo(d, 0.7) == pytest.approx(lppd_quadrature(d.X, d.y, 0.7), rel=1e-6)
    assert lppd_loo_vi(d, 0.7) == pytest.approx(lppd_vi_quadrature(d.X, d.y, 0.7), rel=1e-6)


def test_lppd_quadrature_with_non_unit_variance():
    d = random_data(12, n=6, p=2, sigma2=0.4)
    assert lppd_loo(d, 2.5) == pytest.approx(lppd_quadrature(d.X, d.y, 2.5, 0.4), rel=1e-6)
    assert lppd_loo_vi(d, 2.5) == pytest.approx(lppd_vi_quadrature(d.X, d.y, 2.5, 0.4), rel=1e-6)


def test_curve_matches_pointwise():
    d = random_data(13)
    alphas = np.geomspace(1e-3, 1e3, 7)
    np.testing.assert_allclose(lppd_loo_curve(d, alphas), [lppd_loo(d, a) for a in alphas])
    np.testing.assert_allclose(lppd_loo_vi_curve(d, alphas), [lppd_loo_vi(d, a) for a in alphas])


def test_vi_equals_exact_when_folds_are_orthogonal():
    # each row touches one coordinate, so every fold Gram matrix is diagonal
    X = np.array([[1.0, 0], [0, 2.0], [1.5, 0], [0, -1.0], [0.5, 0], [0, 0.7]])
    d = Dataset(X, [1.0, -0.5, 2.0, 0.3, 0.1, -1.0])
    for a in (0.01, 0.3, 4.0):
        assert lppd_loo_vi(d, a) == pytest.approx(lppd_loo(d, a), rel=1e-13)


def test_lppd_finite_over_full_alpha_range():
    d = random_data(14)
    vals = lppd_loo_curve(d, np.geomspace(1e-12, 1e12, 50))
    assert np.all(np.isfinite(vals))
    assert np.all(np.isfinite(lppd_loo_vi_curve(d, np.geomspace(1e-12, 1e12, 50))))


def test_lppd_rejects_bad_input():
    with pytest.raises(NonPositiveAlpha):
        lppd_loo(random_data(0), 0.0)
    with pytest.raises(DegenerateFold):
        lppd_loo(Dataset([[1.0]], [1.0]), 1.0)


def test_fold_rescaled_lambda_formulation_selects_same_alpha():
    # folds with Gram X_{-i}'X_{-i} / (n - 1) and ridge penalty lambda give the
    # tempered posterior with alpha = 1 / ((n - 1) lambda)
    d = random_data(15, n=12)
    grid = SIMULATION_GRIDS["bcv"].with_range(1e-4, 10.0, 40, "logarithmic")
    lams = grid.values()
    direct = []
    for lam in lams:
        total = 0.0
        for i in range(d.n):
            keep = np.arange(d.n) != i
            G = d.X[keep].T @ d.X[keep] / (d.n - 1)
            P = np.eye(d.p) + G / lam
            cov = np.linalg.inv(P)
            mean = cov @ (d.X[keep].T @ d.y[keep] / ((d.n - 1) * lam))
            var = 1.0 + d.X[i] @ cov @ d.X[i]
            total += -0.5 * (np.log(2 * np.pi * var) + (d.y[i] - d.X[i] @ mean) ** 2 / var)
        direct.append(total / d.n)
    res = tune(d, "bcv", grid)
    assert res.lambda_hat == lams[int(np.argmax(direct))]
    assert res.alpha_hat == pytest.approx(1.0 / ((d.n - 1) * res.lambda_hat))


# --- PRESS ---------------------------------------------------------------------

def test_press_vanishing_alpha_limit():
    d = Dataset(np.eye(2), [2.0, 4.0])
    assert press(d, 1e-12) == pytest.approx(10.0, rel=1e-9)


@given(st.integers(0, 10_000), st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_press_matches_explicit_refits(seed, log_alpha):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(3, 30)), int(rng.integers(1, 5))
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    alpha = 10.0 ** log_alpha
    assert abs(press(Dataset(X, y), alpha) - press_refit(X, y, alpha)) <= 1e-10
    assert press(Dataset(X, y), alpha) >= 0


def test_press_n6_alpha3():
    d = random_data(16, n=6)
    assert abs(press(d, 3.0) - press_refit(d.X, d.y, 3.0)) <= 1e-10


# --- train-test ----------------------------------------------------------------

def test_train_test_interpolation_is_exact():
    X = np.random.default_rng(0).standard_normal((10, 2))
    d = Dataset(X, X @ [1.0, -2.0])
    split = random_split(10, seed=3)
    assert train_test_loss(d, split, 0.0) == pytest.approx(0.0, abs=1e-20)


def test_train_test_matches_augmented_least_squares():
    d = random_data(17, n=10)
    split = random_split(d.n, seed=5)
    tr, te = split
    lam = 0.1

    # ridge as ordinary least squares on rows augmented with sqrt(lam) I, solved by SVD
    A = np.vstack([d.X[tr] / np.sqrt(tr.size), np.sqrt(lam) * np.eye(d.p)])
    rhs = np.concatenate([d.y[tr] / np.sqrt(tr.size), np.zeros(d.p)])
    b = np.linalg.lstsq(A, rhs, rcond=None)[0]
    mse = np.mean((d.y[te] - d.X[te] @ b) ** 2)
    assert train_test_loss(d, split, lam) == pytest.approx(mse, abs=1e-10)


def test_train_test_loss_continuous_and_nonnegative():
    d = random_data(18)
    split = random_split(d.n, seed=1)
    lams = np.linspace(0, 2, 401)
    vals = tuning.train_test_curve(d, split, lams)
    assert np.all(vals >= 0)
    assert np.max(np.abs(np.diff(vals))) < 0.05


def test_split_validation():
    s = random_split(10, seed=0, fraction=0.7)
    assert len(s.train_idx) == 7 and len(s.test_idx) == 3
    assert not set(s.train_idx) & set(s.test_idx)
    assert np.array_equal(random_split(10, 0).train_idx, random_split(10, 0).train_idx)
    with pytest.raises(EmptyFold):
        random_split(2, seed=0, fraction=0.9)
    with pytest.raises(ConfigError):
        random_split(10, seed=0, fraction=1.0)
    d = random_data(0, n=6)
    with pytest.raises(EmptyFold):
        train_test_loss(d, Split(np.arange(6), np.array([], dtype=int)), 0.1)


# --- SafeBayes ------------------------------------------------------------------

def test_safebayes_no_update_at_alpha_zero():
    d = random_data(19, n=8)
    expected = np.sum(d.y ** 2 + np.sum(d.X ** 2, axis=1))
    assert safe_bayes_loss(d, 0.0) == pytest.approx(expected, rel=1e-12)


def test_safebayes_hand_example():
    d = Dataset(np.ones((3, 1)), [1.0, 1.0, 1.0])
    # prefix precisions 1, 2, 3; means 0, 1/2, 2/3
    hand = (1 + 1) + (0.25 + 0.5) + (1 / 9 + 1 / 3)
    assert safe_bayes_loss(d, 1.0) == pytest.approx(hand, abs=1e-12)
    assert safe_bayes_loss(d, 1.0) == pytest.approx(safebayes_sequential(d.X, d.y, 1.0), abs=1e-10)


@pytest.mark.parametrize("alpha", [0.0, 0.13, 0.5, 1.0])
def test_safebayes_matches_sequential_recomputation(alpha):
    d = random_data(20, n=15, p=3, sigma2=0.8)
    assert safe_bayes_loss(d, alpha) == pytest.approx(
        safebayes_sequential(d.X, d.y, alpha, 0.8), rel=1e-10)
    assert np.isfinite(safe_bayes_loss(d, alpha))


def test_safebayes_range():
    with pytest.raises(AlphaOutOfRange):
        safe_bayes_loss(random_data(0), 1.5)


# --- grids and selection ---------------------------------------------------------

def test_published_simulation_grids():
    g = SIMULATION_GRIDS["bcv"]
    assert (g.parameter, g.spacing, g.lower, g.upper, g.density, g.mapping) == (
        "lambda", "logarithmic", 1e-12, 10.0, 200, "inv_n_minus_1_lambda")
    s = SIMULATION_GRIDS["safebayes"]
    assert (s.parameter, s.spacing, s.lower, s.upper, s.density, s.mapping) == (
        "alpha", "linear", 0.0, 1.0, 30, "identity")
    assert SIMULATION_GRIDS["loocv"].upper == 30.0
    assert SIMULATION_GRIDS["train-test"].upper == 5.0
    assert DATA_GRIDS["loocv"].upper == 0.5
    assert DATA_GRIDS["train-test"].upper == 0.05
    vals = g.values()
    assert vals[0] == pytest.approx(1e-12) and vals[-1] == pytest.approx(10.0) and vals.size == 200


def test_mappings_and_recode():
    assert SIMULATION_GRIDS["loocv"].to_alpha(1e-12, 100) == pytest.approx(1e12)
    assert recode_alpha(1e12) == math.inf
    assert recode_alpha(1e6) == 1e6
    assert SIMULATION_GRIDS["bcv"].to_alpha(0.5, 11) == pytest.approx(0.2)
    assert SIMULATION_GRIDS["train-test"].to_alpha(0.5, 10) == pytest.approx(0.2)


def test_parse_grid():
    g = parse_grid("1e-3:1:50:log", SIMULATION_GRIDS["bcv"])
    assert (g.lower, g.upper, g.density, g.spacing, g.mapping) == (
        1e-3, 1.0, 50, "logarithmic", "inv_n_minus_1_lambda")
    for bad in ("1:2:3", "1:2:3:cubic", "a:b:c:lin", "0:1:10:log", "2:1:10:lin"):
        with pytest.raises(ConfigError):
            parse_grid(bad, SIMULATION_GRIDS["bcv"])


def test_corner_selection_recoded():
    # exact linear response: LOOCV prefers no shrinkage, i.e. the smallest lambda
    X = np.random.default_rng(0).standard_normal((100, 2))
    d = Dataset(X, X @ [1.0, 2.0])
    res = tune(d, "loocv")
    assert res.lambda_hat == pytest.approx(1e-12)
    assert res.alpha_hat == math.inf and res.is_corner
    assert json.loads(res.to_json())["alpha_hat"] == "inf"


def test_ties_go_to_smallest_grid_value(monkeypatch):
    d = random_data(21)
    monkeypatch.setattr(tuning, "loss_curve", lambda *a, **k: np.zeros(200))
    assert tune(d, "loocv").lambda_hat == SIMULATION_GRIDS["loocv"].values()[0]
    assert tune(d, "bcv").lambda_hat == SIMULATION_GRIDS["bcv"].values()[0]


def test_constant_shift_does_not_move_selection(monkeypatch):
    d = random_data(22)
    base = tune(d, "bcv")
    real = tuning.loss_curve
    monkeypatch.setattr(tuning, "loss_curve", lambda *a, **k: real(*a, **k) + 123.4)
    assert tune(d, "bcv").lambda_hat == base.lambda_hat


def test_lambda_grid_equals_direct_alpha_search_on_image():
    d = random_data(23, n=30)
    lam_grid = SIMULATION_GRIDS["bcv"]
    res = tune(d, "bcv", lam_grid)
    image = lam_grid.to_alpha(lam_grid.values(), d.n)
    direct = image[int(np.argmax(lppd_loo_curve(d, image)))]
    assert res.alpha_hat == pytest.approx(recode_alpha(direct))


@pytest.mark.parametrize("method", tuning.METHODS)
def test_tune_is_deterministic(method):
    d = random_data(24, n=40)
    a, b = tune(d, method, seed=9), tune(d, method, seed=9)
    assert a.to_json() == b.to_json()
    if method == "safebayes":
        assert 0.0 <= a.alpha_hat <= 1.0
        assert "variant" in a.metadata


def test_tune_rejects_unknown_method():
    with pytest.raises(ConfigError):
        tune(random_data(0), "magic")
    with pytest.raises(ConfigError):
        tune(random_data(0), "safebayes", SIMULATION_GRIDS["bcv"])


def test_grid_validation():
    with pytest.raises(ConfigError):
        Grid("lambda", "logarithmic", 0.0, 1.0, 10, "inv_lambda")
    with pytest.raises(ConfigError):
        Grid("lambda", "linear", 1.0, 1.0, 10, "inv_lambda")
    with pytest.raises(ConfigError):
        Grid("beta", "linear", 0.0, 1.0, 10, "inv_lambda")
