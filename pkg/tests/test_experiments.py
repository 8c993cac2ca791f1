import math

import numpy as np
import pytest

from powerpost import experiments
from powerpost.errors import ConfigError, InsufficientData, ParseError, SizeTooLarge
from powerpost.experiments import (
    AlphaSample,
    SimConfig,
    WageColumns,
    classify_regime,
    estimate_rate,
    generate,
    load_wage_data,
    rate_table,
    read_alpha_samples,
    run_replications,
    run_study,
    subsample_study,
    write_alpha_samples,
    write_rates,
)


def exact_samples(c=2.0, gamma=-1.0, ns=(100, 1000, 10_000), reps=3, method="bcv"):
    return [AlphaSample(n, method, r, c * n ** gamma, False) for n in ns for r in range(reps)]


# --- data generation -----------------------------------------------------------

def test_generate_shapes_and_determinism():
    mis = SimConfig.standard(50, True, reps=2, master_seed=4)
    d = generate(mis, 1)
    assert d.X.shape == (50, 2)
    assert np.array_equal(d.X, generate(mis, 1).X) and np.array_equal(d.y, generate(mis, 1).y)
    assert not np.array_equal(d.y, generate(mis, 0).y)
    well = SimConfig.standard(50, False, reps=2, master_seed=4)
    # same covariates and noise; only the generating coefficient differs
    dw = generate(well, 1)
    assert dw.X.shape == (50, 2)
    np.testing.assert_array_equal(dw.X, d.X)
    with pytest.raises(ConfigError):
        generate(mis, 2)


def test_generated_data_follow_the_model():
    sim = SimConfig(n=20_000, beta_star=(1.0, -0.5, 0.1), misspecified=False,
                    working_columns=(0, 1, 2))
    d = generate(sim, 0)
    coef = np.linalg.lstsq(d.X, d.y, rcond=None)[0]
    np.testing.assert_allclose(coef, [1.0, -0.5, 0.1], atol=0.03)
    resid = d.y - d.X @ coef
    assert resid.var() == pytest.approx(1.0, rel=0.05)
    np.testing.assert_allclose(d.X.T @ d.X / d.n, np.eye(3), atol=0.04)


def test_simconfig_validation():
    with pytest.raises(ConfigError):
        SimConfig(n=10, beta_star=(0.0, -0.5, 0.1), misspecified=True)
    with pytest.raises(ConfigError):
        SimConfig(n=10, beta_star=(1.0, -0.5, 0.1), misspecified=False)
    with pytest.raises(ConfigError):
        SimConfig(n=10, reps=0)
    with pytest.raises(ConfigError):
        SimConfig(n=10, beta_star=(1.0, 2.0))
    assert SimConfig.standard(10, True).spec == "misspecified"
    assert SimConfig.standard(10, False).spec == "well-specified"


# --- replication harness ------------------------------------------------------------

def test_single_replication_gives_one_sample_per_method():
    out = run_replications(SimConfig.standard(60, True, reps=1, master_seed=2))
    assert len(out) == len(experiments.METHODS)
    assert [s.method for s in out] == list(experiments.METHODS)
    assert all(s.ok for s in out)


def test_safebayes_in_unit_interval():
    out = run_replications(SimConfig.standard(80, True, reps=8, master_seed=3), ["safebayes"])
    assert all(0.0 <= s.alpha_hat <= 1.0 for s in out)


def test_bcv_misspecified_median_decreases():
    medians = []
    for n in (100, 1000, 5000):
        out = run_replications(SimConfig.standard(n, True, reps=10, master_seed=1), ["bcv"])
        medians.append(np.median([s.alpha_hat for s in out]))
    assert medians[0] > medians[1] > medians[2]


def test_replications_do_not_depend_on_execution_order():
    sim = SimConfig.standard(40, False, reps=4, master_seed=9)
    grids = experiments.SIMULATION_GRIDS
    forward = [experiments._replication((sim, ("bcv", "train-test"), grids, r)) for r in range(4)]
    backward = [experiments._replication((sim, ("bcv", "train-test"), grids, r))
                for r in reversed(range(4))][::-1]
    assert forward == backward
    assert [s for chunk in forward for s in chunk] == run_replications(sim, ["bcv", "train-test"])


def test_run_study_row_accounting():
    cells = [("bcv", True), ("train-test", False), ("loocv", True)]
    out = run_study([30, 60], cells, reps=3, seed=0)
    assert len(out) == 3 * 2 * 3
    assert {(s.method, s.spec) for s in out} == {
        ("bcv", "misspecified"), ("loocv", "misspecified"), ("train-test", "well-specified")}


def test_unknown_method_rejected():
    with pytest.raises(ConfigError):
        run_replications(SimConfig.standard(30, True), ["magic"])


# --- rate regression and regimes ---------------------------------------------------------

def test_exact_rate_recovery():
    est = estimate_rate(exact_samples())
    assert est.gamma_hat == pytest.approx(-1.0, abs=1e-12)
    assert math.exp(est.log_c) == pytest.approx(2.0, rel=1e-12)
    assert est.ci_high - est.ci_low == pytest.approx(0.0, abs=1e-10)
    assert est.corner_proportion == 0.0
    mean = estimate_rate(exact_samples(0.3, -0.4), aggregate="mean")
    assert mean.gamma_hat == pytest.approx(-0.4, abs=1e-12) and mean.n_points_used == 3


@pytest.mark.parametrize("gamma", [-1.3, -0.25, 0.0, 0.7])
def test_planted_exponents(gamma):
    assert estimate_rate(exact_samples(5.0, gamma, ns=(37, 400, 2200, 9000))).gamma_hat == \
        pytest.approx(gamma, abs=1e-12)


def test_corner_accounting_and_ci_ordering():
    rng = np.random.default_rng(0)
    samples = []
    for n in (100, 1000, 5000):
        for r in range(40):
            corner = bool(rng.random() < 0.4)
            a = math.inf if corner else 0.5 * n ** -0.6 * math.exp(0.3 * rng.standard_normal())
            samples.append(AlphaSample(n, "train-test", r, a, corner))
    est = estimate_rate(samples)
    assert est.ci_low <= est.gamma_hat <= est.ci_high
    assert est.corner_proportion * len(samples) == pytest.approx(sum(s.is_corner for s in samples))
    for n, share in est.corner_by_n.items():
        assert share * 40 == pytest.approx(sum(s.is_corner for s in samples if s.n == n))
    assert classify_regime(samples)[0] == "mixed"


def test_regime_labels():
    assert classify_regime(exact_samples(2.0, -1.0))[0] == "quickly_vanishing"
    rng = np.random.default_rng(1)
    flat = [AlphaSample(n, "loocv", r, 1.0 + 0.1 * rng.standard_normal(), False)
            for n in (100, 1000, 5000) for r in range(30)]
    assert classify_regime(flat)[0] == "constant"
    slow = exact_samples(1.0, -0.5)
    assert classify_regime(slow)[0] == "unclassified"


def test_nonpositive_and_failed_samples_are_counted():
    samples = exact_samples() + [AlphaSample(100, "bcv", 9, 0.0, False),
                                 AlphaSample(1000, "bcv", 9, math.nan, False, "", "failed: X")]
    est = estimate_rate(samples)
    assert est.dropped_nonpositive == 1 and est.failed == 1
    assert est.gamma_hat == pytest.approx(-1.0, abs=1e-12)


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        estimate_rate([AlphaSample(100, "bcv", r, 0.1, False) for r in range(5)])
    with pytest.raises(InsufficientData):
        estimate_rate([AlphaSample(n, "bcv", 0, math.inf, True) for n in (10, 100)])
    table = rate_table([AlphaSample(100, "bcv", 0, 0.1, False)])
    assert table[0]["regime"] == "unclassified" and math.isnan(table[0]["gamma_hat"])


# --- real-data subsampling ------------------------------------------------------------

def write_wage_csv(path, n=400, seed=0):
    rng = np.random.default_rng(seed)
    edu = rng.integers(8, 18, n)
    exper = rng.integers(0, 40, n)
    eth = np.where(rng.random(n) < 0.2, "afam", "cauc")
    logw = 1.0 + 0.08 * edu + 0.04 * exper - 0.0007 * exper ** 2 - 0.2 * (eth == "afam") \
        + 0.4 * rng.standard_normal(n)
    with open(path, "w") as fh:
        fh.write("wage,education,experience,ethnicity,region\n")
        for i in range(n):
            fh.write(f"{math.exp(logw[i]):.4f},{edu[i]},{exper[i]},{eth[i]},south\n")


def test_load_wage_data(tmp_path):
    p = tmp_path / "wages.csv"
    write_wage_csv(p, n=50)
    raw = load_wage_data(p)
    assert raw.X.shape == (50, 3)
    assert set(np.unique(raw.X[:, 1])) <= {0.0, 1.0}
    with pytest.raises(ParseError):
        load_wage_data(p, WageColumns(reference_level="other"))
    with pytest.raises(ParseError):
        load_wage_data(p, WageColumns(wage="salary"))


def test_subsample_study(tmp_path):
    p = tmp_path / "wages.csv"
    write_wage_csv(p)
    raw = load_wage_data(p)
    samples, table = subsample_study(raw, sizes=(50, 100, 200), reps=3, seed=2,
                                     methods=("safebayes", "train-test"))
    assert len(samples) == 3 * 3 * 3 * 2
    assert {s.spec for s in samples} == {"full", "no-ethnicity", "no-experience2"}
    assert len(table) == 2 * 3
    one, _ = subsample_study(raw, sizes=(100,), reps=1, seed=2, methods=("bcv",))
    assert len(one) == 3
    again, _ = subsample_study(raw, sizes=(50, 100, 200), reps=3, seed=2,
                               methods=("safebayes", "train-test"))
    assert samples == again
    with pytest.raises(SizeTooLarge):
        subsample_study(raw, sizes=(401,), reps=1)


# --- CSV round trip --------------------------------------------------------------------

def test_alpha_sample_csv_roundtrip(tmp_path):
    samples = [AlphaSample(100, "bcv", 0, 0.0123456789012345, False, "misspecified"),
               AlphaSample(100, "train-test", 0, math.inf, True, "misspecified"),
               AlphaSample(1000, "loocv", 3, math.nan, False, "well-specified", "failed: X")]
    p = tmp_path / "a.csv"
    write_alpha_samples(p, samples)
    text = p.read_bytes()
    assert b"\r\n" in text and b",inf," in text
    back = read_alpha_samples(p)
    assert back[:2] == samples[:2]
    assert math.isnan(back[2].alpha_hat) and back[2].status == "failed: X"
    write_rates(tmp_path / "r.csv", rate_table(exact_samples()))
    assert (tmp_path / "r.csv").read_text().startswith("method,spec,gamma_hat")
