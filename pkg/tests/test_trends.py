import math

import numpy as np
import pytest

from biascorpus.bias import BiasObservation
from biascorpus.trends import (TrendFit, fit_lmm, fit_ols, group_interaction,
                               reml_profile, write_fit_json)


def obs(bucket, word, y):
    return BiasObservation(bucket_start=bucket, trait_word=word, bias=y,
                           cos_male=0.0, cos_female=0.0)


def simulate(rng, G=200, T=10, beta0=0.05, beta1=-0.002, sw=0.01, se=0.02):
    b = rng.normal(0, sw, G) if sw > 0 else np.zeros(G)
    rows = []
    for i in range(G):
        eps = rng.normal(0, se, T)
        for t in range(T):
            rows.append(obs(1965 + 5 * t, f"w{i}",
                            beta0 + beta1 * t + b[i] + eps[t]))
    return rows


# ---------------------------------------------------------------------------
# OLS
# ---------------------------------------------------------------------------


def test_fit_ols_exact_line():
    t = np.arange(6, dtype=float)
    fit = fit_ols(list(zip(t, 2 + 3 * t)))
    assert fit.beta0 == pytest.approx(2.0, abs=1e-12)
    assert fit.beta_linear == pytest.approx(3.0, abs=1e-12)
    assert fit.sigma2_resid == pytest.approx(0.0, abs=1e-20)


def test_fit_ols_quadratic_recovers_square():
    t = np.arange(7, dtype=float)
    fit = fit_ols(list(zip(t, t ** 2)), quadratic=True)
    assert fit.beta_quadratic == pytest.approx(1.0, abs=1e-10)
    assert fit.raw_time["time2"].estimate == pytest.approx(1.0, abs=1e-10)
    assert fit.raw_time["time"].estimate == pytest.approx(0.0, abs=1e-9)
    assert fit.raw_time["intercept"].estimate == pytest.approx(0.0, abs=1e-9)


def test_fit_ols_matches_closed_form_normal_equations():
    # independent oracle: simple-regression formulas via sums
    rng = np.random.default_rng(17)
    t = np.arange(10, dtype=float)
    y = 0.1 - 0.01 * t + rng.normal(0, 0.05, 10)
    sxx = ((t - t.mean()) ** 2).sum()
    sxy = ((t - t.mean()) * (y - y.mean())).sum()
    b1 = sxy / sxx
    b0 = y.mean() - b1 * t.mean()
    resid = y - b0 - b1 * t
    s2 = (resid ** 2).sum() / (len(t) - 2)
    se1 = math.sqrt(s2 / sxx)
    se0 = math.sqrt(s2 * (1 / len(t) + t.mean() ** 2 / sxx))

    fit = fit_ols(list(zip(t, y)))
    assert fit.beta0 == pytest.approx(b0, abs=1e-10)
    assert fit.beta_linear == pytest.approx(b1, abs=1e-10)
    assert fit.coefficients["intercept"].se == pytest.approx(se0, abs=1e-10)
    assert fit.coefficients["time"].se == pytest.approx(se1, abs=1e-10)
    assert fit.sigma2_resid == pytest.approx(s2, abs=1e-12)


def test_fit_ols_quadratic_matches_polyfit():
    rng = np.random.default_rng(23)
    t = np.arange(12, dtype=float)
    y = 1 + 0.5 * t - 0.03 * t ** 2 + rng.normal(0, 0.1, 12)
    coeffs = np.polyfit(t, y, 2)  # highest power first
    fit = fit_ols(list(zip(t, y)), quadratic=True)
    assert fit.raw_time["time2"].estimate == pytest.approx(coeffs[0],
                                                           abs=1e-10)
    assert fit.raw_time["time"].estimate == pytest.approx(coeffs[1],
                                                          abs=1e-10)
    assert fit.raw_time["intercept"].estimate == pytest.approx(coeffs[2],
                                                               abs=1e-10)


def test_fit_ols_residual_mean_zero():
    rng = np.random.default_rng(3)
    t = np.arange(20, dtype=float)
    y = rng.normal(0, 1, 20)
    fit = fit_ols(list(zip(t, y)))
    resid = y - (fit.beta0 + fit.beta_linear * t)
    assert abs(resid.mean()) < 1e-10


def test_fit_ols_needs_enough_points():
    with pytest.raises(ValueError):
        fit_ols([(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        fit_ols([(0, 1), (1, 2), (2, 3)], quadratic=True)


def test_fit_ols_rank_deficient_raises():
    with pytest.raises(ValueError):
        fit_ols([(2.0, 1.0), (2.0, 2.0), (2.0, 3.0)])


# ---------------------------------------------------------------------------
# LMM
# ---------------------------------------------------------------------------


def test_fit_lmm_monte_carlo_recovers_slope_and_variance():
    root = np.random.default_rng(7)
    slope_ok = 0
    var_ok = 0
    for s in root.spawn(100):
        fit = fit_lmm(simulate(np.random.default_rng(s)),
                      time_coding="bucket_index")
        c = fit.coefficients["time"]
        slope_ok += abs(c.estimate + 0.002) <= 2 * c.se
        var_ok += abs(fit.sigma2_word - 1e-4) <= 0.3 * 1e-4
    assert slope_ok >= 93
    assert var_ok >= 90


def test_fit_lmm_zero_word_variance_matches_ols():
    rng = np.random.default_rng(11)
    rows = simulate(rng, G=50, T=8, sw=0.0)
    fit = fit_lmm(rows, time_coding="bucket_index")
    pts = [((r.bucket_start - 1965) / 5, r.bias) for r in rows]
    ols = fit_ols(pts)
    assert fit.beta0 == pytest.approx(ols.beta0, abs=1e-8)
    assert fit.beta_linear == pytest.approx(ols.beta_linear, abs=1e-8)


def test_fit_lmm_fix_lambda_zero_equals_ols_exactly():
    rng = np.random.default_rng(13)
    rows = simulate(rng, G=30, T=6)
    fit = fit_lmm(rows, time_coding="bucket_index", fix_lambda=0.0)
    pts = [((r.bucket_start - 1965) / 5, r.bias) for r in rows]
    ols = fit_ols(pts)
    assert fit.beta0 == pytest.approx(ols.beta0, abs=1e-14)
    assert fit.beta_linear == pytest.approx(ols.beta_linear, abs=1e-14)
    assert fit.boundary


def test_fit_lmm_constant_outcome():
    rows = [obs(1965 + 5 * t, f"w{i}", 0.25) for i in range(4)
            for t in range(4)]
    fit = fit_lmm(rows)
    assert fit.beta_linear == pytest.approx(0.0, abs=1e-12)
    assert fit.sigma2_word == 0.0
    assert fit.sigma2_resid == pytest.approx(0.0, abs=1e-15)


def test_fit_lmm_errors():
    with pytest.raises(ValueError):  # constant time
        fit_lmm([obs(1965, "a", 0.1), obs(1965, "b", 0.2),
                 obs(1965, "a", 0.3)])
    with pytest.raises(ValueError):  # single word
        fit_lmm([obs(1965, "a", 0.1), obs(1970, "a", 0.2),
                 obs(1975, "a", 0.3)])


def test_reml_lambda_is_local_maximum():
    rng = np.random.default_rng(19)
    rows = simulate(rng, G=80, T=8)
    fit = fit_lmm(rows, time_coding="bucket_index")
    assert fit.lambda_ratio is not None and not fit.boundary
    at_hat = reml_profile(rows, fit.lambda_ratio, time_coding="bucket_index")
    for factor in (0.9, 1.1):
        nearby = reml_profile(rows, fit.lambda_ratio * factor,
                              time_coding="bucket_index")
        assert nearby <= at_hat + 1e-8


def test_fit_lmm_matches_statsmodels_reml():
    sm = pytest.importorskip("statsmodels.formula.api")
    import pandas as pd
    rng = np.random.default_rng(42)
    rows = simulate(rng)
    fit = fit_lmm(rows, time_coding="bucket_index")
    df = pd.DataFrame({"y": [r.bias for r in rows],
                       "t": [(r.bucket_start - 1965) / 5 for r in rows],
                       "w": [r.trait_word for r in rows]})
    ref = sm.mixedlm("y ~ t", df, groups=df["w"]).fit(reml=True)
    assert fit.beta0 == pytest.approx(ref.params["Intercept"], abs=1e-10)
    assert fit.beta_linear == pytest.approx(ref.params["t"], abs=1e-10)
    assert fit.coefficients["time"].se == pytest.approx(ref.bse["t"],
                                                        abs=1e-7)
    assert fit.sigma2_word == pytest.approx(float(ref.cov_re.iloc[0, 0]),
                                            abs=1e-7)
    assert fit.sigma2_resid == pytest.approx(ref.scale, abs=1e-7)


def test_time_coding_equivariance():
    rng = np.random.default_rng(29)
    rows = simulate(rng, G=40, T=7)
    by_year = fit_lmm(rows, time_coding="year_offset")
    by_bucket = fit_lmm(rows, time_coding="bucket_index")
    width = 5.0
    assert by_bucket.beta_linear == pytest.approx(width * by_year.beta_linear,
                                                  rel=1e-8)
    assert by_bucket.coefficients["time"].stat == pytest.approx(
        by_year.coefficients["time"].stat, rel=1e-8)


def test_fit_lmm_quadratic_raw_time_consistent():
    rng = np.random.default_rng(31)
    rows = []
    for i in range(30):
        b = rng.normal(0, 0.01)
        for t in range(8):
            y = 0.05 - 0.004 * t + 0.0003 * t ** 2 + b + rng.normal(0, 0.01)
            rows.append(obs(1965 + 5 * t, f"w{i}", y))
    fit = fit_lmm(rows, quadratic=True, time_coding="bucket_index")
    # centered and raw parameterizations describe the same curve
    t = np.arange(8, dtype=float)
    tc = t - fit.time_mean
    curve_centered = (fit.beta0 + fit.beta_linear * tc
                      + fit.beta_quadratic * tc ** 2)
    r = {k: v.estimate for k, v in fit.raw_time.items()}
    curve_raw = r["intercept"] + r["time"] * t + r["time2"] * t ** 2
    np.testing.assert_allclose(curve_centered, curve_raw, atol=1e-12)


# ---------------------------------------------------------------------------
# group interaction
# ---------------------------------------------------------------------------


def test_group_interaction_identical_groups_zero():
    rng = np.random.default_rng(37)
    rows = simulate(rng, G=25, T=6)
    fit = group_interaction({0: rows, 1: rows}, time_coding="bucket_index")
    assert fit.coefficients["group_x_time"].estimate == pytest.approx(
        0.0, abs=1e-12)
    assert fit.coefficients["group"].estimate == pytest.approx(0.0,
                                                               abs=1e-12)


def test_group_interaction_recovers_slope_difference():
    root = np.random.default_rng(41)
    hits = 0
    for s in root.spawn(20):
        rng = np.random.default_rng(s)
        g0 = simulate(rng, G=100, T=10, beta1=-0.002)
        g1 = simulate(rng, G=100, T=10, beta1=0.000)
        fit = group_interaction({0: g0, 1: g1}, time_coding="bucket_index")
        c = fit.coefficients["group_x_time"]
        hits += abs(c.estimate - 0.002) <= 2 * c.se
    assert hits >= 18


def test_group_interaction_recoding_flips_sign():
    rng = np.random.default_rng(43)
    g0 = simulate(rng, G=20, T=5, beta1=-0.002)
    g1 = simulate(rng, G=20, T=5, beta1=0.001)
    a = group_interaction({0: g0, 1: g1}, time_coding="bucket_index")
    b = group_interaction({0: g1, 1: g0}, time_coding="bucket_index")
    assert a.coefficients["group_x_time"].estimate == pytest.approx(
        -b.coefficients["group_x_time"].estimate, rel=1e-9)


def test_group_interaction_single_group_raises():
    rows = [obs(1965, "a", 0.1), obs(1970, "a", 0.2), obs(1970, "b", 0.3),
            obs(1965, "b", 0.2)]
    with pytest.raises(ValueError):
        group_interaction({0: rows})
    with pytest.raises(ValueError):
        group_interaction({0: rows, 1: [obs(1965, "a", 0.1)]})


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def test_write_fit_json(tmp_path):
    fit = fit_ols([(0, 1.0), (1, 2.1), (2, 2.9), (3, 4.2)])
    path = tmp_path / "fit.json"
    write_fit_json(fit, path, header={"series": "demo"})
    import json
    payload = json.loads(path.read_text())
    assert payload["series"] == "demo"
    assert payload["method"] == "ols"
    assert "time" in payload["coefficients"]
    assert isinstance(fit, TrendFit)
