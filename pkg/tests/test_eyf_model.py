#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
import json
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from lib._common import InputParseException
from lib.eyf_model import (
    EYFParams, ModelException, ccdf, ccdf_exact, cdf, load_params, log_ccdf,
    normalize, pdf, quantile, sample, sample_top_k, save_params)


def _integral_oracle(model):
  """ Trapezoid in ln m on a dense grid, plus both ends """
  p = model.params
  low = min(p.m0, p.T) * 1e-6
  high = p.m1 * 1e10
  u = np.linspace(math.log(low), math.log(high), 400001)
  m = np.exp(u)
  body = trapezoid(pdf(model, m) * m, u)
  below = model.c_low * low
  tail = model.c_high * math.exp(-(p.m0 / p.T1) * math.pi / 2) \
      * p.m0 ** (p.alpha1 + 1) * high ** -p.alpha1 / p.alpha1
  return below + body + tail


# --- parameters ---

def test_params_reject_non_normalizable_tail():
  with pytest.raises(ModelException, match="non-normalizable"):
    EYFParams(m0=1e5, m1=3e5, T=4e4, T1=3e5, alpha=2.0, alpha1=0.0)


@pytest.mark.parametrize("changes", [
    {"m0": -1.0}, {"T": 0.0}, {"T1": -5.0}, {"alpha": 0.0},
    {"m1": 1e5}, {"m1": 5e4}, {"m0": float("nan")}, {"alpha": "2"}])
def test_params_reject_invalid_values(changes):
  values = dict(m0=1e5, m1=3e5, T=4e4, T1=3e5, alpha=2.0, alpha1=1.5)
  values.update(changes)
  with pytest.raises(ModelException):
    EYFParams(**values)


def test_params_dict_and_scaling(eu2007):
  assert EYFParams.from_dict(eu2007.to_dict()) == eu2007
  scaled = eu2007.scaled(10.0)
  assert scaled.m0 == pytest.approx(10 * eu2007.m0)
  assert scaled.T1 == pytest.approx(10 * eu2007.T1)
  assert scaled.alpha == eu2007.alpha
  with pytest.raises(ModelException, match="missing"):
    EYFParams.from_dict({"m0": 1.0})


# --- normalization ---

def test_all_published_sets_are_normalized_and_continuous(all_table_params):
  assert len(all_table_params) == 12
  for key, params in all_table_params.items():
    model = normalize(params)
    assert abs(_integral_oracle(model) - 1.0) < 1e-6, key
    below = pdf(model, params.m1 * (1 - 1e-12))
    at = pdf(model, params.m1)
    assert abs(below - at) / at < 1e-9, key


def test_published_sets_are_in_us_dollars(all_table_params):
  assert {p.currency for p in all_table_params.values()} == {"USD"}


def test_t1_tied_to_m1(eu2007):
  loose = EYFParams(m0=eu2007.m0, m1=eu2007.m1, T=eu2007.T, T1=2 * eu2007.m1,
                    alpha=eu2007.alpha, alpha1=eu2007.alpha1)
  tied = loose.with_T1_tied()
  assert tied.T1 == tied.m1 == eu2007.m1
  assert tied.alpha1 == eu2007.alpha1


def test_gauss_and_quad_normalizations_agree(eu2007, us2009):
  for params in (eu2007, us2009):
    quad_model = normalize(params)
    gauss_model = normalize(params, method="gauss")
    assert gauss_model.c_low == pytest.approx(quad_model.c_low, rel=1e-8)
    m = np.geomspace(params.T / 10, params.m1 * 100, 50)
    np.testing.assert_allclose(ccdf(gauss_model, m), ccdf(quad_model, m),
                               rtol=1e-8)


def test_unknown_method_and_bad_tolerance(eu2007):
  with pytest.raises(ModelException):
    normalize(eu2007, method="simpson")
  with pytest.raises(ModelException):
    normalize(eu2007, quad_tol=0.0)


def test_small_separation_is_flagged(eu_series):
  assert normalize(eu_series.params_of(2009)).small_separation is False
  close = EYFParams(m0=1e5, m1=1.2e5, T=4e4, T1=1.2e5, alpha=2.0, alpha1=1.8)
  assert normalize(close).small_separation is True


# --- evaluation ---

def test_ccdf_limits_and_monotonicity(eu2007_model):
  assert ccdf(eu2007_model, 0.0) == 1.0
  assert ccdf(eu2007_model, math.inf) == 0.0
  m = np.geomspace(1e-3, 1e15, 2000)
  values = ccdf(eu2007_model, m)
  assert np.all(np.diff(values) <= 0)
  assert np.all(values > 0)
  np.testing.assert_allclose(cdf(eu2007_model, m) + values, 1.0, atol=1e-14)


def test_ccdf_matches_direct_quadrature(eu2007_model, us2009_model):
  for model in (eu2007_model, us2009_model):
    p = model.params
    # midpoints between grid nodes are the worst case for interpolation
    nodes = model.ccdf_grid[:, 0]
    midpoints = np.sqrt(nodes[:-1] * nodes[1:])
    picks = midpoints[np.searchsorted(
        midpoints, [p.T / 3, p.T, p.m0, 0.5 * (p.m0 + p.m1), p.m1 * 3,
                    p.m1 * 1e3])]
    for m in picks:
      assert ccdf(model, m) == pytest.approx(ccdf_exact(model, m), rel=1e-4)
    # beyond the grid both paths are analytic
    far = p.m1 * 1e8
    assert ccdf(model, far) == pytest.approx(ccdf_exact(model, far), rel=1e-6)


def test_log_ccdf_is_finite_deep_in_the_tail(eu2007_model):
  value = log_ccdf(eu2007_model, 1e300)
  assert math.isfinite(value)
  assert value < -300


def test_tail_slope_is_minus_alpha1(eu2007_model, us2009_model):
  for model in (eu2007_model, us2009_model):
    p = model.params
    m = np.geomspace(1e2 * p.m1, 1e4 * p.m1, 200)
    slope = np.polyfit(np.log(m), log_ccdf(model, m), 1)[0]
    assert -slope == pytest.approx(p.alpha1, rel=0.02)


def test_low_incomes_follow_boltzmann_gibbs(all_table_params):
  for key, params in all_table_params.items():
    model = normalize(params)
    m = np.linspace(0.0, min(params.T, params.m0) / 5, 50)
    ratio = pdf(model, m) / pdf(model, 0.0)
    np.testing.assert_allclose(ratio, np.exp(-m / params.T), rtol=0.02,
                               err_msg=str(key))


def test_medium_incomes_follow_the_alpha_power_law():
  params = EYFParams(m0=1e4, m1=1e8, T=1e5, T1=1e8, alpha=2.0, alpha1=2.0)
  model = normalize(params)
  m = np.geomspace(1e6, 1e7, 50)
  slope = np.polyfit(np.log(m), log_ccdf(model, m), 1)[0]
  assert -slope == pytest.approx(2.0, rel=0.02)


def test_scaling_incomes_maps_the_distribution(eu2007, eu2007_model):
  scaled_model = normalize(eu2007.scaled(10.0))
  m = np.geomspace(1.0, 1e10, 40)
  np.testing.assert_allclose(
      ccdf(scaled_model, 10.0 * m), ccdf(eu2007_model, m), rtol=1e-7)


def test_negative_income_is_rejected(eu2007_model):
  with pytest.raises(ModelException):
    pdf(eu2007_model, -1.0)
  with pytest.raises(ModelException):
    ccdf(eu2007_model, np.array([1.0, -2.0]))


# --- quantile and sampling ---

def test_quantile_inverts_ccdf_over_the_whole_range(eu2007_model):
  p = np.concatenate((1.0 - np.geomspace(1e-12, 1e-3, 10),
                      np.geomspace(1e-20, 0.5, 60)))
  m = quantile(eu2007_model, p)
  np.testing.assert_allclose(ccdf(eu2007_model, m), p, rtol=1e-8)
  assert quantile(eu2007_model, 1.0) == 0.0


@pytest.mark.parametrize("p", [0.0, -0.1, 1.5, float("nan")])
def test_quantile_rejects_probabilities_outside_domain(eu2007_model, p):
  with pytest.raises(ModelException):
    quantile(eu2007_model, p)


def test_sample_is_reproducible_and_follows_the_model(eu2007_model):
  draws = sample(eu2007_model, 100000, seed=7)
  again = sample(eu2007_model, 100000, seed=7)
  assert np.array_equal(draws.values, again.values)
  assert draws.source == "synthetic"

  x = np.sort(draws.values)
  n = len(x)
  model_cdf = cdf(eu2007_model, x)
  ks = max(np.max(np.arange(1, n + 1) / n - model_cdf),
           np.max(model_cdf - np.arange(n) / n))
  assert ks < 0.01


def test_sample_needs_a_positive_size(eu2007_model):
  with pytest.raises(ModelException):
    sample(eu2007_model, 0, seed=1)


def test_top_k_is_sorted_and_rank_consistent(us2009_model):
  top = sample_top_k(us2009_model, 10**6, 100, seed=3)
  assert len(top) == 100
  assert np.all(np.diff(top.values) < 0)
  assert top.source == "rich-list"

  population = 1000
  top1 = [float(ccdf(us2009_model, sample_top_k(us2009_model, population, 1,
                                                seed=s).values[0]))
          for s in range(2000)]
  assert np.mean(top1) == pytest.approx(1.0 / (population + 1), rel=0.1)


def test_top_k_larger_than_population_is_rejected(us2009_model):
  with pytest.raises(ModelException):
    sample_top_k(us2009_model, 10, 11, seed=0)


# --- params files ---

def test_params_file_round_trip(tmp_path, eu2007):
  path = str(tmp_path / "params.json")
  save_params(eu2007, path)
  assert load_params(path) == eu2007
  # the "params" member of a fit report is accepted too
  report = tmp_path / "fit.json"
  report.write_text(json.dumps({"params": eu2007.to_dict(), "rss": 0.1}))
  assert load_params(str(report)) == eu2007


def test_params_file_errors(tmp_path):
  with pytest.raises(InputParseException):
    load_params(str(tmp_path / "missing.json"))
  bad = tmp_path / "bad.json"
  bad.write_text("{not json")
  with pytest.raises(InputParseException):
    load_params(str(bad))
  invalid = tmp_path / "invalid.json"
  invalid.write_text(json.dumps(
      {"m0": 1, "m1": 2, "T": 1, "T1": 2, "alpha": 1, "alpha1": -1}))
  with pytest.raises(InputParseException, match="non-normalizable"):
    load_params(str(invalid))
