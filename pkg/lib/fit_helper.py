#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from beartype import beartype
from scipy.optimize import least_squares

from lib._typing import Dict, Optional, Real, Tuple
from lib.empirical_helper import (
    EmpiricalCCDF, EmpiricalException, IncomeSample,
    augment_tail, drop_top_ranks, log_downsample, rank_ccdf)
from lib.eyf_model import (
    PARAM_NAMES, EYFParams, ModelException, log_ccdf, normalize)

lg = logging.getLogger('eyf.fit')

EXPONENT_BOUNDS = (0.05, 10.0)
INCOME_BOUND_FACTOR = 1000.0
MIN_DECADES = 2.0
MIN_RATIO = 1.01           # smallest m1/m0 explored by the optimizer
BOX_MARGIN = 1e-6          # relative margin of the starts inside the m1 box
MIN_TOP_POINTS = 50        # alpha1 regression uses at least this many points
CURVE_STEPS_PER_DECADE = 20
FAILED_RESIDUAL = 1e3
LOG_TINY = math.log(np.finfo(float).tiny)


class FitException(Exception):
  pass


class DegenerateDataException(FitException):
  """ The data does not show the slope regimes needed to locate m0 and m1 """
  pass


@dataclass(frozen=True)
class FitConfig:
  constrain_T1_eq_m1: bool = True
  points_per_decade: int = 20
  bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)
  max_iterations: int = 3000
  loss_tol: float = 1e-10
  seed: int = 0
  n_starts: int = 5
  jitter: float = 0.2
  min_rank: int = 10

  def __post_init__(self):
    if self.points_per_decade < 1:
      raise FitException("points_per_decade must be >= 1")
    if self.max_iterations < 1:
      raise FitException("max_iterations must be >= 1")
    if not self.loss_tol > 0:
      raise FitException("loss_tol must be > 0")
    if self.n_starts < 1:
      raise FitException("n_starts must be >= 1")
    if not self.jitter >= 0:
      raise FitException("jitter must be >= 0")
    if self.min_rank < 1:
      raise FitException("min_rank must be >= 1")
    bounds = {}
    for name, bound in self.bounds.items():
      if name not in PARAM_NAMES:
        raise FitException(f"unknown parameter '{name}' in bounds")
      low, high = (float(bound[0]), float(bound[1]))
      if not 0 < low < high:
        raise FitException(
            f"inconsistent bounds for {name}: ({low}, {high})")
      bounds[name] = (low, high)
    object.__setattr__(self, "bounds", bounds)

  def to_dict(self):
    return {
        "constrain_T1_eq_m1": self.constrain_T1_eq_m1,
        "points_per_decade": self.points_per_decade,
        "bounds": {k: list(v) for k, v in sorted(self.bounds.items())},
        "max_iterations": self.max_iterations,
        "loss_tol": self.loss_tol,
        "seed": self.seed,
        "n_starts": self.n_starts,
        "jitter": self.jitter,
        "min_rank": self.min_rank,
    }


@dataclass(frozen=True, eq=False)
class FitResult:
  """
    income/residuals are the fitted points and their signed residuals
    ln ccdf_model(m) - ln p. errors holds bootstrap standard errors, if any.
  """
  params: EYFParams
  rss: float
  income: np.ndarray
  residuals: np.ndarray
  errors: Optional[Dict[str, float]] = None
  converged: bool = False
  iterations: int = 0
  small_separation: bool = False

  @property
  def n_points(self) -> int:
    return len(self.residuals)

  def with_errors(self, errors: Dict[str, float]) -> "FitResult":
    return replace(self, errors=dict(errors))

  def to_dict(self):
    return {
        "params": self.params.to_dict(),
        "rss": self.rss,
        "converged": self.converged,
        "iterations": self.iterations,
        "errors": None if self.errors is None else {
            name: self.errors[name] for name in PARAM_NAMES
            if name in self.errors},
        "n_points": self.n_points,
        "small_separation": self.small_separation,
    }


@dataclass(frozen=True)
class GoodnessSummary:
  rss: float
  max_abs_residual: float
  per_decade_mean: Dict[int, float]

  def to_dict(self):
    return {
        "rss": self.rss,
        "max_abs_residual": self.max_abs_residual,
        "per_decade_mean": {
            str(k): v for k, v in sorted(self.per_decade_mean.items())},
    }


# --- initial guess ---

def _log_points(ccdf: EmpiricalCCDF):
  positive = ccdf.income > 0
  return np.log(ccdf.income[positive]), np.log(ccdf.prob[positive])


def _line_sse(x, y):
  coef = np.polyfit(x, y, 1)
  return float(np.sum((np.polyval(coef, x) - y) ** 2)), float(coef[0])


def _two_segment_split(x, y):
  """ Index splitting (x, y) into two straight segments with minimal SSE """
  best = None
  for i in range(3, len(x) - 2):
    sse_left, slope_left = _line_sse(x[:i + 1], y[:i + 1])
    sse_right, slope_right = _line_sse(x[i:], y[i:])
    total = sse_left + sse_right
    if best is None or total < best[0]:
      best = (total, i, slope_left, slope_right)
  return best


@beartype
def init_guess(ccdf: EmpiricalCCDF) -> EYFParams:
  """
    Heuristic starting point, read on the log-log ccdf:
      T       income where ccdf = 1/e
      alpha1  slope of the top decade (at least MIN_TOP_POINTS points)
      m1      best two-segment split above the steepest part of the curve
      alpha   slope of the segment below that split
      m0      maximal curvature below the steepest part
      T1 = m1
    Raises DegenerateDataException when two slope regimes cannot be found.
  """
  if ccdf.decades < MIN_DECADES:
    raise DegenerateDataException(
        f"ccdf spans less than {MIN_DECADES} decades of income")
  x, y = _log_points(ccdf)

  # log-uniform resampling so that dense income ranges do not dominate
  n_steps = int(math.ceil((x[-1] - x[0]) / math.log(10)
                          * CURVE_STEPS_PER_DECADE)) + 1
  xg = np.linspace(x[0], x[-1], n_steps)
  yg = np.interp(xg, x, y)
  slope = np.convolve(np.gradient(yg, xg), np.ones(5) / 5, mode="same")

  if y[0] > -1.0 > y[-1]:
    T = math.exp(float(np.interp(1.0, -y, x)))
  else:
    T = math.exp(float(x[0]))

  top = x >= x[-1] - math.log(10)
  if np.count_nonzero(top) < MIN_TOP_POINTS:
    top = np.arange(len(x)) >= len(x) - MIN_TOP_POINTS
  alpha1 = -float(np.polyfit(x[top], y[top], 1)[0])

  # steepest point, ignoring the sparse last decade of probability
  usable = np.flatnonzero(yg > yg[-1] + math.log(10))
  usable = usable[2:-2] if len(usable) > 6 else usable
  if len(usable) == 0:
    raise DegenerateDataException("not enough probability range")
  i_steep = int(usable[np.argmin(slope[usable])])

  upper_x, upper_y = xg[i_steep:], yg[i_steep:]
  if len(upper_x) < 8 or upper_x[-1] - upper_x[0] < 0.5 * math.log(10):
    raise DegenerateDataException(
        "no power-law regime above the exponential part")
  _, i_split, slope_mid, _ = _two_segment_split(upper_x, upper_y)
  m1 = math.exp(float(upper_x[i_split]))
  alpha = -slope_mid

  curvature = np.gradient(slope, xg)
  lower = slice(3, max(i_steep, 4))
  i_m0 = 3 + int(np.argmax(np.abs(curvature[lower])))
  m0 = min(math.exp(float(xg[i_m0])), m1 / 1.5)

  if not (alpha > 0 and alpha1 > 0):
    raise DegenerateDataException(
        f"non-positive exponent guess (alpha={alpha:.3g}, alpha1={alpha1:.3g})")

  low, high = EXPONENT_BOUNDS
  guess = EYFParams(
      m0=m0, m1=m1, T=T, T1=m1,
      alpha=min(max(alpha, low), high),
      alpha1=min(max(alpha1, low), high))
  lg.debug(f"[init_guess]{guess.to_dict()}")
  return guess


# --- fit ---

class _Parametrization:
  """
    Free vector used by the optimizer:
      ln(m0/m0g), ln(m1/m0), ln(T/Tg), [ln(T1/T1g)], ln(alpha), ln(alpha1)
    Incomes relative to the guess keep the problem scale free; the m1/m0 ratio
    keeps m1 > m0 inside a box.
    The ratio box only bounds m1 loosely: m1_box (the T1 box too when
    T1 = m1) is checked on every evaluation, see contains().
  """

  def __init__(self, guess: EYFParams, config: FitConfig,
               data_range: Tuple[float, float]):
    self.guess = guess
    self.constrained = config.constrain_T1_eq_m1
    income_low = data_range[0] / INCOME_BOUND_FACTOR
    income_high = data_range[1] * INCOME_BOUND_FACTOR
    b = {name: (income_low, income_high) for name in ("m0", "m1", "T", "T1")}
    b["alpha"] = EXPONENT_BOUNDS
    b["alpha1"] = EXPONENT_BOUNDS
    b.update(config.bounds)
    self.bounds = b

    m1_low, m1_high = b["m1"]
    if self.constrained:
      m1_low, m1_high = max(m1_low, b["T1"][0]), min(m1_high, b["T1"][1])
    if not m1_low < m1_high or m1_high <= b["m0"][0] * MIN_RATIO:
      raise FitException(f"empty search box for m1 with bounds {b}")
    self.m1_box = (m1_low, m1_high)

    lows = [math.log(b["m0"][0] / guess.m0),
            math.log(max(MIN_RATIO, m1_low / b["m0"][1])),
            math.log(b["T"][0] / guess.T)]
    highs = [math.log(b["m0"][1] / guess.m0),
             math.log(m1_high / b["m0"][0]),
             math.log(b["T"][1] / guess.T)]
    if not self.constrained:
      lows.append(math.log(b["T1"][0] / guess.T1))
      highs.append(math.log(b["T1"][1] / guess.T1))
    lows += [math.log(b["alpha"][0]), math.log(b["alpha1"][0])]
    highs += [math.log(b["alpha"][1]), math.log(b["alpha1"][1])]
    self.low = np.array(lows)
    self.high = np.array(highs)
    if np.any(self.low >= self.high):
      raise FitException(f"empty search box for bounds {b}")

  def encode(self, params: EYFParams) -> np.ndarray:
    g = self.guess
    z = [math.log(params.m0 / g.m0), math.log(params.m1 / params.m0),
         math.log(params.T / g.T)]
    if not self.constrained:
      z.append(math.log(params.T1 / g.T1))
    z += [math.log(params.alpha), math.log(params.alpha1)]
    # least_squares wants a strictly feasible start
    margin = 1e-9 * (self.high - self.low)
    return np.clip(np.array(z), self.low + margin, self.high - margin)

  def decode(self, z: np.ndarray) -> EYFParams:
    g = self.guess
    m0 = g.m0 * math.exp(z[0])
    m1 = m0 * math.exp(z[1])
    T = g.T * math.exp(z[2])
    if self.constrained:
      T1 = m1
      alpha, alpha1 = math.exp(z[3]), math.exp(z[4])
    else:
      T1 = g.T1 * math.exp(z[3])
      alpha, alpha1 = math.exp(z[4]), math.exp(z[5])
    return EYFParams(m0=m0, m1=m1, T=T, T1=T1, alpha=alpha, alpha1=alpha1,
                     currency=g.currency)

  def contains(self, params: EYFParams) -> bool:
    return self.m1_box[0] <= params.m1 <= self.m1_box[1]

  def feasible(self, params: EYFParams) -> EYFParams:
    """ Start point moved inside the box: m1 first, then m0 below it """
    m0_low, m0_high = self.bounds["m0"]
    m1_low = max(self.m1_box[0], m0_low * MIN_RATIO * 1.02)
    m1 = min(max(params.m1, m1_low * (1 + BOX_MARGIN)),
             self.m1_box[1] * (1 - BOX_MARGIN))
    m0 = min(max(params.m0, m0_low * (1 + BOX_MARGIN)),
             m0_high * (1 - BOX_MARGIN), m1 / (MIN_RATIO * 1.01))
    result = replace(params, m0=m0, m1=m1)
    return result.with_T1_tied() if self.constrained else result


def _model_residuals(params: EYFParams, income: np.ndarray,
                     log_prob: np.ndarray) -> np.ndarray:
  model = normalize(params, method="gauss")
  predicted = np.maximum(np.asarray(log_ccdf(model, income)), LOG_TINY)
  return predicted - log_prob


def _jittered_starts(guess: EYFParams, config: FitConfig):
  rng = np.random.default_rng(config.seed)
  spread = math.log1p(config.jitter)
  starts = [guess]
  for _ in range(config.n_starts - 1):
    factors = np.exp(rng.uniform(-spread, spread, len(PARAM_NAMES)))
    values = {name: getattr(guess, name) * f
              for name, f in zip(PARAM_NAMES, factors)}
    if values["m1"] <= values["m0"] * MIN_RATIO:
      values["m1"] = values["m0"] * MIN_RATIO * 1.01
    start = EYFParams(**values, currency=guess.currency)
    starts.append(start.with_T1_tied() if config.constrain_T1_eq_m1 else start)
  return starts


@beartype
def fit(ccdf: EmpiricalCCDF, config: FitConfig = FitConfig()) -> FitResult:
  """
    Least squares on ln ccdf over log-downsampled points, best of
    config.n_starts runs started around init_guess. Points of rank below
    config.min_rank (the top of the sample) are left out of the guess and
    of the loss. Every evaluation with m1 outside its box fails.
  """
  kept = drop_top_ranks(ccdf, config.min_rank)
  lg.debug(f"[fit]{len(ccdf) - len(kept)} points of rank <"
           f" {config.min_rank} left out")
  guess = init_guess(kept)
  points = log_downsample(kept, config.points_per_decade)
  log_prob = np.log(points.prob[points.income > 0])
  income = points.income[points.income > 0]

  box = _Parametrization(guess, config, (float(income[0]), float(income[-1])))
  n_free = len(box.low)
  if len(income) <= n_free:
    raise DegenerateDataException(
        f"{len(income)} points left after downsampling, need > {n_free}")

  def residuals(z):
    try:
      params = box.decode(z)
      if box.contains(params):
        return _model_residuals(params, income, log_prob)
    except ModelException:
      pass
    return np.full(len(income), FAILED_RESIDUAL)

  runs = []
  for i_start, start in enumerate(_jittered_starts(guess, config)):
    z0 = box.encode(box.feasible(start))
    result = least_squares(
        residuals, z0, bounds=(box.low, box.high), method="trf",
        max_nfev=config.max_iterations, ftol=config.loss_tol,
        xtol=1e-12, gtol=1e-12)
    rss = float(np.sum(result.fun ** 2))
    converged = bool(result.status > 0)
    if not converged:
      lg.warning(f"[fit]start #{i_start} did not converge"
                 f" ({result.message})")
    lg.debug(f"[fit]start #{i_start} rss = {rss:.6g} nfev = {result.nfev}")
    runs.append((rss, int(result.nfev), i_start, result, converged))

  rss, nfev, i_best, best, converged = min(runs, key=lambda r: r[:3])
  params = box.decode(best.x)
  if not box.contains(params):
    raise FitException(
        f"no start gave a valid model with m1 in {box.m1_box}")
  small_separation = normalize(params, method="gauss").small_separation
  if small_separation:
    lg.warning(f"[fit]small separation between borders: m1/m0 ="
               f" {params.m1 / params.m0:.3f}")
  lg.info(f"[fit]best start #{i_best} rss = {rss:.6g} - {params.to_dict()}")

  return FitResult(
      params=params,
      rss=rss,
      income=income,
      residuals=np.array(best.fun),
      converged=converged,
      iterations=nfev,
      small_separation=small_separation)


# --- bootstrap ---

def _resample(sample: IncomeSample, rng: np.random.Generator) -> IncomeSample:
  idx = rng.integers(0, len(sample), len(sample))
  return IncomeSample(
      values=sample.values[idx],
      weights=None if sample.weights is None else sample.weights[idx],
      source=sample.source)


@beartype
def bootstrap_errors(
        ccdf_source: IncomeSample,
        config: FitConfig,
        replicates: int,
        seed: int,
        rich_list: Optional[IncomeSample] = None,
        population: Optional[Real] = None,
        max_workers: Optional[int] = None) -> Dict[str, float]:
  """
    Nonparametric bootstrap of records: resample, rebuild the rank ccdf
    (augmented with the resampled rich list when one is given), refit.
    Replicate i draws from the generator seeded with (seed, i), so results do
    not depend on execution order. Returns the standard deviation of every
    parameter over the successful replicates.
  """
  if replicates < 2:
    raise FitException(f"replicates must be >= 2, got {replicates}")
  if rich_list is not None and population is None:
    raise FitException("a rich list needs the population size")

  def one_replicate(i):
    rng = np.random.default_rng([seed, i])
    try:
      survey = _resample(ccdf_source, rng)
      if rich_list is not None:
        ccdf = augment_tail(survey, _resample(rich_list, rng), population)
      else:
        ccdf = rank_ccdf(survey)
      result = fit(ccdf, config)
    except (FitException, ModelException, EmpiricalException) as e:
      lg.warning(f"[bootstrap_errors]replicate #{i} failed - {e}")
      return None
    if not result.converged:
      lg.warning(f"[bootstrap_errors]replicate #{i} did not converge")
      return None
    return result.params

  with ThreadPoolExecutor(max_workers=max_workers) as executor:
    outcomes = list(executor.map(one_replicate, range(replicates)))

  fitted = [p for p in outcomes if p is not None]
  failed = replicates - len(fitted)
  if failed > 0:
    lg.warning(f"[bootstrap_errors]{failed}/{replicates} replicate(s) excluded")
  if 2 * failed > replicates or len(fitted) < 2:
    raise FitException(
        f"bootstrap failed: {failed} of {replicates} replicates failed")

  table = np.array([[getattr(p, name) for name in PARAM_NAMES] for p in fitted])
  spread = np.std(table, axis=0, ddof=1)
  return {name: float(s) for name, s in zip(PARAM_NAMES, spread)}


@beartype
def goodness(result: FitResult, ccdf: EmpiricalCCDF) -> GoodnessSummary:
  """ Residual summary on the full, not downsampled, ccdf """
  positive = ccdf.income > 0
  income = ccdf.income[positive]
  residuals = _model_residuals(result.params, income,
                               np.log(ccdf.prob[positive]))
  decades = np.floor(np.log10(income)).astype(int)
  per_decade = {int(d): float(np.mean(residuals[decades == d]))
                for d in np.unique(decades)}
  return GoodnessSummary(
      rss=float(np.sum(residuals ** 2)),
      max_abs_residual=float(np.max(np.abs(residuals))),
      per_decade_mean=per_decade)
