#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
"""
  Piecewise equilibrium income distribution (extended Yakovenko formalism)

  Low/medium branch, m < m1:
    exp(-(m0/T) atan(m/m0)) / (1 + (m/m0)^2)^((alpha + 1)/2)
  High branch, m >= m1:
    exp(-(m0/T1) atan(m/m0)) / (1 + (m/m0)^2)^((alpha1 + 1)/2)

  Both branches are scaled so that the density is continuous at m1 and
  integrates to one.
"""
import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from beartype import beartype
from numpy.polynomial.legendre import leggauss
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from lib._common import InputParseException
from lib._typing import Dict, Optional, Real, RealOrArray, Tuple
from lib.empirical_helper import IncomeSample

lg = logging.getLogger('eyf.model')

PARAM_NAMES = ("m0", "m1", "T", "T1", "alpha", "alpha1")
INCOME_PARAMS = ("m0", "m1", "T", "T1")

HALF_PI = 0.5 * math.pi
DEFAULT_QUAD_TOL = 1e-9
GRID_LOW_FACTOR = 1e-5     # grid starts at min(m0, T) * GRID_LOW_FACTOR
GRID_HIGH_FACTOR = 1e6     # grid ends at m1 * GRID_HIGH_FACTOR
NODES_PER_DECADE = 80
MIN_NODES = 400
SMALL_SEPARATION_RATIO = 1.5
GAUSS_ORDER = 10
QUANTILE_MAX_ITER = 100

_GL_T, _GL_W = leggauss(GAUSS_ORDER)


class ModelException(ValueError):

  def __init__(self, message, params=None):
    super().__init__(message)
    self.params = params

  def __str__(self):
    if self.params is None:
      return self.args[0]
    return f"{self.args[0]} - params {self.params.to_dict()}"


@dataclass(frozen=True)
class EYFParams:
  """ The six parameters of the distribution plus a currency tag.

      The currency is informational only, no conversion is ever applied.
  """
  m0: float
  m1: float
  T: float
  T1: float
  alpha: float
  alpha1: float
  currency: str = "USD"

  def __post_init__(self):
    for name in PARAM_NAMES:
      value = getattr(self, name)
      if isinstance(value, bool) or not isinstance(
              value, (int, float, np.integer, np.floating)):
        raise ModelException(
            f"parameter {name} must be a real number, got {value!r}")
      value = float(value)
      if not math.isfinite(value):
        raise ModelException(f"parameter {name} must be finite, got {value}")
      object.__setattr__(self, name, value)

    if self.alpha1 <= 0:
      raise ModelException(
          f"non-normalizable parameters: alpha1 = {self.alpha1} must be > 0")
    for name in ("m0", "T", "T1", "alpha"):
      if getattr(self, name) <= 0:
        raise ModelException(
            f"parameter {name} = {getattr(self, name)} must be > 0")
    if self.m1 <= self.m0:
      raise ModelException(
          f"m1 = {self.m1} must be larger than m0 = {self.m0}")

  def to_dict(self) -> Dict[str, object]:
    result = {name: getattr(self, name) for name in PARAM_NAMES}
    result["currency"] = self.currency
    return result

  @staticmethod
  def from_dict(what: dict) -> "EYFParams":
    missing = [name for name in PARAM_NAMES if name not in what]
    if len(missing) > 0:
      raise ModelException(f"missing parameter(s) {', '.join(missing)}")
    return EYFParams(
        **{name: what[name] for name in PARAM_NAMES},
        currency=str(what.get("currency", "USD")))

  def scaled(self, factor: float) -> "EYFParams":
    """ Same shape, all income parameters multiplied by factor """
    if not factor > 0:
      raise ModelException(f"scale factor must be > 0, got {factor}")
    return replace(self, **{name: getattr(self, name) * factor
                            for name in INCOME_PARAMS})

  def with_T1_tied(self) -> "EYFParams":
    return replace(self, T1=self.m1)


@dataclass(frozen=True)
class EYFModel:
  """ Normalized distribution.

      ccdf_grid holds (income, ccdf) rows on a log-spaced grid. The
      interpolator works on (ln m, ln ccdf) and is shape preserving, so the
      interpolated ccdf stays monotone between nodes.
  """
  params: EYFParams
  c_low: float
  c_high: float
  ccdf_grid: np.ndarray = field(compare=False)
  small_separation: bool = False
  method: str = "quad"
  quad_tol: float = DEFAULT_QUAD_TOL
  log_ccdf_interp: Optional[PchipInterpolator] = field(
      default=None, repr=False, compare=False)

  @property
  def grid_bounds(self) -> Tuple[float, float]:
    return (float(self.ccdf_grid[0, 0]), float(self.ccdf_grid[-1, 0]))


# --- branch functions ---

def _log_branch(m, m0, temp, exponent):
  x = m / m0
  return -(m0 / temp) * np.arctan(x) - 0.5 * (exponent + 1.0) * np.log1p(x * x)


def _branch_scalar(m, m0, temp, exponent):
  x = m / m0
  return math.exp(
      -(m0 / temp) * math.atan(x) - 0.5 * (exponent + 1.0) * math.log1p(x * x))


def _log_continuity_factor(params: EYFParams) -> float:
  # ln(f_low(m1) / f_high(m1))
  return float(
      _log_branch(params.m1, params.m0, params.T, params.alpha)
      - _log_branch(params.m1, params.m0, params.T1, params.alpha1))


def _log_tail_lead(m, params: EYFParams):
  """ ln of exp(-(m0/T1) pi/2) * int_m^inf (t/m0)^-(alpha1+1) dt """
  a1 = params.alpha1
  return (-(params.m0 / params.T1) * HALF_PI
          + (a1 + 1.0) * math.log(params.m0) - a1 * np.log(m) - math.log(a1))


def _tail_delta(s, m, params: EYFParams):
  # ln f_high(m/s) - ln of its power-law asymptote, written with y = m0 s / m
  # so that no cancellation occurs for large incomes
  y = params.m0 * s / m
  return (params.m0 / params.T1) * np.arctan(y) \
      - 0.5 * (params.alpha1 + 1.0) * np.log1p(y * y)


def _log_tail_gauss(m: np.ndarray, params: EYFParams) -> np.ndarray:
  """ ln int_m^inf f_high(t) dt, vectorized, for m well above m0 """
  a1 = params.alpha1
  s = 0.5 * (_GL_T + 1.0)
  w = 0.5 * _GL_W
  mm = np.asarray(m, dtype=float)[..., None]
  corr = np.sum(w * s ** (a1 - 1.0) * np.expm1(_tail_delta(s, mm, params)),
                axis=-1)
  return _log_tail_lead(m, params) + np.log1p(a1 * corr)


def _log_tail_quad(m: float, params: EYFParams, tol: float) -> float:
  a1 = params.alpha1

  def integrand(s):
    if s == 0.0:
      return 0.0
    return s ** (a1 - 1.0) * math.expm1(float(_tail_delta(s, m, params)))

  corr = _checked_quad(integrand, 0.0, 1.0, tol, epsabs=tol)
  return float(_log_tail_lead(m, params)) + math.log1p(a1 * corr)


# --- quadrature helpers ---

def _checked_quad(func, a, b, tol, epsabs=0.0):
  with warnings.catch_warnings():
    warnings.simplefilter("error", IntegrationWarning)
    try:
      value, _ = quad(func, a, b, epsabs=epsabs, epsrel=tol, limit=200)
    except IntegrationWarning as iw:
      raise ModelException(
          f"quadrature did not converge on [{a:g}, {b:g}] at tolerance {tol:g}"
          f" ({iw})")
  return value


def _panel_quad(branch, a, b, tol):
  """ int_a^b branch(m) dm computed in u = ln m """
  def integrand(u):
    m = math.exp(u)
    return branch(m) * m

  return _checked_quad(integrand, math.log(a), math.log(b), tol)


def _panels_gauss(log_branch, a: np.ndarray, b: np.ndarray) -> np.ndarray:
  ua = np.log(a)[:, None]
  ub = np.log(b)[:, None]
  half = 0.5 * (ub - ua)
  u = 0.5 * (ua + ub) + half * _GL_T
  return np.sum(_GL_W * np.exp(log_branch(np.exp(u)) + u), axis=1) * half[:, 0]


def _low_integral_gauss(m: np.ndarray, params: EYFParams) -> np.ndarray:
  """ int_0^m f_low, valid where f_low is smooth on [0, m] (m below the grid) """
  mm = np.asarray(m, dtype=float)[..., None]
  t = 0.5 * mm * (_GL_T + 1.0)
  vals = np.exp(_log_branch(t, params.m0, params.T, params.alpha))
  return 0.5 * np.asarray(m, dtype=float) * np.sum(_GL_W * vals, axis=-1)


def _grid_nodes(params: EYFParams) -> np.ndarray:
  lo = min(params.m0, params.T) * GRID_LOW_FACTOR
  hi = params.m1 * GRID_HIGH_FACTOR
  n_nodes = max(MIN_NODES,
                int(math.ceil(math.log10(hi / lo) * NODES_PER_DECADE)) + 1)
  nodes = np.geomspace(lo, hi, n_nodes)
  # m1 must be a node so that no panel straddles the branch switch
  step = math.log(hi / lo) / (n_nodes - 1)
  keep = np.abs(np.log(nodes / params.m1)) > 0.25 * step
  return np.sort(np.concatenate((nodes[keep], [params.m1])))


# --- public operations ---

@beartype
def normalize(
        params: EYFParams,
        quad_tol: Real = DEFAULT_QUAD_TOL,
        method: str = "quad") -> EYFModel:
  """
    Build the normalized model.

    method = "quad"  adaptive quadrature per grid panel (scipy quad),
                     raises ModelException if a panel does not converge
    method = "gauss" fixed order Gauss-Legendre per panel, vectorized
                     (used by the fitting loop)
  """
  quad_tol = float(quad_tol)
  if not quad_tol > 0:
    raise ModelException(f"quad_tol must be > 0, got {quad_tol}")
  if method not in ("quad", "gauss"):
    raise ModelException(f"unknown normalization method '{method}'")

  p = params
  log_k = _log_continuity_factor(p)
  nodes = _grid_nodes(p)
  a, b = nodes[:-1], nodes[1:]
  high = a >= p.m1

  if method == "quad":
    def f_low(m): return _branch_scalar(m, p.m0, p.T, p.alpha)
    def f_high(m): return _branch_scalar(m, p.m0, p.T1, p.alpha1)
    panels = np.array([
        _panel_quad(f_high if is_high else f_low, lo, up, quad_tol)
        for lo, up, is_high in zip(a, b, high)])
    below = _checked_quad(f_low, 0.0, float(nodes[0]), quad_tol)
    log_tail = _log_tail_quad(float(nodes[-1]), p, quad_tol)
  else:
    panels = np.empty(len(a))
    panels[~high] = _panels_gauss(
        lambda m: _log_branch(m, p.m0, p.T, p.alpha), a[~high], b[~high])
    panels[high] = _panels_gauss(
        lambda m: _log_branch(m, p.m0, p.T1, p.alpha1), a[high], b[high])
    below = float(_low_integral_gauss(nodes[0], p))
    log_tail = float(_log_tail_gauss(nodes[-1], p))

  # unnormalized: f_low below m1, k * f_high above
  k = math.exp(log_k)
  panels = np.where(high, k * panels, panels)
  tail = k * math.exp(log_tail)
  z = below + float(np.sum(panels)) + tail
  if not (math.isfinite(z) and z > 0):
    raise ModelException("normalization integral is not finite", params)

  ccdf_nodes = (tail + np.concatenate((np.cumsum(panels[::-1])[::-1], [0.0]))) / z
  cdf_nodes = (below + np.concatenate(([0.0], np.cumsum(panels)))) / z
  log_ccdf_nodes = np.where(
      cdf_nodes < 0.5, np.log1p(-np.minimum(cdf_nodes, 0.5)),
      np.log(np.maximum(ccdf_nodes, np.finfo(float).tiny)))
  if np.any(np.diff(log_ccdf_nodes) >= 0):
    raise ModelException(
        "ccdf grid is not strictly decreasing (density underflow)", params)

  grid = np.column_stack((nodes, np.exp(log_ccdf_nodes)))
  grid.setflags(write=False)
  small_separation = p.m1 < SMALL_SEPARATION_RATIO * p.m0
  if small_separation:
    # the fitting loop normalizes thousands of candidates with "gauss"
    log = lg.warning if method == "quad" else lg.debug
    log(f"[normalize]small separation between borders: m1/m0 = "
        f"{p.m1 / p.m0:.3f} < {SMALL_SEPARATION_RATIO}")

  return EYFModel(
      params=p,
      c_low=1.0 / z,
      c_high=k / z,
      ccdf_grid=grid,
      small_separation=small_separation,
      method=method,
      quad_tol=quad_tol,
      log_ccdf_interp=PchipInterpolator(
          np.log(nodes), log_ccdf_nodes, extrapolate=False))


def _as_income_array(m, caller):
  m_arr = np.asarray(m, dtype=float)
  if np.any(np.isnan(m_arr)) or np.any(m_arr < 0):
    raise ModelException(f"[{caller}]incomes must be >= 0")
  return m_arr


def _as_result(values: np.ndarray, m) -> RealOrArray:
  if np.ndim(m) == 0:
    return float(values)
  return values


@beartype
def pdf(model: EYFModel, m: RealOrArray) -> RealOrArray:
  m_arr = _as_income_array(m, "pdf")
  p = model.params
  with np.errstate(over="ignore", under="ignore"):
    result = np.where(
        m_arr < p.m1,
        model.c_low * np.exp(_log_branch(m_arr, p.m0, p.T, p.alpha)),
        model.c_high * np.exp(_log_branch(m_arr, p.m0, p.T1, p.alpha1)))
  return _as_result(result, m)


@beartype
def log_ccdf(model: EYFModel, m: RealOrArray) -> RealOrArray:
  """ ln ccdf, accurate both near ccdf = 1 and deep in the tail """
  m_arr = _as_income_array(m, "log_ccdf")
  flat = np.atleast_1d(m_arr).ravel()
  lo, hi = model.grid_bounds
  out = np.empty(flat.shape)

  inside = (flat >= lo) & (flat <= hi)
  out[inside] = model.log_ccdf_interp(np.log(flat[inside]))

  below = flat < lo
  out[below] = np.log1p(
      -model.c_low * _low_integral_gauss(flat[below], model.params))

  above = (flat > hi) & np.isfinite(flat)
  out[above] = math.log(model.c_high) + _log_tail_gauss(
      flat[above], model.params)

  out[np.isinf(flat)] = -np.inf
  return _as_result(out.reshape(m_arr.shape), m)


@beartype
def ccdf(model: EYFModel, m: RealOrArray) -> RealOrArray:
  with np.errstate(under="ignore"):
    return _as_result(np.exp(np.asarray(log_ccdf(model, m))), m)


@beartype
def cdf(model: EYFModel, m: RealOrArray) -> RealOrArray:
  return _as_result(-np.expm1(np.asarray(log_ccdf(model, m))), m)


@beartype
def ccdf_exact(model: EYFModel, m: Real) -> float:
  """ Slow path: ccdf by direct adaptive quadrature, no interpolation """
  m = float(m)
  if not m >= 0:
    raise ModelException("[ccdf_exact]incomes must be >= 0")
  if m == 0.0:
    return 1.0
  if math.isinf(m):
    return 0.0
  p = model.params
  tol = model.quad_tol
  hi = float(model.ccdf_grid[-1, 0])

  def f_low(t): return _branch_scalar(t, p.m0, p.T, p.alpha)
  def f_high(t): return _branch_scalar(t, p.m0, p.T1, p.alpha1)

  def log_panels(branch, start, stop):
    n_panels = max(1, int(math.ceil(2 * math.log10(stop / start))))
    edges = np.geomspace(start, stop, n_panels + 1)
    return sum(_panel_quad(branch, lo, up, tol)
               for lo, up in zip(edges[:-1], edges[1:]))

  if m >= hi:
    return model.c_high * math.exp(_log_tail_quad(m, p, tol))

  high_start = max(m, p.m1)
  high_part = log_panels(f_high, high_start, hi) + math.exp(
      _log_tail_quad(hi, p, tol))
  low_part = log_panels(f_low, m, p.m1) if m < p.m1 else 0.0
  return model.c_low * low_part + model.c_high * high_part


def _quantile_inside(model: EYFModel, log_p: np.ndarray) -> np.ndarray:
  """ Invert the interpolated ln ccdf by a safeguarded Newton iteration,
      vectorized, inside the bracketing grid segment of every target
  """
  interp = model.log_ccdf_interp
  deriv = interp.derivative()
  x_nodes = interp.x
  y_nodes = interp(x_nodes)
  j = np.searchsorted(-y_nodes, -log_p, side="right") - 1
  j = np.clip(j, 0, len(x_nodes) - 2)
  lo = x_nodes[j].copy()
  hi = x_nodes[j + 1].copy()
  y_lo, y_hi = y_nodes[j], y_nodes[j + 1]
  x = lo + (hi - lo) * np.clip((y_lo - log_p) / (y_lo - y_hi), 0.0, 1.0)

  for _ in range(QUANTILE_MAX_ITER):
    f = interp(x) - log_p
    done = f == 0
    lo = np.where(f > 0, x, lo)
    hi = np.where(f < 0, x, hi)
    with np.errstate(divide="ignore", invalid="ignore"):
      step = x - f / deriv(x)
    bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
    x_new = np.where(done, x, np.where(bad, 0.5 * (lo + hi), step))
    if np.all(np.abs(x_new - x) <= 4e-16 * np.maximum(1.0, np.abs(x))):
      x = x_new
      break
    x = x_new
  return np.exp(x)


@beartype
def quantile(model: EYFModel, p: RealOrArray) -> RealOrArray:
  """ Income m with ccdf(m) = p, for p in (0, 1] """
  p_arr = np.asarray(p, dtype=float)
  if np.any(np.isnan(p_arr)) or np.any(p_arr <= 0) or np.any(p_arr > 1):
    raise ModelException("[quantile]probabilities must lie in (0, 1]")
  flat = np.atleast_1d(p_arr).ravel()
  out = np.zeros(flat.shape)
  log_p = np.log(flat)
  interp = model.log_ccdf_interp
  y_nodes = interp(interp.x)
  lo, hi = model.grid_bounds
  params = model.params

  inside = (log_p <= y_nodes[0]) & (log_p >= y_nodes[-1])
  out[inside] = _quantile_inside(model, log_p[inside])

  # above the first grid node: ccdf = 1 - c_low * int_0^m f_low
  for idx in np.flatnonzero((log_p > y_nodes[0]) & (flat < 1.0)):
    target = (1.0 - flat[idx]) / model.c_low

    def low_gap(m):
      return float(_low_integral_gauss(m, params)) - target

    out[idx] = lo if low_gap(lo) <= 0 else brentq(
        low_gap, 0.0, lo, xtol=1e-300, rtol=1e-15)

  # beyond the last grid node: analytic tail
  for idx in np.flatnonzero(log_p < y_nodes[-1]):
    target = log_p[idx]

    def tail_gap(u):
      return math.log(model.c_high) + float(
          _log_tail_gauss(math.exp(u), params)) - target

    u_lo = math.log(hi)
    u_hi = u_lo + 1.0
    while tail_gap(u_hi) > 0:
      u_hi += 2.0 * (u_hi - u_lo)
    out[idx] = math.exp(brentq(tail_gap, u_lo, u_hi, xtol=1e-15, rtol=1e-15))

  return _as_result(out.reshape(p_arr.shape), p)


@beartype
def sample(model: EYFModel, n: int, seed: int) -> IncomeSample:
  """ n independent draws by inverse transform, reproducible for a seed """
  if n < 1:
    raise ModelException(f"[sample]n must be >= 1, got {n}")
  rng = np.random.default_rng(seed)
  # 1 - U lies in (0, 1], the domain of quantile
  p = 1.0 - rng.random(n)
  values = np.atleast_1d(quantile(model, p))
  return IncomeSample(values=values, source="synthetic")


@beartype
def sample_top_k(
        model: EYFModel,
        population: int,
        k: int,
        seed: int) -> IncomeSample:
  """
    Exact top-k order statistics of `population` draws, without drawing the
    population. The k smallest of `population` uniforms (read as ccdf
    values) are generated sequentially: given the i-th smallest u, the next
    one is u + (1 - u) * Beta(1, population - i).
  """
  if k < 1:
    raise ModelException(f"[sample_top_k]k must be >= 1, got {k}")
  if k > population:
    raise ModelException(
        f"[sample_top_k]k = {k} exceeds population = {population}")
  rng = np.random.default_rng(seed)
  u = np.empty(k)
  current = 0.0
  for i in range(k):
    current = current + (1.0 - current) * rng.beta(1.0, population - i)
    u[i] = current
  values = np.atleast_1d(quantile(model, np.maximum(u, np.finfo(float).tiny)))
  return IncomeSample(values=values, source="rich-list")


# --- params files ---

@beartype
def load_params(path: str) -> EYFParams:
  """ Read params from a flat JSON object, or from the "params" member of a
      fit result file
  """
  try:
    with open(path, "r", encoding="utf-8") as f:
      content = json.load(f)
  except FileNotFoundError:
    raise InputParseException("params file not found", path)
  except (json.JSONDecodeError, UnicodeDecodeError) as e:
    raise InputParseException(f"params file is not valid JSON ({e})", path)

  if isinstance(content, dict) and isinstance(content.get("params"), dict):
    content = content["params"]
  if not isinstance(content, dict):
    raise InputParseException("params file must contain a JSON object", path)
  try:
    return EYFParams.from_dict(content)
  except ModelException as me:
    raise InputParseException(f"invalid params ({me})", path)


@beartype
def save_params(params: EYFParams, path: str) -> None:
  with open(path, "w", encoding="utf-8") as f:
    json.dump(params.to_dict(), f, indent=2)
    f.write("\n")
