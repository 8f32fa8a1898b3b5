#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
"""
  Social-class metrics and crisis indicators computed from fitted parameters.

  Low-income class: [0, m0], medium-income class: [m0, m1], high-income
  class: above m1.
"""
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
from beartype import beartype

from lib._common import InputParseException
from lib._typing import Dict, List, Optional, Real, Sequence, Tuple
from lib.eyf_model import EYFModel, EYFParams, ModelException, ccdf, normalize

lg = logging.getLogger('eyf.analysis')

DEFAULT_WARNING_THRESHOLD = 0.08
DEFAULT_CRISIS_TOLERANCE = 0.15


class SeriesException(Exception):
  pass


@dataclass(frozen=True)
class YearEntry:
  year: int
  params: EYFParams
  region: str


@dataclass(frozen=True)
class YearSeries:
  region: str
  entries: Tuple[YearEntry, ...]

  def __post_init__(self):
    entries = tuple(self.entries)
    if len(entries) == 0:
      raise SeriesException(f"series '{self.region}' is empty")
    for entry in entries:
      if entry.region != self.region:
        raise SeriesException(
            f"series '{self.region}' holds an entry of region"
            f" '{entry.region}' ({entry.year})")
    years = [e.year for e in entries]
    if any(b <= a for a, b in zip(years, years[1:])):
      raise SeriesException(
          f"years of series '{self.region}' are not strictly increasing:"
          f" {years}")
    object.__setattr__(self, "entries", entries)

  def __len__(self):
    return len(self.entries)

  @property
  def years(self) -> List[int]:
    return [e.year for e in self.entries]

  def params_of(self, year: int) -> EYFParams:
    for entry in self.entries:
      if entry.year == year:
        return entry.params
    raise SeriesException(f"year {year} missing in series '{self.region}'")

  def previous_of(self, year: int) -> Optional[YearEntry]:
    previous = None
    for entry in self.entries:
      if entry.year == year:
        return previous
      previous = entry
    raise SeriesException(f"year {year} missing in series '{self.region}'")


@dataclass(frozen=True)
class ClassMetrics:
  low_range: Tuple[float, float]
  medium_range: Tuple[float, float]
  medium_width: float
  medium_decades: float
  ccdf_drop: float
  exponent_ratio: float
  low_share: float
  high_share: float

  def to_dict(self):
    return {
        "low_range": list(self.low_range),
        "medium_range": list(self.medium_range),
        "medium_width": self.medium_width,
        "medium_decades": self.medium_decades,
        "ccdf_drop": self.ccdf_drop,
        "exponent_ratio": self.exponent_ratio,
        "low_share": self.low_share,
        "high_share": self.high_share,
    }


@dataclass(frozen=True)
class CrisisIndicator:
  flag: bool
  gap: float

  def to_dict(self):
    return {"flag": self.flag, "gap": self.gap}


@dataclass(frozen=True)
class RegionComparison:
  year: int
  regions: Tuple[str, str]
  slope_ratio: float
  tail_slope_ratio: float
  ccdf_drop_ratio: float
  medium_width_ratio: float
  medium_decades_ratio: float
  m0_ratio: float
  m1_ratio: float
  m1_factors: Tuple[Optional[float], Optional[float]]

  def to_dict(self):
    return {
        "year": self.year,
        "regions": list(self.regions),
        "slope_ratio": self.slope_ratio,
        "tail_slope_ratio": self.tail_slope_ratio,
        "ccdf_drop_ratio": self.ccdf_drop_ratio,
        "medium_width_ratio": self.medium_width_ratio,
        "medium_decades_ratio": self.medium_decades_ratio,
        "m0_ratio": self.m0_ratio,
        "m1_ratio": self.m1_ratio,
        "m1_factors": {
            region: factor
            for region, factor in zip(self.regions, self.m1_factors)},
    }


@beartype
def class_metrics(model: EYFModel) -> ClassMetrics:
  p = model.params
  ccdf_m0, ccdf_m1 = (float(v) for v in ccdf(model, np.array([p.m0, p.m1])))
  return ClassMetrics(
      low_range=(0.0, p.m0),
      medium_range=(p.m0, p.m1),
      medium_width=p.m1 - p.m0,
      medium_decades=math.log10(p.m1 / p.m0),
      ccdf_drop=ccdf_m0 - ccdf_m1,
      exponent_ratio=p.alpha1 / p.alpha,
      low_share=1.0 - ccdf_m0,
      high_share=ccdf_m1)


@beartype
def early_warning(series: YearSeries,
                  threshold: Real = DEFAULT_WARNING_THRESHOLD) -> List[int]:
  """
    Years whose lower border m0 rose by at least threshold (relative) over the
    previous year of the series. A single-year series has no flag.
  """
  flagged = []
  for previous, current in zip(series.entries, series.entries[1:]):
    change = (current.params.m0 - previous.params.m0) / previous.params.m0
    if change >= threshold:
      lg.info(f"[early_warning]{series.region} {current.year}: m0"
              f" {previous.params.m0:g} -> {current.params.m0:g}"
              f" ({change:+.1%})")
      flagged.append(current.year)
  return flagged


@beartype
def crisis_indicator(params: EYFParams,
                     tolerance: Real = DEFAULT_CRISIS_TOLERANCE
                     ) -> CrisisIndicator:
  """ The high-income exponent closing in on the medium-income one """
  gap = abs(params.alpha - params.alpha1) / params.alpha
  return CrisisIndicator(flag=gap <= tolerance, gap=gap)


def _m1_factor(series: YearSeries, year: int) -> Optional[float]:
  previous = series.previous_of(year)
  if previous is None:
    return None
  return previous.params.m1 / series.params_of(year).m1


@beartype
def compare_regions(a: YearSeries, b: YearSeries, year: int) -> RegionComparison:
  """
    Ratios region a / region b for one year. m1 factors are
    m1(previous year) / m1(year) for each region (None without history).
  """
  params_a, params_b = a.params_of(year), b.params_of(year)
  metrics_a = class_metrics(normalize(params_a))
  metrics_b = class_metrics(normalize(params_b))
  return RegionComparison(
      year=year,
      regions=(a.region, b.region),
      slope_ratio=params_a.alpha / params_b.alpha,
      tail_slope_ratio=params_a.alpha1 / params_b.alpha1,
      ccdf_drop_ratio=metrics_a.ccdf_drop / metrics_b.ccdf_drop,
      medium_width_ratio=metrics_a.medium_width / metrics_b.medium_width,
      medium_decades_ratio=metrics_a.medium_decades / metrics_b.medium_decades,
      m0_ratio=params_a.m0 / params_b.m0,
      m1_ratio=params_a.m1 / params_b.m1,
      m1_factors=(_m1_factor(a, year), _m1_factor(b, year)))


@beartype
def series_report(
        series: YearSeries,
        threshold: Real = DEFAULT_WARNING_THRESHOLD,
        tolerance: Real = DEFAULT_CRISIS_TOLERANCE) -> Dict:
  """
    Per-year metrics and indicators of one region.
    m1_typical_factor compares m1 with the median m1 of the other years
    (greater than 1 when m1 fell below its typical value).
  """
  warnings = set(early_warning(series, threshold))
  crises = []
  years = []
  previous = None
  for entry in series.entries:
    metrics = class_metrics(normalize(entry.params))
    crisis = crisis_indicator(entry.params, tolerance)
    if crisis.flag:
      crises.append(entry.year)
    others = [e.params.m1 for e in series.entries if e.year != entry.year]
    row = {
        "year": entry.year,
        "params": entry.params.to_dict(),
        "metrics": metrics.to_dict(),
        "m0_change": None,
        "medium_width_change": None,
        "m1_typical_factor": (float(np.median(others)) / entry.params.m1
                              if others else None),
        "early_warning": entry.year in warnings,
        "crisis": crisis.to_dict(),
    }
    if previous is not None:
      prev_entry, prev_metrics = previous
      row["m0_change"] = entry.params.m0 / prev_entry.params.m0 - 1.0
      row["medium_width_change"] = (
          metrics.medium_width / prev_metrics.medium_width - 1.0)
    years.append(row)
    previous = (entry, metrics)

  return {
      "region": series.region,
      "early_warning": sorted(warnings),
      "crisis": crises,
      "years": years,
  }


@beartype
def build_series(records: Sequence[object], path: Optional[str] = None
                 ) -> Dict[str, YearSeries]:
  """ Group {year, region, params} records into one series per region """
  by_region: Dict[str, List[YearEntry]] = {}
  for i, record in enumerate(records):
    if not isinstance(record, dict):
      raise InputParseException(f"series record #{i} is not an object", path)
    try:
      year = record["year"]
      region = record["region"]
      params = EYFParams.from_dict(record["params"])
    except KeyError as e:
      raise InputParseException(f"series record #{i} misses {e}", path)
    except ModelException as e:
      raise InputParseException(f"series record #{i}: {e}", path)
    if not isinstance(year, int) or isinstance(year, bool):
      raise InputParseException(f"series record #{i}: year is not an integer",
                                path)
    by_region.setdefault(str(region), []).append(
        YearEntry(year=year, params=params, region=str(region)))

  return {
      region: YearSeries(region=region,
                         entries=tuple(sorted(entries, key=lambda e: e.year)))
      for region, entries in by_region.items()}


@beartype
def load_series(path: str) -> Dict[str, YearSeries]:
  if not os.path.isfile(path):
    raise InputParseException("series file not found", path)
  try:
    with open(path, encoding="utf-8") as f:
      records = json.load(f)
  except json.JSONDecodeError as e:
    raise InputParseException(f"malformed JSON ({e})", path)
  if not isinstance(records, list) or len(records) == 0:
    raise InputParseException("a series file holds a non-empty JSON array",
                              path)
  try:
    result = build_series(records, path)
  except SeriesException as e:
    raise InputParseException(str(e), path)
  lg.debug(f"[load_series]{path}: regions {sorted(result)}")
  return result
