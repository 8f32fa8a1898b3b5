#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from beartype import beartype

from lib._common import InputParseException
from lib._typing import List, Optional, Real, Tuple, Union

lg = logging.getLogger('eyf.empirical')

FLOAT_FORMAT = "%.17g"


class EmpiricalException(Exception):
  pass


@dataclass(frozen=True, eq=False)
class IncomeSample:
  """
    Non-negative incomes, optional survey expansion weights and a free text
    source tag (survey, rich-list, synthetic, ...).
    rejected is the number of input rows dropped while loading.
  """
  values: np.ndarray
  weights: Optional[np.ndarray] = None
  source: str = "survey"
  rejected: int = 0

  def __post_init__(self):
    values = np.array(self.values, dtype=float).ravel()
    if len(values) == 0:
      raise EmpiricalException("an income sample cannot be empty")
    if not np.all(np.isfinite(values)) or np.any(values < 0):
      raise EmpiricalException("incomes must be finite and >= 0")
    values.setflags(write=False)
    object.__setattr__(self, "values", values)

    if self.weights is not None:
      weights = np.array(self.weights, dtype=float).ravel()
      if len(weights) != len(values):
        raise EmpiricalException(
            f"{len(weights)} weights given for {len(values)} incomes")
      if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise EmpiricalException("weights must be finite and > 0")
      weights.setflags(write=False)
      object.__setattr__(self, "weights", weights)

  def __len__(self):
    return len(self.values)

  @property
  def total_weight(self) -> float:
    if self.weights is None:
      return float(len(self.values))
    return float(np.sum(self.weights))

  def scaled(self, factor: float) -> "IncomeSample":
    return IncomeSample(
        values=self.values * factor, weights=self.weights,
        source=self.source, rejected=self.rejected)


@dataclass(frozen=True, eq=False)
class EmpiricalCCDF:
  """ Step function: income strictly increasing, survival probability
      strictly decreasing inside (0, 1)
  """
  income: np.ndarray
  prob: np.ndarray
  n_effective: float
  removed: int = 0

  def __post_init__(self):
    income = np.array(self.income, dtype=float).ravel()
    prob = np.array(self.prob, dtype=float).ravel()
    if len(income) == 0 or len(income) != len(prob):
      raise EmpiricalException(
          "a ccdf needs as many probabilities as incomes (at least one)")
    if np.any(np.diff(income) <= 0):
      raise EmpiricalException("ccdf incomes must be strictly increasing")
    if np.any(np.diff(prob) >= 0):
      raise EmpiricalException("ccdf probabilities must be strictly decreasing")
    if prob[0] >= 1 or prob[-1] <= 0:
      raise EmpiricalException("ccdf probabilities must lie in (0, 1)")
    income.setflags(write=False)
    prob.setflags(write=False)
    object.__setattr__(self, "income", income)
    object.__setattr__(self, "prob", prob)
    object.__setattr__(self, "n_effective", float(self.n_effective))

  def __len__(self):
    return len(self.income)

  @property
  def points(self) -> List[Tuple[float, float]]:
    return [(float(m), float(p)) for m, p in zip(self.income, self.prob)]

  @property
  def decades(self) -> float:
    """ Number of income decades covered by the strictly positive points """
    positive = self.income[self.income > 0]
    if len(positive) < 2:
      return 0.0
    return math.log10(positive[-1] / positive[0])


@dataclass(frozen=True)
class CsvFormat:
  """
    Column mapping of an income CSV file.
    Columns are given by 0-based index or by header name. has_header = None
    means: a header is present if the first income cell is not a number.
  """
  income_column: Union[int, str] = 0
  weight_column: Optional[Union[int, str]] = None
  has_header: Optional[bool] = None
  delimiter: str = ","


@dataclass(frozen=True)
class SampleSummary:
  n: int
  total_weight: float
  min_income: float
  max_income: float
  decades: float

  def to_dict(self):
    return {
        "n": self.n,
        "total_weight": self.total_weight,
        "min_income": self.min_income,
        "max_income": self.max_income,
        "decades": self.decades,
    }


def _column_index(column, names, path):
  if isinstance(column, str):
    if names is None or column not in names:
      raise InputParseException(f"missing column '{column}'", path)
    return names.index(column)
  if column < 0 or (names is not None and column >= len(names)):
    raise InputParseException(f"missing column #{column}", path)
  return column


def _is_number(what: str) -> bool:
  try:
    float(what)
    return True
  except ValueError:
    return False


@beartype
def load_incomes(path: str, fmt: CsvFormat = CsvFormat(),
                 source: str = "survey") -> IncomeSample:
  """
    Load incomes (and optional weights) from a UTF-8 CSV file.
    Rows with a negative or non-numeric income (or a non-positive weight)
    are rejected; their count is logged and kept in IncomeSample.rejected.
  """
  if not os.path.isfile(path):
    raise InputParseException("income file not found", path)
  try:
    table = pd.read_csv(
        path, header=None, dtype=str, sep=fmt.delimiter, encoding="utf-8",
        keep_default_na=False, skip_blank_lines=True)
  except pd.errors.EmptyDataError:
    raise InputParseException("income file is empty", path)
  except (pd.errors.ParserError, UnicodeDecodeError) as e:
    raise InputParseException(f"income file cannot be parsed ({e})", path)

  has_header = fmt.has_header
  if has_header is None:
    if isinstance(fmt.income_column, str):
      has_header = True
    else:
      index = _column_index(fmt.income_column, list(table.columns), path)
      has_header = not _is_number(str(table.iat[0, index]).strip())

  names = None
  first_line = 1
  if has_header:
    names = [str(c).strip() for c in table.iloc[0]]
    table = table.iloc[1:]
    first_line = 2
  else:
    names_count = table.shape[1]
    names = [str(i) for i in range(names_count)]

  def resolve(column):
    if isinstance(column, int) and not has_header:
      if column < 0 or column >= table.shape[1]:
        raise InputParseException(f"missing column #{column}", path)
      return column
    return _column_index(column, names, path)

  income_index = resolve(fmt.income_column)
  incomes = pd.to_numeric(
      table.iloc[:, income_index].str.strip(), errors="coerce").to_numpy(float)
  valid = np.isfinite(incomes) & (incomes >= 0)

  weights = None
  if fmt.weight_column is not None:
    weight_index = resolve(fmt.weight_column)
    weights = pd.to_numeric(
        table.iloc[:, weight_index].str.strip(), errors="coerce").to_numpy(float)
    valid &= np.isfinite(weights) & (weights > 0)

  rejected = int(np.count_nonzero(~valid))
  if rejected > 0:
    bad_lines = (np.flatnonzero(~valid) + first_line)[:5]
    lg.warning(
        f"[load_incomes]{rejected} row(s) rejected in '{path}'"
        f" (negative or non-numeric), first line(s): "
        f"{', '.join(str(i) for i in bad_lines)}")
  if not np.any(valid):
    raise InputParseException("no valid income row", path)

  lg.info(f"[load_incomes]{np.count_nonzero(valid)} income(s) read from '{path}'")
  return IncomeSample(
      values=incomes[valid],
      weights=None if weights is None else weights[valid],
      source=source,
      rejected=rejected)


@beartype
def write_incomes_csv(sample: IncomeSample, path: str) -> None:
  columns = {"income": sample.values}
  if sample.weights is not None:
    columns["weight"] = sample.weights
  pd.DataFrame(columns).to_csv(
      path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


@beartype
def write_ccdf_tsv(ccdf: EmpiricalCCDF, path: str) -> None:
  pd.DataFrame({"income": ccdf.income, "ccdf": ccdf.prob}).to_csv(
      path, sep="\t", index=False, float_format=FLOAT_FORMAT,
      lineterminator="\n")


def _rank_points(values: np.ndarray, weights: Optional[np.ndarray]):
  """
    Distinct incomes (ascending) with the weight of all records at or above
    each of them, i.e. the largest Weibull rank among tied values
  """
  order = np.argsort(values, kind="stable")
  v = values[order]
  w = np.ones(len(v)) if weights is None else weights[order]
  uniq, first_idx = np.unique(v, return_index=True)
  at_or_above = np.cumsum(w[::-1])[::-1][first_idx]
  return uniq, at_or_above


@beartype
def rank_ccdf(sample: IncomeSample) -> EmpiricalCCDF:
  """
    Weibull plotting positions: the r-th largest of N values gets r/(N+1).
    With weights, r is the cumulative weight from the top and N the total
    weight.
  """
  n_effective = sample.total_weight
  income, rank = _rank_points(sample.values, sample.weights)
  return EmpiricalCCDF(income=income, prob=rank / (n_effective + 1.0),
                       n_effective=n_effective)


@beartype
def augment_tail(
        survey: IncomeSample,
        rich_list: Optional[IncomeSample],
        population: Real) -> EmpiricalCCDF:
  """
    Merge a rich list (the K largest incomes of a population of size P) on
    top of a survey ccdf. The rich value of rank r gets r/(P+1). Survey points
    that would break monotonicity (at or above the lowest rich income, or
    with a probability not above the largest rich-list probability) are
    removed and reported.
  """
  population = float(population)
  if population < len(survey):
    raise EmpiricalException(
        f"population {population:g} is smaller than the survey size"
        f" {len(survey)}")

  body = rank_ccdf(survey)
  if rich_list is None:
    return body

  if len(rich_list) > population:
    raise EmpiricalException(
        f"rich list of {len(rich_list)} records exceeds population"
        f" {population:g}")
  if rich_list.weights is not None:
    lg.warning("[augment_tail]rich-list weights are ignored, ranks are counts")

  rich_income, rich_rank = _rank_points(rich_list.values, None)
  rich_prob = rich_rank / (population + 1.0)

  overlap = body.income >= rich_income[0]
  if np.any(overlap):
    lg.warning(
        f"[augment_tail]max survey income {body.income[-1]:g} is not below"
        f" min rich-list income {rich_income[0]:g}")
  conflict = overlap | (body.prob <= rich_prob[0])
  removed = int(np.count_nonzero(conflict))
  if removed > 0:
    lg.warning(f"[augment_tail]{removed} survey point(s) removed to keep the"
               " merged ccdf strictly decreasing")

  return EmpiricalCCDF(
      income=np.concatenate((body.income[~conflict], rich_income)),
      prob=np.concatenate((body.prob[~conflict], rich_prob)),
      n_effective=population,
      removed=removed)


@beartype
def log_downsample(ccdf: EmpiricalCCDF, points_per_decade: int) -> EmpiricalCCDF:
  """
    Keep the first (lowest income) point of every log bin of width
    1/points_per_decade decade. Bins are anchored on powers of ten.
  """
  if points_per_decade < 1:
    raise EmpiricalException(
        f"points_per_decade must be >= 1, got {points_per_decade}")
  income = ccdf.income
  positive = income > 0
  bins = np.full(len(income), np.iinfo(np.int64).min, dtype=np.int64)
  bins[positive] = np.floor(
      np.log10(income[positive]) * points_per_decade).astype(np.int64)
  keep = np.concatenate(([True], bins[1:] != bins[:-1]))
  return EmpiricalCCDF(
      income=income[keep], prob=ccdf.prob[keep],
      n_effective=ccdf.n_effective, removed=ccdf.removed)


@beartype
def drop_top_ranks(ccdf: EmpiricalCCDF, min_rank: Real) -> EmpiricalCCDF:
  """
    Keep the points of rank >= min_rank, the rank of a point being
    prob * (n_effective + 1). The log position ln(r / (N + 1)) of rank r
    scatters by about 1 / sqrt(r).
  """
  if min_rank < 1:
    raise EmpiricalException(f"min_rank must be >= 1, got {min_rank}")
  rank = ccdf.prob * (ccdf.n_effective + 1.0)
  keep = rank >= min_rank * (1.0 - 1e-9)
  if np.count_nonzero(keep) == 0:
    raise EmpiricalException(f"no ccdf point of rank >= {min_rank}")
  return EmpiricalCCDF(
      income=ccdf.income[keep], prob=ccdf.prob[keep],
      n_effective=ccdf.n_effective, removed=ccdf.removed)


@beartype
def describe(sample: IncomeSample) -> SampleSummary:
  """ Data level facts, e.g. the upper limit of the high-income class """
  positive = sample.values[sample.values > 0]
  decades = 0.0
  if len(positive) > 1:
    decades = math.log10(positive.max() / positive.min())
  return SampleSummary(
      n=len(sample),
      total_weight=sample.total_weight,
      min_income=float(sample.values.min()),
      max_income=float(sample.values.max()),
      decades=decades)
