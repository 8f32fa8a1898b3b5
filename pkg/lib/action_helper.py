#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from beartype import beartype

from lib._common import EXIT_NUMERIC, EXIT_OK, InputParseException, UsageException
from lib._typing import Dict, List, Optional, Real, Union
from lib.analysis_helper import compare_regions, load_series, series_report
from lib.empirical_helper import (
    FLOAT_FORMAT, CsvFormat, EmpiricalException, IncomeSample, augment_tail,
    describe, load_incomes, rank_ccdf, write_incomes_csv)
from lib.eyf_model import (
    load_params, normalize, pdf, ccdf, sample, sample_top_k, save_params)
from lib.file_config_helper import create_and_get_output_folder, load_fit_config
from lib.fit_helper import (
    FitConfig, FitException, bootstrap_errors, fit, goodness)
from lib.printer_helper import (
    format_comparison, format_series_report, print_with_optional_paging)

lg = logging.getLogger('eyf.action')


@dataclass
class ActionOutcome:
  """ What a command read and wrote, recorded in its manifest """
  inputs: List[str] = field(default_factory=list)
  outputs: List[str] = field(default_factory=list)
  config: Dict = field(default_factory=dict)
  seed: Optional[int] = None
  exit_code: int = EXIT_OK


def _output_folder(folder):
  if create_and_get_output_folder(folder) is None:
    raise InputParseException("output folder cannot be created", folder)
  return folder


def _write_json(content, path):
  with open(path, "w", encoding="utf-8") as f:
    json.dump(content, f, indent=2)
    f.write("\n")


@beartype
def action_fit(
        input_file: str,
        out_folder: str,
        income_column: Union[int, str] = 0,
        weight_column: Optional[Union[int, str]] = None,
        no_header: bool = False,
        rich_list_file: Optional[str] = None,
        population: Optional[int] = None,
        config_file: Optional[str] = None,
        overrides: Optional[Dict] = None,
        bootstrap: int = 0) -> ActionOutcome:
  if rich_list_file is not None and population is None:
    raise UsageException("--rich-list needs --population")
  if bootstrap == 1 or bootstrap < 0:
    raise UsageException("--bootstrap needs at least 2 replicates")

  fmt = CsvFormat(income_column=income_column, weight_column=weight_column,
                  has_header=False if no_header else None)
  inputs = [input_file]
  survey = load_incomes(input_file, fmt)
  rich_list = None
  if rich_list_file is not None:
    rich_list = load_incomes(rich_list_file, source="rich-list")
    inputs.append(rich_list_file)

  if config_file is not None:
    config = load_fit_config(config_file, overrides)
    inputs.append(config_file)
  else:
    try:
      config = FitConfig(**(overrides or {}))
    except FitException as e:
      raise UsageException(str(e))

  try:
    if population is not None:
      ccdf_points = augment_tail(survey, rich_list, population)
    else:
      ccdf_points = rank_ccdf(survey)
  except EmpiricalException as e:
    raise UsageException(str(e))
  lg.info(f"[action_fit]{len(ccdf_points)} ccdf point(s),"
          f" {ccdf_points.removed} removed by tail augmentation")

  result = fit(ccdf_points, config)
  if bootstrap >= 2:
    result = result.with_errors(bootstrap_errors(
        survey, config, bootstrap, config.seed,
        rich_list=rich_list, population=population))
  summary = goodness(result, ccdf_points)

  folder = _output_folder(out_folder)
  params_path = os.path.join(folder, "params.json")
  report_path = os.path.join(folder, "fit_report.json")
  residuals_path = os.path.join(folder, "residuals.tsv")
  save_params(result.params, params_path)
  _write_json({
      "fit": result.to_dict(),
      "goodness": summary.to_dict(),
      "survey": describe(survey).to_dict(),
      "rich_list": None if rich_list is None else describe(rich_list).to_dict(),
      "population": population,
      "rejected_rows": survey.rejected,
      "removed_points": ccdf_points.removed,
  }, report_path)
  pd.DataFrame({"income": result.income,
                "log_residual": result.residuals}).to_csv(
      residuals_path, sep="\t", index=False, float_format=FLOAT_FORMAT,
      lineterminator="\n")

  if not result.converged:
    lg.error("[action_fit]the optimizer did not converge")
  return ActionOutcome(
      inputs=inputs,
      outputs=[params_path, report_path, residuals_path],
      config=dict(config.to_dict(), bootstrap=bootstrap),
      seed=config.seed,
      exit_code=EXIT_OK if result.converged else EXIT_NUMERIC)


@beartype
def action_eval(params_file: str, out_folder: str, low: Real, high: Real,
                points: int) -> ActionOutcome:
  if not (0 < low < high) or points < 2:
    raise UsageException(
        f"grid needs 0 < min < max and at least 2 points"
        f" (got min={low:g}, max={high:g}, points={points})")
  model = normalize(load_params(params_file))
  grid = np.geomspace(low, high, points)
  # geomspace end points are not exact
  grid[0], grid[-1] = low, high

  folder = _output_folder(out_folder)
  curve_path = os.path.join(folder, "curve.tsv")
  pd.DataFrame({"m": grid, "pdf": pdf(model, grid),
                "ccdf": ccdf(model, grid)}).to_csv(
      curve_path, sep="\t", index=False, float_format=FLOAT_FORMAT,
      lineterminator="\n")
  return ActionOutcome(
      inputs=[params_file], outputs=[curve_path],
      config={"min": low, "max": high, "points": points})


@beartype
def action_sample(params_file: str, out_folder: str, n: int,
                  seed: int) -> ActionOutcome:
  if n < 1:
    raise UsageException(f"--n must be >= 1, got {n}")
  model = normalize(load_params(params_file))
  draws = sample(model, n, seed)

  folder = _output_folder(out_folder)
  incomes_path = os.path.join(folder, "incomes.csv")
  write_incomes_csv(draws, incomes_path)
  return ActionOutcome(inputs=[params_file], outputs=[incomes_path],
                       config={"n": n}, seed=seed)


@beartype
def action_analyze(input_files: List[str], out_folder: str, threshold: Real,
                   tolerance: Real, colored: bool = True,
                   paged: bool = False) -> ActionOutcome:
  all_series = {}
  for path in input_files:
    for region, series in load_series(path).items():
      if region in all_series:
        raise InputParseException(f"region '{region}' given twice", path)
      all_series[region] = series

  reports = [series_report(s, threshold, tolerance)
             for s in all_series.values()]
  comparisons = []
  if len(all_series) == 2:
    a, b = all_series.values()
    for year in sorted(set(a.years) & set(b.years)):
      comparisons.append(compare_regions(a, b, year).to_dict())
  elif len(all_series) > 2:
    lg.warning("[action_analyze]regions are compared only when exactly two"
               " are given")

  folder = _output_folder(out_folder)
  report_path = os.path.join(folder, "report.json")
  _write_json({
      "threshold_warning": threshold,
      "threshold_crisis": tolerance,
      "regions": reports,
      "comparisons": comparisons,
  }, report_path)

  text = [format_series_report(r, colored) for r in reports]
  text += [format_comparison(c) for c in comparisons]
  print_with_optional_paging("\n\n".join(text), paged)
  return ActionOutcome(
      inputs=list(input_files), outputs=[report_path],
      config={"threshold_warning": threshold, "threshold_crisis": tolerance})


@beartype
def action_synth(params_file: str, out_folder: str, n: int, population: int,
                 rich_k: int, seed: int,
                 truncate_at_m1: bool = False) -> ActionOutcome:
  """
    Survey of n draws plus the exact top rich_k of population draws.
    The rich list uses seed + 1 so that it does not reuse the survey stream.
  """
  if n < 1:
    raise UsageException(f"--n must be >= 1, got {n}")
  if rich_k < 0 or rich_k > population:
    raise UsageException(
        f"--rich-k must lie in [0, population], got {rich_k} for {population}")
  if population < n:
    raise UsageException(f"population {population} is smaller than n = {n}")

  model = normalize(load_params(params_file))
  survey = sample(model, n, seed)
  if truncate_at_m1:
    kept = survey.values[survey.values < model.params.m1]
    lg.info(f"[action_synth]{n - len(kept)} survey draw(s) above m1 dropped")
    if len(kept) == 0:
      raise UsageException("no survey draw below m1")
    survey = IncomeSample(values=kept, source=survey.source)

  folder = _output_folder(out_folder)
  survey_path = os.path.join(folder, "survey.csv")
  synth_path = os.path.join(folder, "synth.json")
  write_incomes_csv(survey, survey_path)
  outputs = [survey_path, synth_path]
  rich_path = None
  if rich_k > 0:
    rich_path = os.path.join(folder, "rich_list.csv")
    write_incomes_csv(sample_top_k(model, population, rich_k, seed + 1),
                      rich_path)
    outputs.append(rich_path)
  _write_json({
      "population": population,
      "survey_size": len(survey),
      "rich_k": rich_k,
      "survey": os.path.basename(survey_path),
      "rich_list": None if rich_path is None else os.path.basename(rich_path),
  }, synth_path)
  return ActionOutcome(
      inputs=[params_file], outputs=outputs,
      config={"n": n, "population": population, "rich_k": rich_k,
              "truncate_at_m1": truncate_at_m1},
      seed=seed)
