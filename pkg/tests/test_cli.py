#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
import json
import os

import pandas as pd
import pytest

import eyf
import lib.printer_helper as printer_helper
from lib._common import EXIT_NUMERIC, EXIT_OK, EXIT_PARSE, EXIT_USAGE, VERSION
from lib.eyf_model import ccdf_exact, load_params, save_params

DATA_FOLDER = os.path.join(
    os.path.dirname(os.path.dirname(os.path.realpath(__file__))), "data")
EU_FILE = os.path.join(DATA_FOLDER, "eu_2005_2010.json")
US_FILE = os.path.join(DATA_FOLDER, "us_2005_2010.json")


@pytest.fixture
def params_file(tmp_path, us2009):
  path = str(tmp_path / "params.json")
  save_params(us2009, path)
  return path


def _read(path):
  with open(path, "rb") as f:
    return f.read()


def _manifest(folder):
  with open(os.path.join(folder, "manifest.json"), encoding="utf-8") as f:
    return json.load(f)


# --- usage ---

def test_version(capsys):
  assert eyf.main(["version"]) == EXIT_OK
  assert capsys.readouterr().out == f"{VERSION}\n"


@pytest.mark.parametrize("argv", [
    [], ["--bogus"], ["fit", "--out", "x"], ["eval", "--params", "p"],
    ["sample", "--params", "p", "--out", "o", "--n", "many"]])
def test_usage_errors_exit_with_one(argv):
  with pytest.raises(SystemExit) as e:
    eyf.main(argv)
  assert e.value.code == EXIT_USAGE


# --- eval ---

def test_eval_writes_the_curve(tmp_path, params_file):
  out = str(tmp_path / "eval")
  code = eyf.main(["eval", "--params", params_file, "--out", out,
                   "--min", "1", "--max", "10", "--points", "2"])
  assert code == EXIT_OK
  lines = _read(os.path.join(out, "curve.tsv")).decode().splitlines()
  assert lines[0] == "m\tpdf\tccdf"
  assert [line.split("\t")[0] for line in lines[1:]] == ["1", "10"]
  manifest = _manifest(out)
  assert manifest["command"] == "eval"
  assert manifest["outputs"] == ["curve.tsv"]
  assert manifest["inputs"][0]["path"] == params_file


def test_eval_ccdf_matches_direct_quadrature(tmp_path, params_file,
                                            us2009_model):
  out = str(tmp_path / "eval")
  assert eyf.main(["eval", "--params", params_file, "--out", out,
                   "--min", "1e3", "--max", "1e8", "--points", "11"]) \
      == EXIT_OK
  curve = pd.read_csv(os.path.join(out, "curve.tsv"), sep="\t")
  assert list(curve.columns) == ["m", "pdf", "ccdf"]
  for m, value in zip(curve["m"], curve["ccdf"]):
    assert value == pytest.approx(ccdf_exact(us2009_model, m), rel=1e-4), m


@pytest.mark.parametrize("grid", [["0", "10", "5"], ["10", "1", "5"],
                                  ["1", "10", "1"]])
def test_eval_rejects_invalid_grids(tmp_path, params_file, grid):
  out = str(tmp_path / "eval")
  code = eyf.main(["eval", "--params", params_file, "--out", out,
                   "--min", grid[0], "--max", grid[1], "--points", grid[2]])
  assert code == EXIT_USAGE
  assert not os.path.exists(out)


def test_eval_with_invalid_params_file(tmp_path):
  bad = tmp_path / "bad.json"
  bad.write_text(json.dumps({"m0": 1, "m1": 2, "T": 1, "T1": 2,
                             "alpha": 1, "alpha1": 0}))
  code = eyf.main(["eval", "--params", str(bad), "--out",
                   str(tmp_path / "eval"), "--min", "1", "--max", "10"])
  assert code == EXIT_PARSE


# --- sample ---

def test_sample_is_reproducible(tmp_path, params_file):
  first, second = str(tmp_path / "a"), str(tmp_path / "b")
  for out in (first, second):
    assert eyf.main(["sample", "--params", params_file, "--out", out,
                     "--n", "5", "--seed", "3"]) == EXIT_OK
  lines = _read(os.path.join(first, "incomes.csv")).decode().splitlines()
  assert lines[0] == "income"
  assert len(lines) == 6
  assert _read(os.path.join(first, "incomes.csv")) \
      == _read(os.path.join(second, "incomes.csv"))
  assert _manifest(first)["seed"] == 3


def test_sample_needs_a_positive_size(tmp_path, params_file):
  code = eyf.main(["sample", "--params", params_file,
                   "--out", str(tmp_path / "s"), "--n", "0"])
  assert code == EXIT_USAGE


# --- fit ---

def test_fit_on_empty_file_writes_nothing(tmp_path):
  empty = tmp_path / "empty.csv"
  empty.write_text("")
  out = str(tmp_path / "fit")
  assert eyf.main(["fit", "--input", str(empty), "--out", out]) == EXIT_PARSE
  assert not os.path.exists(out)


def test_fit_on_missing_file(tmp_path):
  code = eyf.main(["fit", "--input", str(tmp_path / "none.csv"),
                   "--out", str(tmp_path / "fit")])
  assert code == EXIT_PARSE


def test_fit_rich_list_needs_population(tmp_path):
  code = eyf.main(["fit", "--input", "a.csv", "--rich-list", "b.csv",
                   "--out", str(tmp_path / "fit")])
  assert code == EXIT_USAGE


def test_fit_with_unknown_setting(tmp_path):
  incomes = tmp_path / "incomes.csv"
  incomes.write_text("1\n2\n3\n")
  settings = tmp_path / "settings.yml"
  settings.write_text("n_starts: 2\ncolour: blue\n")
  code = eyf.main(["fit", "--input", str(incomes), "--config", str(settings),
                   "--out", str(tmp_path / "fit")])
  assert code == EXIT_PARSE


def test_fit_on_degenerate_data_is_a_numeric_error(tmp_path):
  incomes = tmp_path / "incomes.csv"
  incomes.write_text("\n".join(str(v) for v in range(100, 200)) + "\n")
  out = str(tmp_path / "fit")
  assert eyf.main(["fit", "--input", str(incomes), "--out", out]) \
      == EXIT_NUMERIC
  assert not os.path.exists(os.path.join(out, "params.json"))


@pytest.mark.slow
def test_synth_then_fit_recovers_the_params(tmp_path, params_file, us2009):
  synth = str(tmp_path / "synth")
  assert eyf.main(["synth", "--params", params_file, "--out", synth,
                   "--n", "200000", "--population", "1000000",
                   "--rich-k", "100", "--seed", "2"]) == EXIT_OK
  runs = []
  for name in ("fit1", "fit2"):
    out = str(tmp_path / name)
    code = eyf.main([
        "fit", "--input", os.path.join(synth, "survey.csv"),
        "--rich-list", os.path.join(synth, "rich_list.csv"),
        "--population", "1000000", "--out", out, "--seed", "4"])
    assert code == EXIT_OK
    runs.append(out)
  for name in ("params.json", "fit_report.json", "residuals.tsv"):
    assert _read(os.path.join(runs[0], name)) \
        == _read(os.path.join(runs[1], name)), name
  manifest = _manifest(runs[0])
  assert manifest["outputs"] == [
      "fit_report.json", "params.json", "residuals.tsv"]
  assert manifest["seed"] == 4
  assert len(manifest["inputs"]) == 2

  fitted = load_params(os.path.join(runs[0], "params.json"))
  for name in ("m0", "T", "T1"):
    assert getattr(fitted, name) == pytest.approx(
        getattr(us2009, name), rel=0.18), name
  for name in ("alpha", "alpha1"):
    assert getattr(fitted, name) == pytest.approx(
        getattr(us2009, name), rel=0.04), name


# --- analyze ---

def test_analyze_published_series(tmp_path, capsys):
  out = str(tmp_path / "analyze")
  code = eyf.main(["analyze", "--input", EU_FILE, US_FILE, "--out", out,
                   "--nocolor"])
  assert code == EXIT_OK
  with open(os.path.join(out, "report.json"), encoding="utf-8") as f:
    report = json.load(f)
  regions = {r["region"]: r for r in report["regions"]}
  assert regions["EU"]["early_warning"] == [2007]
  assert regions["US"]["early_warning"] == [2006]
  assert regions["EU"]["crisis"] == [2009]
  assert regions["US"]["crisis"] == []
  assert [c["year"] for c in report["comparisons"]] == list(range(2005, 2011))
  assert report["comparisons"][2]["slope_ratio"] == pytest.approx(
      2.735 / 1.83)
  assert "\x1b[" not in capsys.readouterr().out


def test_analyze_single_year_has_no_warning(tmp_path, us2009):
  series = tmp_path / "one.json"
  series.write_text(json.dumps(
      [{"year": 2009, "region": "US", "params": us2009.to_dict()}]))
  out = str(tmp_path / "analyze")
  assert eyf.main(["analyze", "--input", str(series), "--out", out]) == EXIT_OK
  with open(os.path.join(out, "report.json"), encoding="utf-8") as f:
    report = json.load(f)
  assert report["regions"][0]["early_warning"] == []
  assert report["comparisons"] == []


def test_analyze_through_the_pager(tmp_path, monkeypatch, capsys):
  shown = []
  monkeypatch.setattr(printer_helper.pydoc, "pipepager",
                      lambda text, cmd: shown.append((text, cmd)))
  code = eyf.main(["analyze", "--input", EU_FILE, "--out",
                   str(tmp_path / "analyze"), "--nocolor", "--page"])
  assert code == EXIT_OK
  assert len(shown) == 1
  assert "EU" in shown[0][0]
  assert shown[0][1] == printer_helper.PAGER_COMMAND
  assert capsys.readouterr().out == ""


def test_analyze_rejects_a_region_given_twice(tmp_path):
  code = eyf.main(["analyze", "--input", EU_FILE, EU_FILE,
                   "--out", str(tmp_path / "analyze")])
  assert code == EXIT_PARSE


# --- synth ---

def test_synth_without_rich_list(tmp_path, params_file):
  out = str(tmp_path / "synth")
  code = eyf.main(["synth", "--params", params_file, "--out", out,
                   "--n", "100", "--population", "1000"])
  assert code == EXIT_OK
  assert not os.path.exists(os.path.join(out, "rich_list.csv"))
  with open(os.path.join(out, "synth.json"), encoding="utf-8") as f:
    assert json.load(f)["rich_list"] is None
  assert _manifest(out)["outputs"] == ["survey.csv", "synth.json"]


def test_synth_with_rich_list(tmp_path, params_file):
  out = str(tmp_path / "synth")
  code = eyf.main(["synth", "--params", params_file, "--out", out,
                   "--n", "100", "--population", "1000", "--rich-k", "10"])
  assert code == EXIT_OK
  lines = _read(os.path.join(out, "rich_list.csv")).decode().splitlines()
  values = [float(v) for v in lines[1:]]
  assert len(values) == 10
  assert values == sorted(values, reverse=True)


def test_synth_truncated_at_m1(tmp_path, params_file, us2009):
  out = str(tmp_path / "synth")
  code = eyf.main(["synth", "--params", params_file, "--out", out,
                   "--n", "2000", "--population", "10000", "--seed", "6",
                   "--truncate-at-m1"])
  assert code == EXIT_OK
  survey = pd.read_csv(os.path.join(out, "survey.csv"))
  assert (survey["income"] < us2009.m1).all()
  with open(os.path.join(out, "synth.json"), encoding="utf-8") as f:
    summary = json.load(f)
  assert summary["survey_size"] == len(survey)
  assert summary["survey_size"] <= 2000
  assert _manifest(out)["config"]["truncate_at_m1"] is True


@pytest.mark.parametrize("extra", [
    ["--n", "100", "--population", "1000", "--rich-k", "1001"],
    ["--n", "100", "--population", "1000", "--rich-k", "-1"],
    ["--n", "100", "--population", "50"],
    ["--n", "0", "--population", "50"]])
def test_synth_argument_errors(tmp_path, params_file, extra):
  code = eyf.main(["synth", "--params", params_file,
                   "--out", str(tmp_path / "synth")] + extra)
  assert code == EXIT_USAGE


# --- rerun ---

def test_rerun_reproduces_outputs(tmp_path, params_file):
  out = str(tmp_path / "sample")
  assert eyf.main(["sample", "--params", params_file, "--out", out,
                   "--n", "50", "--seed", "8"]) == EXIT_OK
  incomes = os.path.join(out, "incomes.csv")
  manifest = os.path.join(out, "manifest.json")
  before = (_read(incomes), _read(manifest))
  os.remove(incomes)

  assert eyf.main(["rerun", manifest]) == EXIT_OK
  assert (_read(incomes), _read(manifest)) == before


def test_rerun_refuses_changed_inputs(tmp_path, params_file, eu2007):
  out = str(tmp_path / "sample")
  assert eyf.main(["sample", "--params", params_file, "--out", out,
                   "--n", "5"]) == EXIT_OK
  save_params(eu2007, params_file)
  assert eyf.main(["rerun", os.path.join(out, "manifest.json")]) == EXIT_PARSE


def test_rerun_of_missing_manifest(tmp_path):
  assert eyf.main(["rerun", str(tmp_path / "manifest.json")]) == EXIT_PARSE
