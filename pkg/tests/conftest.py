#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
import os

import pytest

from lib.analysis_helper import load_series
from lib.eyf_model import normalize

DATA_FOLDER = os.path.join(
    os.path.dirname(os.path.dirname(os.path.realpath(__file__))), "data")
EU_SERIES_FILE = os.path.join(DATA_FOLDER, "eu_2005_2010.json")
US_SERIES_FILE = os.path.join(DATA_FOLDER, "us_2005_2010.json")


@pytest.fixture(scope="session")
def eu_series():
  return load_series(EU_SERIES_FILE)["EU"]


@pytest.fixture(scope="session")
def us_series():
  return load_series(US_SERIES_FILE)["US"]


@pytest.fixture(scope="session")
def all_table_params(eu_series, us_series):
  """ The 12 published parameter sets, keyed by (region, year) """
  result = {}
  for series in (eu_series, us_series):
    for entry in series.entries:
      result[(entry.region, entry.year)] = entry.params
  return result


@pytest.fixture(scope="session")
def eu2007(eu_series):
  return eu_series.params_of(2007)


@pytest.fixture(scope="session")
def us2009(us_series):
  return us_series.params_of(2009)


@pytest.fixture(scope="session")
def eu2007_model(eu2007):
  return normalize(eu2007)


@pytest.fixture(scope="session")
def us2009_model(us2009):
  return normalize(us2009)
