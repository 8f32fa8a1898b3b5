#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details

VERSION = "1.0.0"
PROGRAM_NAME = "EYF Income Toolkit"

# Exit codes of eyf.py (documented in README.md)
(EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC) = (0, 1, 2, 3)


class InputParseException(Exception):
  """ Raised when an input file (CSV, params JSON, series JSON, settings)
      cannot be read or does not follow the expected layout
  """

  def __init__(self, message, path=None):
    super().__init__(message)
    self.src_path = path

  def __str__(self):
    if self.src_path is None:
      return self.args[0]
    return f"{self.args[0]} - raised with file '{self.src_path}'"


def get_versionned_name():
  return f"{PROGRAM_NAME} - {VERSION}"


class UsageException(Exception):
  """ Raised for command arguments that parse but cannot be honoured
      (e.g. an empty income grid or a rich list larger than the population)
  """
  pass
