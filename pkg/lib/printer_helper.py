#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
import pydoc

from beartype import beartype
from colorama import Fore, Style

from lib._typing import Dict, List, Optional

# 'R' to keep colors - 'X' to keep the screen - 'F' no paging if one screen
PAGER_COMMAND = 'less -R -X -F'


class FormattedString():
  """
    Class to manage difference between String that is printed and String
    that is stored.
    Colorized strings carry non-printable characters, so their printed
    length differs from their raw length.
  """

  def __init__(
          self,
          str_to_be_printed: str,
          str_raw: str,
          len_to_be_printed: int):
    self.to_be_printed = str_to_be_printed
    self.raw = str_raw
    self.len_to_be_printed = len_to_be_printed

  @staticmethod
  @beartype
  def build_from_string(what: str) -> "FormattedString":
    return FormattedString(what, what, len(what))

  @staticmethod
  @beartype
  def build_from_colorized_string(
          what: str,
          raw_what: str) -> "FormattedString":
    return FormattedString(what, raw_what, len(raw_what))

  @staticmethod
  def concat(*args) -> "FormattedString":
    result = FormattedString("", "", 0)
    for s in args:
      if isinstance(s, str):
        result.to_be_printed += s
        result.raw += s
        result.len_to_be_printed += len(s)
      elif isinstance(s, FormattedString):
        result.to_be_printed += s.to_be_printed
        result.raw += s.raw
        result.len_to_be_printed += s.len_to_be_printed
    return result


@beartype
def alignright(
        printable_what: FormattedString,
        nb: int,
        fillchar=" ") -> FormattedString:
  return FormattedString.build_from_colorized_string(
      f"{(fillchar * (nb - printable_what.len_to_be_printed))}{printable_what.to_be_printed}",
      f"{(fillchar * (nb - printable_what.len_to_be_printed))}{printable_what.raw}")


@beartype
def alignleft(
        printable_what: FormattedString,
        nb: int,
        fillchar=" ") -> FormattedString:
  return FormattedString.build_from_colorized_string(
      f"{printable_what.to_be_printed}{(fillchar * (nb - printable_what.len_to_be_printed))}",
      f"{printable_what.raw}{(fillchar * (nb - printable_what.len_to_be_printed))}")


def colorize(what: str, color: str) -> FormattedString:
  return FormattedString.build_from_colorized_string(
      f"{color}{Style.BRIGHT}{what}{Style.RESET_ALL}", what)


class TablePrinter():
  """ Right aligned columns, first column left aligned """

  def __init__(self, sbc=2):
    self.sbc = sbc  # space between column

  @beartype
  def format_table(self, header: List[str],
                   rows: List[List[FormattedString]],
                   colored: bool = True) -> str:
    lines = [[FormattedString.build_from_string(h) for h in header]] + rows
    widths = [max(line[c].len_to_be_printed for line in lines)
              for c in range(len(header))]
    result = []
    for line in lines:
      cells = [alignleft(line[0], widths[0])]
      cells += [alignright(cell, w) for cell, w in zip(line[1:], widths[1:])]
      formatted = FormattedString.concat(
          *[x for cell in cells for x in (cell, " " * self.sbc)])
      result.append(
          (formatted.to_be_printed if colored else formatted.raw).rstrip())
    return "\n".join(result)


def _fmt_change(change: Optional[float]) -> FormattedString:
  if change is None:
    return FormattedString.build_from_string("-")
  return FormattedString.build_from_string(f"{change:+.1%}")


@beartype
def format_series_report(report: Dict, colored: bool = True) -> str:
  """ Human readable table of analysis_helper.series_report output """
  header = ["year", "m0", "m1", "alpha", "alpha1", "m0 yoy", "width yoy",
            "ccdf drop", "gap", "warning", "crisis"]
  rows = []
  for row in report["years"]:
    p = row["params"]
    s = FormattedString.build_from_string
    warning = (colorize("YES", Fore.YELLOW) if row["early_warning"]
               else s("no"))
    crisis = (colorize("YES", Fore.RED) if row["crisis"]["flag"] else s("no"))
    rows.append([
        s(str(row["year"])),
        s(f"{p['m0']:.6g}"),
        s(f"{p['m1']:.6g}"),
        s(f"{p['alpha']:.4g}"),
        s(f"{p['alpha1']:.4g}"),
        _fmt_change(row["m0_change"]),
        _fmt_change(row["medium_width_change"]),
        s(f"{row['metrics']['ccdf_drop']:.4g}"),
        s(f"{row['crisis']['gap']:.1%}"),
        warning,
        crisis])
  title = f"Region {report['region']}"
  return f"{title}\n{TablePrinter().format_table(header, rows, colored)}"


@beartype
def format_comparison(comparison: Dict) -> str:
  a, b = comparison["regions"]
  lines = [f"{a} / {b} - {comparison['year']}"]
  for key in ("slope_ratio", "tail_slope_ratio", "ccdf_drop_ratio",
              "medium_width_ratio", "medium_decades_ratio", "m0_ratio",
              "m1_ratio"):
    lines.append(f"  {key:<22}{comparison[key]:.4f}")
  for region, factor in comparison["m1_factors"].items():
    value = "-" if factor is None else f"{factor:.3f}"
    lines.append(f"  {'m1 factor ' + region:<22}{value}")
  return "\n".join(lines)


@beartype
def print_with_optional_paging(what: str,
                               with_pagination: bool = False) -> None:
  if with_pagination:
    pydoc.pipepager(what, cmd=PAGER_COMMAND)
  else:
    print(what)
