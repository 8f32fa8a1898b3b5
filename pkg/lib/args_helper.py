#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details


import argparse
import sys

from lib._common import EXIT_USAGE, get_versionned_name
from lib.analysis_helper import (
    DEFAULT_CRISIS_TOLERANCE, DEFAULT_WARNING_THRESHOLD)


class EyfArgumentParser(argparse.ArgumentParser):
  """ Usage errors exit with EXIT_USAGE instead of argparse's 2 """

  def error(self, message):
    self.print_usage(sys.stderr)
    self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _column(what):
  """ 0-based column index, or a header name """
  return int(what) if what.isdigit() else what


def parse_eyf_args(argv=None):
  parser = EyfArgumentParser(
      prog='eyf',
      description=get_versionned_name(),
      allow_abbrev=False)
  parser.add_argument(
      '--logfile',
      '-l',
      type=str,
      help='log file',
      default=None)
  parser.add_argument(
      '--forcenostderr',
      help='disable error logging on stderr if logging is not configured',
      action="store_true",
      default=False)
  parser.add_argument(
      '--logstdout',
      help='print log to stdout',
      action="store_true",
      default=False)
  parser.add_argument(
      '--loglevel',
      type=int,
      help='log level (default = WARN)',
      default=2)
  parser.set_defaults(command="")
  sub_parsers = parser.add_subparsers(dest='cmd')

  parser_fit = sub_parsers.add_parser(
      'fit', help='fit EYF parameters on an income file')
  parser_fit.add_argument('--input', '-i', type=str, required=True,
                          help='survey income CSV')
  parser_fit.add_argument('--out', '-o', type=str, required=True,
                          help='output folder')
  parser_fit.add_argument('--rich-list', type=str, default=None,
                          help='CSV of the largest incomes of the population')
  parser_fit.add_argument('--population', type=int, default=None,
                          help='population size behind the rich list')
  parser_fit.add_argument('--config', type=str, default=None,
                          help='YAML fit settings (see fit_settings.yml.sample)')
  parser_fit.add_argument('--points-per-decade', type=int, default=None,
                          help='points kept per income decade (default 20)')
  parser_fit.add_argument('--min-rank', type=int, default=None,
                          help='leave out ranks below this (default 10)')
  parser_fit.add_argument('--no-constrain-t1', action="store_true",
                          default=False, help='fit T1 independently of m1')
  parser_fit.add_argument('--seed', type=int, default=None,
                          help='multistart seed (default 0)')
  parser_fit.add_argument('--bootstrap', type=int, default=0, metavar='N',
                          help='add bootstrap error bars from N replicates')
  parser_fit.add_argument('--income-column', type=_column, default=0,
                          help='income column, index or header name')
  parser_fit.add_argument('--weight-column', type=_column, default=None,
                          help='survey weight column, index or header name')
  parser_fit.add_argument('--no-header', action="store_true", default=False,
                          help='first line holds data')
  parser_fit.set_defaults(command="fit")

  parser_eval = sub_parsers.add_parser(
      'eval', help='tabulate pdf and ccdf on a log-spaced grid')
  parser_eval.add_argument('--params', '-p', type=str, required=True,
                           help='params JSON')
  parser_eval.add_argument('--out', '-o', type=str, required=True,
                           help='output folder')
  parser_eval.add_argument('--min', type=float, required=True,
                           help='lowest income of the grid')
  parser_eval.add_argument('--max', type=float, required=True,
                           help='highest income of the grid')
  parser_eval.add_argument('--points', type=int, default=200,
                           help='number of grid points (default 200)')
  parser_eval.set_defaults(command="eval")

  parser_sample = sub_parsers.add_parser(
      'sample', help='draw incomes from a model')
  parser_sample.add_argument('--params', '-p', type=str, required=True,
                             help='params JSON')
  parser_sample.add_argument('--out', '-o', type=str, required=True,
                             help='output folder')
  parser_sample.add_argument('--n', type=int, required=True,
                             help='number of draws')
  parser_sample.add_argument('--seed', type=int, default=0,
                             help='random seed (default 0)')
  parser_sample.set_defaults(command="sample")

  parser_analyze = sub_parsers.add_parser(
      'analyze', help='class metrics and crisis indicators of year series')
  parser_analyze.add_argument('--input', '-i', type=str, nargs='+',
                              required=True, help='series JSON file(s)')
  parser_analyze.add_argument('--out', '-o', type=str, required=True,
                              help='output folder')
  parser_analyze.add_argument(
      '--threshold-warning', type=float, default=DEFAULT_WARNING_THRESHOLD,
      help=f'relative m0 rise flagged (default {DEFAULT_WARNING_THRESHOLD})')
  parser_analyze.add_argument(
      '--threshold-crisis', type=float, default=DEFAULT_CRISIS_TOLERANCE,
      help=('largest |alpha - alpha1| / alpha flagged'
            f' (default {DEFAULT_CRISIS_TOLERANCE})'))
  parser_analyze.add_argument('--nocolor', action="store_true", default=False,
                              help='plain table output')
  parser_analyze.add_argument('--page', action="store_true", default=False,
                              help='show the tables through a pager')
  parser_analyze.set_defaults(command="analyze")

  parser_synth = sub_parsers.add_parser(
      'synth', help='synthetic survey and rich list from a model')
  parser_synth.add_argument('--params', '-p', type=str, required=True,
                            help='params JSON')
  parser_synth.add_argument('--out', '-o', type=str, required=True,
                            help='output folder')
  parser_synth.add_argument('--n', type=int, required=True,
                            help='survey size')
  parser_synth.add_argument('--population', type=int, required=True,
                            help='population size P')
  parser_synth.add_argument('--rich-k', type=int, default=0,
                            help='rich-list size K (default 0 = no rich list)')
  parser_synth.add_argument('--seed', type=int, default=0,
                            help='random seed (default 0)')
  parser_synth.add_argument('--truncate-at-m1', action="store_true",
                            default=False,
                            help='keep only survey incomes below m1')
  parser_synth.set_defaults(command="synth")

  parser_rerun = sub_parsers.add_parser(
      'rerun', help='replay the run recorded in a manifest')
  parser_rerun.add_argument('manifest', type=str, help='manifest.json')
  parser_rerun.set_defaults(command="rerun")

  parser_version = sub_parsers.add_parser(
      'version', help="print version number")
  parser_version.set_defaults(command="version")

  result = parser.parse_args(argv)
  if result.command == "":
    parser.error("a command is required")

  return result
