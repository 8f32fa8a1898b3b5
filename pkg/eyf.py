#!/usr/bin/env python3
#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
"""
  EYF Income Toolkit
"""
import logging
import os
import sys
from os.path import exists

from lib._common import (
    EXIT_NUMERIC, EXIT_OK, EXIT_PARSE, EXIT_USAGE, VERSION,
    InputParseException, UsageException)
from lib.action_helper import (
    action_analyze, action_eval, action_fit, action_sample, action_synth)
from lib.args_helper import parse_eyf_args
from lib.empirical_helper import EmpiricalException
from lib.eyf_model import ModelException
from lib.file_config_helper import load_manifest, write_manifest
from lib.fit_helper import FitException

FORMAT_LOG = "%(asctime)-15s %(name)s [%(levelname)s] %(message)s"

lg = logging.getLogger('eyf')
_installed_handlers = []


def configure_logging(args):

  # handlers of a previous call (tests and rerun call main more than once)
  for handler in _installed_handlers:
    lg.removeHandler(handler)
    handler.close()
  _installed_handlers.clear()

  if exists(
          f"{os.path.dirname(os.path.realpath(__file__))}{os.sep}logging_config.py"):
    import logging_config

  else:
    # logging level are given here:
    # https://docs.python.org/3/library/logging.html#levels
    lg.setLevel(50 - (args.loglevel * 10))

  if args.logstdout:
    sh = logging.StreamHandler(sys.stdout)
    sh.setFormatter(logging.Formatter(FORMAT_LOG))
    _installed_handlers.append(sh)

  if args.forcenostderr:
    # By default, message error are logged on console if no handlers is configured.
    # The following line disables this behavior.
    logging.lastResort = logging.NullHandler()

  if args.logfile is not None:
    fh = logging.FileHandler(filename=args.logfile)
    fh.setFormatter(logging.Formatter(FORMAT_LOG))
    _installed_handlers.append(fh)

  for handler in _installed_handlers:
    lg.addHandler(handler)


def fit_overrides(args):
  """ FitConfig values given on the command line """
  overrides = {}
  if args.points_per_decade is not None:
    overrides["points_per_decade"] = args.points_per_decade
  if args.min_rank is not None:
    overrides["min_rank"] = args.min_rank
  if args.no_constrain_t1:
    overrides["constrain_T1_eq_m1"] = False
  if args.seed is not None:
    overrides["seed"] = args.seed
  return overrides


def run_command(args, argv):
  if args.command == "version":
    print(VERSION)
    return EXIT_OK

  if args.command == "rerun":
    manifest = load_manifest(args.manifest)
    lg.info(f"[run_command]replaying {manifest['argv']}")
    return main(manifest["argv"])

  if args.command == "fit":
    outcome = action_fit(
        args.input,
        args.out,
        income_column=args.income_column,
        weight_column=args.weight_column,
        no_header=args.no_header,
        rich_list_file=args.rich_list,
        population=args.population,
        config_file=args.config,
        overrides=fit_overrides(args),
        bootstrap=args.bootstrap)

  if args.command == "eval":
    outcome = action_eval(args.params, args.out, args.min, args.max,
                          args.points)

  if args.command == "sample":
    outcome = action_sample(args.params, args.out, args.n, args.seed)

  if args.command == "analyze":
    outcome = action_analyze(args.input, args.out, args.threshold_warning,
                             args.threshold_crisis, colored=not args.nocolor,
                             paged=args.page)

  if args.command == "synth":
    outcome = action_synth(args.params, args.out, args.n, args.population,
                           args.rich_k, args.seed,
                           truncate_at_m1=args.truncate_at_m1)

  write_manifest(args.out, args.command, list(argv), outcome.inputs,
                 outcome.config, outcome.seed, outcome.outputs)
  return outcome.exit_code


def main(argv=None):
  argv = sys.argv[1:] if argv is None else list(argv)
  args = parse_eyf_args(argv)

  # Configure Logger
  configure_logging(args)

  try:
    return run_command(args, argv)
  except UsageException as e:
    lg.error(f"[main]{e}")
    return EXIT_USAGE
  except (InputParseException, OSError) as e:
    lg.error(f"[main]{e}")
    return EXIT_PARSE
  except (ModelException, FitException, EmpiricalException) as e:
    lg.error(f"[main]{e}")
    return EXIT_NUMERIC


if __name__ == '__main__':
  sys.exit(main())
