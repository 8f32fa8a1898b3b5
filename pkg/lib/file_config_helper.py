#  Copyright 2024-2025 EYF Income Toolkit contributors
#  This file is part of EYF Income Toolkit which is released under MIT License
#  See file LICENSE for full license details
import hashlib
import json
import logging
import os

import yaml
from beartype import beartype

from lib._common import VERSION, InputParseException
from lib._typing import Dict, List, Optional
from lib.fit_helper import FitConfig, FitException

lg = logging.getLogger('eyf.config')

MANIFEST_NAME = "manifest.json"
HASH_CHUNK = 1 << 20


def create_and_get_output_folder(folder):
  if not os.path.exists(folder):
    try:
      os.makedirs(folder)
    except OSError as e:
      lg.error(f"[create_and_get_output_folder]cannot create '{folder}' - {e}")
      return None
  elif not os.path.isdir(folder):
    lg.error(f"[create_and_get_output_folder]'{folder}' is not a folder")
    return None
  return folder


@beartype
def load_fit_config(path: str, overrides: Optional[Dict] = None) -> FitConfig:
  """
    FitConfig from a YAML settings file (see fit_settings.yml.sample).
    overrides (e.g. from command line flags) win over file values.
  """
  if not os.path.isfile(path):
    raise InputParseException("settings file not found", path)
  with open(path, "r", encoding="utf-8") as f:
    try:
      content = yaml.safe_load(f)
    except yaml.YAMLError as e:
      raise InputParseException(f"malformed YAML ({e})", path)
  if content is None:
    content = {}
  if not isinstance(content, dict):
    raise InputParseException("settings must be a YAML mapping", path)

  known = set(FitConfig.__dataclass_fields__)
  unknown = sorted(set(content) - known)
  if len(unknown) > 0:
    raise InputParseException(f"unknown setting(s): {', '.join(unknown)}", path)
  content.update(overrides or {})
  try:
    return FitConfig(**content)
  except (FitException, TypeError, ValueError, IndexError) as e:
    raise InputParseException(f"invalid settings ({e})", path)


def file_sha256(path):
  digest = hashlib.sha256()
  with open(path, "rb") as f:
    for chunk in iter(lambda: f.read(HASH_CHUNK), b""):
      digest.update(chunk)
  return digest.hexdigest()


@beartype
def write_manifest(
        folder: str,
        command: str,
        argv: List[str],
        inputs: List[str],
        config: Dict,
        seed: Optional[int],
        outputs: List[str]) -> str:
  """
    Record everything that determines a run. No timestamp: running the same
    command twice gives the same manifest.
  """
  manifest = {
      "command": command,
      "argv": list(argv),
      "inputs": [{"path": p, "sha256": file_sha256(p)} for p in inputs],
      "config": config,
      "seed": seed,
      "version": VERSION,
      "outputs": sorted(os.path.basename(p) for p in outputs),
  }
  path = os.path.join(folder, MANIFEST_NAME)
  with open(path, "w", encoding="utf-8") as f:
    json.dump(manifest, f, indent=2, sort_keys=True)
    f.write("\n")
  lg.debug(f"[write_manifest]{path}")
  return path


@beartype
def load_manifest(path: str) -> Dict:
  """ Read a manifest and check that its inputs did not change since """
  if not os.path.isfile(path):
    raise InputParseException("manifest not found", path)
  try:
    with open(path, "r", encoding="utf-8") as f:
      manifest = json.load(f)
  except json.JSONDecodeError as e:
    raise InputParseException(f"malformed manifest ({e})", path)
  if not isinstance(manifest, dict) or not isinstance(manifest.get("argv"), list):
    raise InputParseException("manifest has no argv list", path)

  if manifest.get("version") != VERSION:
    lg.warning(f"[load_manifest]manifest written by version"
               f" {manifest.get('version')}, running {VERSION}")
  for entry in manifest.get("inputs", []):
    if not os.path.isfile(entry["path"]):
      raise InputParseException("input of the manifest is missing",
                                entry["path"])
    if file_sha256(entry["path"]) != entry["sha256"]:
      raise InputParseException("input changed since the manifest was written",
                                entry["path"])
  return manifest
