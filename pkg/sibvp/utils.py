import hashlib
import json
import math

import numpy as np

from . import errors


def fmt(value):
  if value is None:
    return 'NA'
  if isinstance(value, str):
    return value
  if isinstance(value, (bool, int, np.integer)):
    return str(int(value))
  value = float(value)
  if not math.isfinite(value):
    return 'nan' if math.isnan(value) else ('inf' if value > 0 else '-inf')
  return f'{value:.14e}'


def config_hash(config):
  text = json.dumps(config, sort_keys=True, default=str)
  return hashlib.sha256(text.encode('utf-8')).hexdigest()[:12]


def parse_floats(text):
  if isinstance(text, (list, tuple)):
    return [float(x) for x in text]
  try:
    return [float(x) for x in str(text).split(',') if x.strip()]
  except ValueError as e:
    raise errors.ConfigError(f'Expected comma-separated numbers: {text}') from e
