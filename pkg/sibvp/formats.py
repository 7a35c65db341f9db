"""Encoders and decoders for result trees.

A tree is a dict whose values are scalars, strings, lists or numpy arrays.
The CSV codec writes the sequence-valued entries as columns in dict order and
keeps scalars out of the table; JSON and msgpack keep the whole tree.
"""

import csv
import io
import json
import math

import msgpack
import numpy as np

from . import utils


def header_line(version, config_hash):
  return f'# sibvp {version} config={config_hash}'


def encode_csv(tree, header=None):
  columns = [k for k, v in tree.items() if _is_column(v)]
  lengths = {len(tree[k]) for k in columns}
  assert len(lengths) <= 1, {k: len(tree[k]) for k in columns}
  stream = io.StringIO()
  if header:
    stream.write(header + '\n')
  writer = csv.writer(stream, lineterminator='\n')
  writer.writerow(columns)
  for row in zip(*[tree[k] for k in columns]):
    writer.writerow([utils.fmt(_item(x)) for x in row])
  return stream.getvalue().encode('utf-8')


def decode_csv(buffer):
  lines = buffer.decode('utf-8').splitlines()
  comments = [x for x in lines if x.startswith('#')]
  rows = list(csv.reader(x for x in lines if not x.startswith('#')))
  columns, body = rows[0], rows[1:]
  tree = {}
  for index, name in enumerate(columns):
    tree[name] = _column([row[index] for row in body])
  if comments:
    tree['_header'] = comments[0]
  return tree


def encode_json(tree, header=None):
  tree = _plain(tree)
  if header:
    tree = {'_header': header, **tree}
  return (json.dumps(tree, indent=2) + '\n').encode('utf-8')


def decode_json(buffer):
  return json.loads(buffer.decode('utf-8'))


def encode_tree(tree, header=None):
  def fn(xs):
    if isinstance(xs, (list, tuple)):
      return [fn(x) for x in xs]
    elif isinstance(xs, dict):
      return {k: fn(v) for k, v in xs.items()}
    elif isinstance(xs, np.ndarray):
      xs = np.ascontiguousarray(xs)
      if xs.dtype.kind in 'OU':
        return [fn(x) for x in xs.tolist()]
      return ('_', xs.dtype.str, xs.shape, xs.tobytes())
    elif isinstance(xs, np.generic):
      return xs.item()
    else:
      return xs
  if header:
    tree = {'_header': header, **tree}
  return msgpack.packb(fn(tree))


def decode_tree(buffer):
  def fn(xs):
    if isinstance(xs, list) and len(xs) == 4 and xs[0] == '_':
      _, dtype, shape, data = xs
      return np.frombuffer(data, dtype).reshape(shape)
    elif isinstance(xs, (list, tuple)):
      return [fn(x) for x in xs]
    elif isinstance(xs, dict):
      return {k: fn(v) for k, v in xs.items()}
    else:
      return xs
  return fn(msgpack.unpackb(buffer))


def _is_column(value):
  return isinstance(value, (list, tuple, np.ndarray))


def _item(value):
  return value.item() if isinstance(value, np.generic) else value


def _column(cells):
  try:
    return np.array([int(x) for x in cells])
  except ValueError:
    pass
  try:
    return np.array([math.nan if x == 'NA' else float(x) for x in cells])
  except ValueError:
    return cells


def _plain(xs):
  if isinstance(xs, dict):
    return {k: _plain(v) for k, v in xs.items()}
  elif isinstance(xs, (list, tuple)):
    return [_plain(x) for x in xs]
  elif isinstance(xs, np.ndarray):
    return _plain(xs.tolist())
  elif isinstance(xs, np.generic):
    return _plain(xs.item())
  elif isinstance(xs, float) and not math.isfinite(xs):
    return None
  else:
    return xs


encoders = {
    'csv': encode_csv,
    'json': encode_json,
    'msgpack': encode_tree,
}


decoders = {
    'csv': decode_csv,
    'json': decode_json,
    'msgpack': decode_tree,
}
