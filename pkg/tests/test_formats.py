import json
import math

import numpy as np
import pytest

from sibvp import formats
from sibvp import utils


class TestCsv:

  def test_columns_and_header(self):
    tree = {
        'x': np.array([0.0, 0.5]), 'u': [0.25, 1.0],
        'i': np.array([0, 7]), 'note': 'scalar'}
    data = formats.encode_csv(tree, formats.header_line('0.1.0', 'abc'))
    lines = data.decode('utf-8').splitlines()
    assert lines[0] == '# sibvp 0.1.0 config=abc'
    assert lines[1] == 'x,u,i'
    assert lines[2] == '0.00000000000000e+00,2.50000000000000e-01,0'
    decoded = formats.decode_csv(data)
    assert decoded['_header'] == lines[0]
    assert np.array_equal(decoded['x'], tree['x'])
    assert decoded['i'].dtype.kind == 'i'
    assert 'note' not in decoded

  def test_missing_values(self):
    tree = {'lambda': [2.0, 3.0], 'slope0': [0.5, None], 'status': ['ok', 'NA']}
    decoded = formats.decode_csv(formats.encode_csv(tree))
    assert decoded['status'] == ['ok', 'NA']
    assert decoded['slope0'][0] == 0.5
    assert math.isnan(decoded['slope0'][1])

  def test_ragged_columns(self):
    with pytest.raises(AssertionError):
      formats.encode_csv({'a': [1, 2], 'b': [1]})


class TestJson:

  def test_plain_values(self):
    tree = {
        'slope': np.float64(0.5), 'count': np.int64(3),
        'values': np.array([1.0, np.nan]), 'nested': {'bound': math.inf}}
    data = formats.encode_json(tree, header='# sibvp 0.1.0 config=abc')
    decoded = json.loads(data)
    assert list(decoded)[0] == '_header'
    assert decoded['slope'] == 0.5 and decoded['count'] == 3
    assert decoded['values'] == [1.0, None]
    assert decoded['nested'] == {'bound': None}
    assert formats.decode_json(data) == decoded


class TestTree:

  def test_arrays(self):
    tree = {
        'x': np.linspace(0, 1, 5),
        'regime': ['straight', 'inverse'],
        'nested': [{'a': np.arange(3, dtype=np.int32)}, 'hello'],
        'count': np.int64(4),
    }
    decoded = formats.decode_tree(formats.encode_tree(tree, header='h'))
    assert decoded.pop('_header') == 'h'
    assert tree_equals(decoded, {**tree, 'count': 4})
    assert decoded['nested'][0]['a'].dtype == np.int32

  def test_registries(self):
    assert set(formats.encoders) == set(formats.decoders) == {'csv', 'json', 'msgpack'}


class TestFmt:

  @pytest.mark.parametrize('value,expected', (
      (None, 'NA'), ('ok', 'ok'), (True, '1'), (np.int64(12), '12'),
      (1.0, '1.00000000000000e+00'), (math.nan, 'nan'), (-math.inf, '-inf'),
  ))
  def test_values(self, value, expected):
    assert utils.fmt(value) == expected

  def test_config_hash(self):
    first = utils.config_hash({'h': 1e-3, 'lam': 2.0})
    assert first == utils.config_hash({'lam': 2.0, 'h': 1e-3})
    assert first != utils.config_hash({'lam': 3.0, 'h': 1e-3})
    assert len(first) == 12

  def test_parse_floats(self):
    assert utils.parse_floats('1e-3, 2') == [1e-3, 2.0]
    with pytest.raises(ValueError):
      utils.parse_floats('1,x')


def tree_equals(xs, ys):
  assert type(xs) == type(ys), (type(xs), type(ys))
  if isinstance(xs, (list, tuple)):
    assert len(xs) == len(ys)
    return all(tree_equals(x, y) for x, y in zip(xs, ys))
  elif isinstance(xs, dict):
    assert xs.keys() == ys.keys()
    return all(tree_equals(xs[k], ys[k]) for k in xs.keys())
  elif isinstance(xs, np.ndarray):
    return xs.shape == ys.shape and (xs == ys).all()
  else:
    return xs == ys
