import json
import math
import pathlib

import pytest

from sibvp import cli
from sibvp import errors
from sibvp import formats

SLOPE = '0.518621219269'


class TestSolve:

  def test_constant_problem(self, tmpdir):
    path = pathlib.Path(tmpdir) / 'solve.json'
    code = cli.main([
        'solve', '--problem', 'constant', '--lambda', '4', '--h', '1e-2',
        '--stations', '0.5', '--out', str(path)])
    assert code == 0
    result = json.loads(path.read_text())
    assert result['_header'].startswith('# sibvp ')
    assert result['problem'] == 'constant'
    assert result['slope0'] == pytest.approx(2 / math.sinh(2.0), abs=1e-4)
    station = result['stations'][0]
    assert station['u'] == pytest.approx(math.sinh(1.0) / math.sinh(2.0), abs=1e-4)

  def test_deterministic(self, tmpdir):
    outputs = []
    for name in ('first.json', 'second.json'):
      path = pathlib.Path(tmpdir) / name
      assert cli.main([
          'solve', '--lambda', '2', '--h', '1e-2', '--out', str(path)]) == 0
      outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]

  def test_stations_as_csv(self, tmpdir):
    path = pathlib.Path(tmpdir) / 'solve.csv'
    assert cli.main([
        'solve', '--lambda', '2', '--h', '1e-2', '--stations', '0.25,0.5',
        '--format', 'csv', '--out', str(path)]) == 0
    tree = formats.decode_csv(path.read_bytes())
    assert list(tree['x']) == [0.25, 0.5]
    assert list(tree)[:4] == ['x', 'u', 'x_nearest', 'u_nearest']

  def test_multiple_writes_mesh(self, tmpdir):
    summary = pathlib.Path(tmpdir) / 'solve.json'
    mesh_path = pathlib.Path(tmpdir) / 'mesh.csv'
    assert cli.main([
        'solve', '--lambda', '2', '--method', 'multiple', '--h-bold', '2e-2',
        '--out', str(summary), '--mesh-out', str(mesh_path)]) == 0
    result = json.loads(summary.read_text())
    assert result['h_bold'] == 2e-2 and result['sweeps'] >= 1
    assert 0 <= result['residual_norm'] < 1e-10
    lines = mesh_path.read_text().splitlines()
    assert lines[0] == result['_header']
    assert lines[1].startswith('i,x,u,u_prime,regime')
    mesh = formats.decode_csv(mesh_path.read_bytes())
    assert len(mesh['x']) == result['knots']
    assert (mesh['x'][0], mesh['x'][-1], mesh['u'][-1]) == (0.0, 1.0, 1.0)
    assert mesh['u_prime'][0] == pytest.approx(result['slope0'], rel=1e-14)
    assert set(mesh['regime']) == {'straight', 'inverse'}

  def test_mesh_needs_multiple(self, capsys):
    code = cli.main(['solve', '--h', '1e-2', '--mesh-out', 'mesh.csv'])
    assert code == cli.EXIT_CONFIG
    assert json.loads(capsys.readouterr().out)['error'] == 'ConfigError'


class TestMarch:

  def test_csv_columns(self, tmpdir):
    path = pathlib.Path(tmpdir) / 'march.csv'
    assert cli.main([
        'march', '--lambda', '2', '--h', '0.05', '--slope', SLOPE,
        '--sensitivity', '--format', 'csv', '--out', str(path)]) == 0
    lines = path.read_text().splitlines()
    assert lines[0].startswith('# sibvp ')
    assert lines[1].startswith('i,regime,x,u,u_prime,x_prime')
    assert 'du_dslope' in lines[1].split(',')
    tree = formats.decode_csv(path.read_bytes())
    assert tree['x'][0] == 0.0 and tree['x'][-1] == 1.0
    assert tree['du_dslope'][0] == 0.0

  def test_msgpack_needs_path(self, capsys):
    code = cli.main([
        'march', '--lambda', '2', '--h', '0.05', '--slope', SLOPE,
        '--format', 'msgpack'])
    assert code == cli.EXIT_CONFIG
    assert json.loads(capsys.readouterr().out)['error'] == 'ConfigError'


class TestBounds:

  def test_report(self, capsys):
    code = cli.main(['bounds', '--lambda', '2', '--h', '1e-3', '--slope', SLOPE])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report['M_star'] == pytest.approx(0.5654221730, rel=1e-6)
    assert report['slope0'] == float(SLOPE)
    assert not report['h_restrictions']['second']
    assert report['inverse_phase']['status'] == 'precondition failed'
    straight = report['straight_phase']
    assert straight['max_observed_error'] <= straight['bound']


class TestErrors:

  def test_invalid_step(self, capsys):
    assert cli.main(['solve', '--h', '2']) == cli.EXIT_CONFIG
    assert json.loads(capsys.readouterr().out)['error'] == 'ConfigError'

  def test_bad_bracket(self, capsys):
    code = cli.main([
        'solve', '--lambda', '2', '--h', '1e-2',
        '--slope-lo', '0.6', '--slope-hi', '1'])
    assert code == cli.EXIT_SOLVER
    assert json.loads(capsys.readouterr().out)['error'] == 'BadBracket'

  def test_config_validation(self):
    with pytest.raises(errors.ConfigError):
      cli.RunConfig('solve', epsilon=0.2)
    with pytest.raises(errors.ConfigError):
      cli.RunConfig('solve', lams=(2.0, -1.0))
    with pytest.raises(errors.ConfigError):
      cli.RunConfig('solve', stations=(2.0,)).make_problem()


class TestTables:

  def test_writes_tables(self, tmpdir):
    directory = pathlib.Path(tmpdir) / 'tables'
    code = cli.main([
        'tables', '--lambdas', '2', '--hs', '2e-2,1e-2', '--mesh-hs', '5e-2',
        '--out', str(directory)])
    assert code == 0
    for name in ('table1.csv', 'table2.csv', 'table3.csv', 'table4.csv'):
      tree = formats.decode_csv((directory / name).read_bytes())
      assert tree['_header'].startswith('# sibvp ')
    table1 = formats.decode_csv((directory / 'table1.csv').read_bytes())
    assert list(table1['h']) == [2e-2, 1e-2]
    assert 'lambda' in table1 and 'richardson' in table1
