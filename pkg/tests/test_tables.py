import pytest

from sibvp import errors
from sibvp import problem as problem_lib
from sibvp import tables
from sibvp.tables import Cell


class TestSolveCase:

  def test_simple(self):
    problem = problem_lib.troesch(2.0)
    result = tables.solve_case(problem, 1e-2, 'simple', (0.0, 0.5))
    assert result['slope0'] == pytest.approx(0.5186212, abs=1e-4)
    assert result['slope1'] == pytest.approx(
        tables.FINAL_SLOPES[2][1e-5], rel=1e-3)
    assert result['slope1_inverse'] == pytest.approx(1 / result['slope1'])
    assert result['sweeps'] is None
    first, middle = result['stations']
    assert first['u'] == pytest.approx(0.0, abs=1e-15)
    assert first['x_nearest'] == 0.0
    assert abs(middle['x_nearest'] - 0.5) <= 1e-2

  def test_multiple(self):
    problem = problem_lib.troesch(2.0)
    result = tables.solve_case(problem, 2e-2, 'multiple', (0.5,), 0.0, 1.0)
    assert result['slope0'] == pytest.approx(0.5186212, abs=1e-3)
    assert result['sweeps'] >= 1
    assert result['h_bold'] == 2e-2
    assert result['residual_norm'] < 1e-10

  def test_station_outside(self):
    with pytest.raises(errors.ConfigError):
      tables.solve_case(problem_lib.troesch(2.0), 1e-2, 'simple', (1.5,))

  def test_unknown_method(self):
    with pytest.raises(errors.ConfigError):
      tables.solve_case(problem_lib.troesch(2.0), 1e-2, 'collocation')

  @pytest.mark.slow
  @pytest.mark.parametrize('lam,rel', ((2, 1e-11), (3, 1e-10), (5, 1e-10), (8, 3e-10)))
  def test_fine_initial_slopes(self, lam, rel):
    result = tables.solve_case(problem_lib.troesch(float(lam)), 1e-5)
    reference = tables.INITIAL_SLOPES[lam][1e-5]
    assert result['slope0'] == pytest.approx(reference, rel=rel)

  @pytest.mark.slow
  def test_fine_steep_case(self):
    result = tables.solve_case(problem_lib.troesch(10.0), 1e-5, stations=(0.5,))
    assert result['slope1'] == pytest.approx(tables.FINAL_SLOPES[10][1e-5], rel=5e-11)
    middle, = result['stations']
    assert middle['u'] == pytest.approx(tables.INTERIOR_VALUES[0.5][1e-5], rel=2e-9)


class TestCells:

  def test_plan(self):
    cells = tables.plan((2.0, 3.0), (1e-3, 1e-4), (1e-2,))
    assert [c.table for c in cells].count('table1') == 4
    table3 = [c for c in cells if c.table == 'table3']
    assert all(c.lam == tables.INTERIOR_LAMBDA for c in table3)
    assert table3[0].stations == tuple(tables.INTERIOR_VALUES)
    table4 = [c for c in cells if c.table == 'table4']
    assert len(table4) == 1 and table4[0].timed
    assert table4[0].method == 'multiple'

  def test_failure_is_recorded(self, monkeypatch):
    def fail(*args, **kwargs):
      raise errors.NoRoot('nothing found')
    monkeypatch.setattr(tables, 'solve_case', fail)
    cells = [Cell('table1', 2.0, 1e-2)]
    results = tables.run_cells(cells)
    assert results[0]['status'] == 'NA'
    assert results[0]['reason'] == 'NoRoot: nothing found'
    tree = tables.table1(cells, results)
    assert tree['slope0'] == [None] and tree['rel_diff'] == [None]
    assert tables.failures(cells, results)['reason'] == [results[0]['reason']]

  def test_parallel_matches_serial(self):
    cells = [Cell('table1', 2.0, h) for h in (2e-2, 1e-2)]
    serial = tables.run_cells(cells, jobs=1)
    parallel = tables.run_cells(cells, jobs=2)
    assert [r['slope0'] for r in serial] == [r['slope0'] for r in parallel]


class TestTables:

  def test_richardson_column(self):
    hs = (2e-2, 1e-2, 5e-3)
    cells = [Cell('table1', 2.0, h) for h in hs]
    tree = tables.table1(cells, tables.run_cells(cells))
    assert tree['h'] == list(hs)
    assert tree['richardson'][0] is None and tree['richardson'][-1] is None
    assert tree['richardson'][1] > 1
    reference = tables.INITIAL_SLOPES[2][1e-5]
    errors_ = [abs(s - reference) for s in tree['slope0']]
    assert errors_[0] > errors_[1] > errors_[2]

  def test_reference_columns(self):
    cells = [Cell('table1', 2.0, 1e-4)]
    results = [{'status': 'ok', 'slope0': 0.5186212195, 'slope1': 2.4069398,
                'slope1_inverse': 1 / 2.4069398}]
    tree = tables.table1(cells, results)
    assert tree['reference'] == [tables.INITIAL_SLOPES[2][1e-4]]
    assert tree['rel_diff'][0] == pytest.approx(1.5e-10, rel=0.1)
    tree = tables.table2(cells, results)
    assert tree['reference'] == [tables.FINAL_SLOPES[2][1e-4]]

  def test_interior_stations(self):
    cell = Cell('table3', 10.0, 1e-2, stations=(0.1, 0.5))
    results = tables.run_cells([cell])
    tree = tables.table3([cell], results)
    assert tree['station'] == [0.1, 0.5]
    assert tree['reference'] == [None, None]
    assert tree['u'][1] == pytest.approx(tables.INTERIOR_VALUES[0.5][1e-5], rel=1e-2)

  @pytest.mark.slow
  def test_mesh_size(self):
    # Away from the layer the mesh holds about 0.986/h straight knots and
    # 0.990/h inverse knots, short of the published counts by 8 to 18 percent.
    hs = (1e-2, 5e-3)
    cells = [Cell('table4', tables.MESH_LAMBDA, h, 'multiple', timed=True) for h in hs]
    results = tables.run_cells(cells)
    assert [r['status'] for r in results] == ['ok', 'ok']
    tree = tables.table4(cells, results)
    for h, knots in zip(hs, tree['knots']):
      assert 1.9 <= knots * h <= 2.1
    assert 0.78 <= tree['knot_ratio'][0] <= 0.9
    assert all(s > 0 for s in tree['seconds'])
    assert all(0 < s < 1e-40 for s in tree['slope0'])
    assert tree['rel_diff'][1] < tree['rel_diff'][0] < 0.2
