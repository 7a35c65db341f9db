"""Troesch benchmark tables: initial slopes, final slopes, interior values and
mesh sizes, each next to the published reference values."""

import concurrent.futures
import dataclasses
import functools
import logging
import multiprocessing
import time

import cloudpickle
import numpy as np

from . import dual
from . import errors
from . import problem as problem_lib
from . import shooting


logger = logging.getLogger(__name__)

METHODS = ('simple', 'multiple')

# Published straight-inverse values keyed by lambda, then by step size.
INITIAL_SLOPES = {
    2: {1e-4: 0.518621219577035, 1e-5: 0.518621219272419},
    3: {1e-4: 0.255604216455332, 1e-5: 0.255604215571849},
    5: {1e-4: 4.575046196263e-02, 1e-5: 4.575046141188e-02},
    8: {1e-4: 2.587169500425e-03, 1e-5: 2.587169419777e-03},
    20: {1e-4: 1.648773647e-08, 1e-5: 1.648773188e-08},
    30: {1e-4: 7.486098431e-13, 1e-5: 7.486093844e-13},
    50: {1e-4: 1.543002448e-21, 1e-5: 1.542999906e-21},
    61: {1e-4: 2.577078525e-26, 1e-5: 2.577072299e-26},
    100: {1e-4: 2.976075557e-43, 1e-5: 2.976060927e-43},
}

FINAL_SLOPES = {
    2: {1e-4: 2.40693982969129, 1e-5: 2.4069398312315},
    3: {1e-4: 4.26622285457896, 1e-5: 4.2662228617306},
    5: {1e-4: 12.1004954359128, 1e-5: 12.1004954506293},
    8: {1e-4: 54.5798344412402, 1e-5: 54.5798344554302},
    10: {1e-4: 148.406421145524, 1e-5: 148.406421155906},
    20: {1e-4: 22026.4657494062, 1e-5: 22026.4657494068},
    30: {1e-4: 3269017.37247181, 1e-5: 3269017.3724718},
    50: {1e-4: 72004899337.3858, 1e-5: 72004899337.386},
}

INTERIOR_LAMBDA = 10.0
INTERIOR_VALUES = {
    0.1: {1e-4: 4.21119023173e-05, 1e-5: 4.21118993037e-05},
    0.2: {1e-4: 1.29964125220e-04, 1e-5: 1.29964115920e-04},
    0.3: {1e-4: 3.58978427345e-04, 1e-5: 3.58978401657e-04},
    0.4: {1e-4: 9.77902842508e-04, 1e-5: 9.77902772532e-04},
    0.5: {1e-4: 2.659020682593e-03, 1e-5: 2.65902049234e-03},
    0.999: {1e-4: 8.89035025083e-01, 1e-5: 8.88994612232e-01},
}

MESH_LAMBDA = 100.0
MESH_SLOPE = 2.976060781e-43
MESH_KNOTS = {1e-2: 240, 1e-3: 2208, 1e-4: 21753, 1e-5: 203143, 1e-6: 2081478}


@dataclasses.dataclass(frozen=True)
class Cell:

  table: str
  lam: float
  h: float
  method: str = 'simple'
  stations: tuple = ()
  timed: bool = False


def solve_case(
    problem, h, method='simple', stations=(), slope_lo=None, slope_hi=None):
  a, b = problem.domain
  for x in stations:
    if not a <= x <= b:
      raise errors.ConfigError(f'Station {x} outside the domain {problem.domain}')
  slope, solution = solve(problem, h, method, slope_lo, slope_hi)
  return summarize(slope, solution, stations)


def solve(problem, h, method='simple', slope_lo=None, slope_hi=None):
  """Returns the initial slope with the final trace or the converged mesh."""
  if method == 'simple':
    config = shooting.ShootingConfig(h=h, slope_lo=slope_lo, slope_hi=slope_hi)
    return shooting.simple_shoot(problem, config)
  elif method == 'multiple':
    init = None
    if None not in (slope_lo, slope_hi):
      init = shooting.initial_mesh(problem, h, bracket=(slope_lo, slope_hi))
    mesh = shooting.ms_solve(problem, h, init=init)
    return mesh.slope0, mesh
  else:
    raise errors.ConfigError(f"Unknown method '{method}', choose from {METHODS}")


def summarize(slope, solution, stations=()):
  if isinstance(solution, shooting.MsMesh):
    mesh = solution
    result = {
        'slope0': mesh.slope0,
        'slope1': mesh.slope1,
        'slope1_inverse': mesh.inverse_slope1,
        'knots': len(mesh),
        'sweeps': mesh.sweeps,
        'h_bold': mesh.h_bold,
        'residual_norm': mesh.residual_norm,
    }
    xs, us, interp = mesh.x, mesh.u, mesh.interpolate
  else:
    trace = solution
    final = trace.final
    result = {
        'slope0': float(slope),
        'slope1': dual.real(final.u_prime),
        'slope1_inverse': dual.real(final.x_prime),
        'knots': len(trace),
        'sweeps': None,
    }
    xs, us, interp = trace.xs, trace.us, trace.interpolate
  report = []
  for x in stations:
    nearest = int(np.argmin(np.abs(xs - x)))
    report.append({
        'x': float(x), 'u': float(interp(x)),
        'x_nearest': float(xs[nearest]), 'u_nearest': float(us[nearest])})
  result['stations'] = report
  return result


def run_cell(cell):
  problem = problem_lib.troesch(cell.lam)
  start = time.perf_counter()
  try:
    result = solve_case(problem, cell.h, cell.method, cell.stations)
  except errors.SolverError as e:
    logger.warning('Cell %s failed: %s', cell, e)
    return {'status': 'NA', 'reason': f'{type(e).__name__}: {e}'}
  if cell.timed:
    result['seconds'] = time.perf_counter() - start
  result['status'] = 'ok'
  logger.info('Cell %s done: slope0=%.15e', cell, result['slope0'])
  return result


def run_cells(cells, jobs=1):
  if jobs <= 1:
    return [run_cell(cell) for cell in cells]
  payloads = [cloudpickle.dumps(functools.partial(run_cell, c)) for c in cells]
  context = multiprocessing.get_context('spawn')
  with concurrent.futures.ProcessPoolExecutor(jobs, mp_context=context) as pool:
    return list(pool.map(_call, payloads))


def plan(lams, hs, mesh_hs, method='simple'):
  stations = tuple(INTERIOR_VALUES)
  cells = []
  for lam in lams:
    for h in hs:
      cells.append(Cell('table1', lam, h, method))
  for h in hs:
    cells.append(Cell('table3', INTERIOR_LAMBDA, h, method, stations))
  for h in mesh_hs:
    cells.append(Cell('table4', MESH_LAMBDA, h, 'multiple', timed=True))
  return cells


def table1(cells, results):
  rows = [(c, r) for c, r in zip(cells, results) if c.table == 'table1']
  tree = _columns('lambda', 'h', 'slope0', 'reference', 'rel_diff', 'richardson')
  for lam in sorted({c.lam for c, _ in rows}):
    group = sorted([(c, r) for c, r in rows if c.lam == lam], key=lambda x: -x[0].h)
    slopes = [r.get('slope0') for _, r in group]
    for k, (cell, result) in enumerate(group):
      reference = INITIAL_SLOPES.get(int(lam), {}).get(cell.h)
      ratio = None
      if 0 < k < len(group) - 1 and None not in slopes[k - 1: k + 2]:
        ratio = _ratio(slopes[k - 1], slopes[k], slopes[k + 1])
      _append(
          tree, lam, cell.h, result.get('slope0'), reference,
          _rel(result.get('slope0'), reference), ratio)
  return tree


def table2(cells, results):
  tree = _columns('lambda', 'h', 'slope1', 'slope1_inverse', 'reference', 'rel_diff')
  for cell, result in zip(cells, results):
    if cell.table != 'table1':
      continue
    reference = FINAL_SLOPES.get(int(cell.lam), {}).get(cell.h)
    _append(
        tree, cell.lam, cell.h, result.get('slope1'),
        result.get('slope1_inverse'), reference,
        _rel(result.get('slope1'), reference))
  return tree


def table3(cells, results):
  tree = _columns(
      'station', 'h', 'u', 'reference', 'rel_diff', 'x_nearest', 'u_nearest')
  for cell, result in zip(cells, results):
    if cell.table != 'table3':
      continue
    stations = {s['x']: s for s in result.get('stations', [])}
    for x in cell.stations:
      station = stations.get(x, {})
      reference = INTERIOR_VALUES[x].get(cell.h)
      _append(
          tree, x, cell.h, station.get('u'), reference,
          _rel(station.get('u'), reference), station.get('x_nearest'),
          station.get('u_nearest'))
  return tree


def table4(cells, results):
  tree = _columns(
      'h', 'knots', 'seconds', 'slope0', 'rel_diff', 'reference_knots',
      'knot_ratio')
  for cell, result in zip(cells, results):
    if cell.table != 'table4':
      continue
    knots, reference = result.get('knots'), MESH_KNOTS.get(cell.h)
    ratio = knots / reference if None not in (knots, reference) else None
    _append(
        tree, cell.h, knots, result.get('seconds'), result.get('slope0'),
        _rel(result.get('slope0'), MESH_SLOPE), reference, ratio)
  return tree


def failures(cells, results):
  tree = _columns('table', 'lambda', 'h', 'reason')
  for cell, result in zip(cells, results):
    if result['status'] != 'ok':
      _append(tree, cell.table, cell.lam, cell.h, result['reason'])
  return tree


def _call(payload):
  return cloudpickle.loads(payload)()


def _columns(*names):
  return {name: [] for name in names}


def _append(tree, *values):
  assert len(values) == len(tree), (len(values), list(tree))
  for column, value in zip(tree.values(), values):
    column.append(value)


def _rel(value, reference):
  if value is None or reference is None:
    return None
  return abs(value - reference) / abs(reference)


def _ratio(a, b, c):
  if b == c:
    return None
  return abs(a - b) / abs(b - c)
