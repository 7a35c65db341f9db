import argparse
import dataclasses
import json
import logging
import pathlib
import sys

import numpy as np

from . import __version__
from . import bounds
from . import dual
from . import errors
from . import formats
from . import ivp
from . import problem as problem_lib
from . import shooting
from . import tables
from . import utils


logger = logging.getLogger(__name__)

COMMANDS = ('solve', 'march', 'bounds', 'tables')
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
PARAMETERS = {'troesch': 'lam', 'constant': 'c', 'quadratic': 'c'}
ORACLE_SAMPLES = 50


@dataclasses.dataclass(frozen=True)
class RunConfig:

  command: str
  problem: str = 'troesch'
  lam: float = 1.0
  h: float = 1e-4
  h_bold: float = None
  method: str = 'simple'
  stations: tuple = ()
  epsilon: float = bounds.DEFAULT_EPSILON
  out: str = None
  mesh_out: str = None
  format: str = 'json'
  jobs: int = 1
  slope: float = None
  sensitivity: bool = False
  slope_lo: float = None
  slope_hi: float = None
  lams: tuple = (2.0, 3.0, 5.0, 8.0, 10.0, 20.0, 30.0, 50.0)
  hs: tuple = (1e-3, 1e-4)
  mesh_hs: tuple = (1e-2, 1e-3, 1e-4)

  def __post_init__(self):
    if self.command not in COMMANDS:
      raise errors.ConfigError(f"Unknown command '{self.command}'")
    for h in (self.h, self.h_bold, *self.hs, *self.mesh_hs):
      if h is not None and not 0 < h < 1:
        raise errors.ConfigError(f'Step size must lie in (0, 1): {h}')
    for lam in (self.lam, *self.lams):
      if not lam > 0:
        raise errors.ConfigError(f'Lambda must be positive: {lam}')
    if self.method not in tables.METHODS:
      raise errors.ConfigError(
          f"Unknown method '{self.method}', choose from {tables.METHODS}")
    if self.format not in formats.encoders:
      raise errors.ConfigError(
          f"Unknown format '{self.format}', choose from {sorted(formats.encoders)}")
    if not 0 < self.epsilon < 1 / 6:
      raise errors.ConfigError(f'Epsilon must lie in (0, 1/6): {self.epsilon}')
    if self.jobs < 1:
      raise errors.ConfigError(f'Need at least one job: {self.jobs}')
    if self.mesh_out is not None and self.method != 'multiple':
      raise errors.ConfigError('Only --method multiple writes a mesh')

  @property
  def step(self):
    if self.method == 'multiple' and self.h_bold is not None:
      return self.h_bold
    return self.h

  def make_problem(self):
    name = PARAMETERS.get(self.problem)
    params = {name: self.lam} if name else {}
    problem = problem_lib.make_problem(self.problem, **params)
    a, b = problem.domain
    for x in self.stations:
      if not a <= x <= b:
        raise errors.ConfigError(f'Station {x} outside the domain {problem.domain}')
    return problem

  def header(self):
    config = dataclasses.asdict(self)
    config.pop('out')
    config.pop('mesh_out')
    return formats.header_line(__version__, utils.config_hash(config))


def cmd_solve(cfg):
  problem = cfg.make_problem()
  slope, solution = tables.solve(
      problem, cfg.step, cfg.method, cfg.slope_lo, cfg.slope_hi)
  result = tables.summarize(slope, solution, cfg.stations)
  if cfg.mesh_out is not None:
    data = formats.encode_csv(solution.tree(), cfg.header())
    _write_bytes(cfg.mesh_out, data)
  tree = {
      'problem': cfg.problem, 'lambda': cfg.lam, 'h': cfg.step,
      'method': cfg.method, **result}
  if cfg.format == 'csv':
    tree = {
        key: [s[key] for s in result['stations']]
        for key in ('x', 'u', 'x_nearest', 'u_nearest')}
  _write(cfg, tree)
  return EXIT_OK


def cmd_march(cfg):
  problem = cfg.make_problem()
  if cfg.slope is None:
    raise errors.ConfigError('The march command needs --slope')
  stop = ivp.StopRule(problem.domain[1])
  if cfg.sensitivity:
    trace = ivp.si_march_dual(
        problem, problem.u_left, dual.seed(cfg.slope), cfg.h, stop)
  else:
    trace = ivp.si_march(problem, problem.u_left, cfg.slope, cfg.h, stop)
  tree = trace.tree()
  if cfg.sensitivity:
    tree['du_dslope'] = trace.ders('u')
    tree['dx_dslope'] = trace.ders('x')
    tree['duprime_dslope'] = trace.ders('u_prime')
  _write(cfg, tree)
  return EXIT_OK


def cmd_bounds(cfg):
  problem = cfg.make_problem()
  h = cfg.h
  if cfg.slope is None:
    config = shooting.ShootingConfig(h=h, slope_lo=cfg.slope_lo, slope_hi=cfg.slope_hi)
    slope, _ = shooting.simple_shoot(problem, config)
  else:
    slope = cfg.slope
  constants = bounds.compute_constants(problem, slope, cfg.epsilon)
  trace = ivp.si_march(
      problem, problem.u_left, slope, h, ivp.StopRule(problem.domain[1]))
  i_star = trace.i_star
  mu = None
  if i_star is not None:
    u_star = trace.us[i_star]
    mu = bounds.compute_mu(problem, u_star, u_star + bounds.MU_SPAN).value
  report = constants.report(h, mu)
  report['slope0'] = slope
  report['hypotheses'] = bounds.check_hypotheses(
      problem, problem.u_left, max(problem.u_right, constants.M_star))
  report['straight_phase'] = _straight_errors(problem, constants, trace, slope, h)
  rows = None
  try:
    inverse = bounds.inverse_phase_bound(problem, constants, trace, h, mu)
  except errors.PreconditionFailed as e:
    report['inverse_phase'] = {'status': 'precondition failed', 'reason': str(e)}
  else:
    exact, _ = bounds.inverse_solution(problem, slope, inverse.u)
    observed = np.abs(inverse.x - exact)
    report['inverse_phase'] = {
        'status': 'ok', 'i_star': inverse.i_star,
        'max_x_error_bound': float(inverse.x_err.max()),
        'max_observed_x_error': float(observed.max()),
        'overestimate': _overestimate(inverse.x_err.max(), observed.max()),
    }
    rows = {**inverse.tree(), 'observed_x_error': observed}
  if cfg.format == 'csv':
    if rows is None:
      raise errors.PreconditionFailed(
          'No per-knot bounds to tabulate: ' + report['inverse_phase']['reason'])
    rows.pop('i_star')
    _write(cfg, rows)
  else:
    _write(cfg, report)
  return EXIT_OK


def cmd_tables(cfg):
  directory = pathlib.Path(cfg.out or '.')
  directory.mkdir(parents=True, exist_ok=True)
  cells = tables.plan(cfg.lams, cfg.hs, cfg.mesh_hs, cfg.method)
  results = tables.run_cells(cells, cfg.jobs)
  header = cfg.header()
  outputs = {
      'table1.csv': tables.table1(cells, results),
      'table2.csv': tables.table2(cells, results),
      'table3.csv': tables.table3(cells, results),
      'table4.csv': tables.table4(cells, results),
  }
  missing = tables.failures(cells, results)
  if missing['reason']:
    outputs['failures.csv'] = missing
  for name, tree in outputs.items():
    (directory / name).write_bytes(formats.encode_csv(tree, header))
    print(f'Wrote {directory / name}')
  return EXIT_OK


commands = {
    'solve': cmd_solve,
    'march': cmd_march,
    'bounds': cmd_bounds,
    'tables': cmd_tables,
}


def parser():
  common = argparse.ArgumentParser(add_help=False)
  common.add_argument('--problem', default='troesch', choices=sorted(problem_lib.problems))
  common.add_argument('--lambda', dest='lam', type=float, default=1.0)
  common.add_argument('--h', type=float, default=1e-4)
  common.add_argument('--h-bold', type=float, default=None)
  common.add_argument('--method', default='simple', choices=tables.METHODS)
  common.add_argument('--stations', type=utils.parse_floats, default=())
  common.add_argument('--epsilon', type=float, default=bounds.DEFAULT_EPSILON)
  common.add_argument('--out', default=None)
  common.add_argument('--format', default='json', choices=sorted(formats.encoders))
  common.add_argument('--jobs', type=int, default=1)
  common.add_argument('--slope-lo', type=float, default=None)
  common.add_argument('--slope-hi', type=float, default=None)
  common.add_argument('--log-level', default='WARNING')
  main_parser = argparse.ArgumentParser(
      prog='sibvp', description='Straight-inverse solver for stiff BVPs.')
  main_parser.add_argument('--version', action='version', version=__version__)
  subparsers = main_parser.add_subparsers(dest='command', required=True)
  solve = subparsers.add_parser('solve', parents=[common], help='Solve the BVP.')
  solve.add_argument('--mesh-out', default=None)
  march = subparsers.add_parser(
      'march', parents=[common], help='March the IVP from one slope.')
  march.add_argument('--slope', type=float, required=True)
  march.add_argument('--sensitivity', action='store_true')
  bound = subparsers.add_parser(
      'bounds', parents=[common], help='A priori error bounds.')
  bound.add_argument('--slope', type=float, default=None)
  table = subparsers.add_parser(
      'tables', parents=[common], help='Reproduce the benchmark tables.')
  table.add_argument('--lambdas', dest='lams', type=utils.parse_floats)
  table.add_argument('--hs', type=utils.parse_floats)
  table.add_argument('--mesh-hs', type=utils.parse_floats)
  return main_parser


def main(argv=None):
  args = vars(parser().parse_args(argv))
  logging.basicConfig(
      level=args.pop('log_level').upper(),
      format='%(levelname)s %(name)s: %(message)s')
  args = {k: v for k, v in args.items() if v is not None}
  for key in ('stations', 'lams', 'hs', 'mesh_hs'):
    if key in args:
      args[key] = tuple(args[key])
  try:
    cfg = RunConfig(**args)
    return commands[cfg.command](cfg)
  except errors.ConfigError as e:
    _report(e)
    return EXIT_CONFIG
  except errors.SolverError as e:
    _report(e)
    return EXIT_SOLVER


def _write(cfg, tree):
  data = formats.encoders[cfg.format](tree, cfg.header())
  if cfg.out is None:
    if cfg.format == 'msgpack':
      raise errors.ConfigError('The msgpack format needs --out')
    sys.stdout.write(data.decode('utf-8'))
    return
  _write_bytes(cfg.out, data)


def _write_bytes(path, data):
  path = pathlib.Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  path.write_bytes(data)
  logger.info('Wrote %s', path)


def _report(error):
  print(json.dumps({'error': type(error).__name__, 'message': str(error)}))


def _straight_errors(problem, constants, trace, slope, h):
  last = trace.i_star if trace.i_star is not None else len(trace) - 1
  indices = np.unique(np.linspace(0, last, min(ORACLE_SAMPLES, last + 1)).astype(int))
  exact, _ = bounds.oracle_u(problem, slope, trace.xs[indices])
  observed = float(np.abs(trace.us[indices] - exact).max())
  bound = bounds.straight_phase_bound(constants, h)
  return {
      'bound': bound, 'max_observed_error': observed,
      'overestimate': _overestimate(bound, observed)}


def _overestimate(bound, observed):
  return float(bound / observed) if observed > 0 else None
