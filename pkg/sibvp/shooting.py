import dataclasses
import logging
import math

import numpy as np
from scipy import interpolate
from scipy import linalg

from . import dual
from . import errors
from . import ivp
from . import stepfn
from .dual import Dual2


logger = logging.getLogger(__name__)

MAX_HALVINGS = 4
RESIDUAL_FLOOR = 1e-13
DIVERGENCE_GROWTH = 10.0
SPACING_RTOL = 1e-9


@dataclasses.dataclass(frozen=True)
class ShootingConfig:

  h: float
  slope_lo: float = None
  slope_hi: float = None
  residual_tol: float = 1e-13
  max_bisections: int = 400
  u_cap: float = None

  def __post_init__(self):
    if not 0 < self.h < 1:
      raise errors.ConfigError(f'Step size must lie in (0, 1): {self.h}')
    if not self.residual_tol > 0:
      raise errors.ConfigError(f'Residual tolerance: {self.residual_tol}')
    if None not in (self.slope_lo, self.slope_hi):
      if not self.slope_lo < self.slope_hi:
        raise errors.ConfigError(
            f'Empty bracket [{self.slope_lo}, {self.slope_hi}]')

  def bracket(self, problem):
    lo = problem.bracket[0] if self.slope_lo is None else self.slope_lo
    hi = problem.bracket[1] if self.slope_hi is None else self.slope_hi
    if not lo < hi:
      raise errors.ConfigError(f'Empty bracket [{lo}, {hi}]')
    return float(lo), float(hi)


def simple_shoot(problem, cfg):
  lo, hi = cfg.bracket(problem)
  stop = ivp.StopRule(problem.domain[1], u_cap=cfg.u_cap)

  def trial(slope):
    try:
      trace = ivp.si_march(problem, problem.u_left, slope, cfg.h, stop)
    except errors.BlowUp as e:
      side = _blow_up_side(e.knot, problem)
      trace, miss = _crossing(e.trace, problem, side)
      logger.debug(
          'Slope %.17g blows up (side %d, miss %.3e)', slope, side, miss)
      return side, miss, trace
    mismatch = trace.final.u - problem.u_right
    logger.debug('Slope %.17g misses by %.3e', slope, mismatch)
    return (1 if mismatch > 0 else -1), abs(mismatch), trace

  side_lo, miss_lo, trace_lo = trial(lo)
  if miss_lo <= cfg.residual_tol:
    return lo, trace_lo
  side_hi, miss_hi, trace_hi = trial(hi)
  if miss_hi <= cfg.residual_tol:
    return hi, trace_hi
  if side_lo == side_hi:
    raise errors.BadBracket(
        f'Both slopes {lo} and {hi} '
        f'{"overshoot" if side_lo > 0 else "undershoot"} u({problem.domain[1]})'
        f' = {problem.u_right}')
  for _ in range(cfg.max_bisections):
    mid = 0.5 * (lo + hi)
    if not lo < mid < hi:
      break
    side, miss, trace = trial(mid)
    if miss <= cfg.residual_tol:
      return mid, trace
    if side == side_lo:
      lo, miss_lo, trace_lo = mid, miss, trace
    else:
      hi, miss_hi, trace_hi = mid, miss, trace
    if hi - lo <= 2 * np.spacing(max(abs(lo), abs(hi))):
      break
  logger.info(
      'Bisection stopped at bracket [%.17g, %.17g] with misses %.3e, %.3e',
      lo, hi, miss_lo, miss_hi)
  if miss_lo <= miss_hi:
    return lo, trace_lo
  return hi, trace_hi


def _blow_up_side(knot, problem):
  # Overflow can stop the march below the cap; fall back to the slope sign.
  u = dual.real(knot.u)
  if u > problem.u_right:
    return 1
  if u < min(problem.u_left, problem.u_right):
    return -1
  return 1 if dual.real(knot.u_prime) > 0 else -1


def _crossing(trace, problem, side):
  # Cut an overshooting trace at its first knot past u_right. The miss is the
  # larger of its distances to the target in u and in x.
  target = problem.u_right
  if (problem.u_left - target) * side >= 0:
    return trace, math.inf
  for i, knot in enumerate(trace):
    u = dual.real(knot.u)
    if i and (u - target) * side >= 0:
      miss = max(abs(u - target), abs(dual.real(knot.to_end)))
      return ivp.IvpTrace(trace.knots[:i + 1], trace.h, trace.stop_reason), miss
  return trace, math.inf


class MsMesh:
  """Knots of a multiple shooting mesh.

  Positions are kept as offsets from the right end, which stay distinct where
  a steep layer packs many knots within rounding distance of the end. The
  absolute positions ``x`` are derived from them unless given explicitly.
  """

  def __init__(
      self, du, u, x, h_bold, iteration=0, last_step=None,
      residual_norm=None, sweeps=None, offset=None):
    self.du = np.array(du, float)
    self.u = np.array(u, float)
    x = np.array(x, float)
    self.end = float(x[-1])
    if offset is None:
      self.x, self.offset = x, x - self.end
    else:
      self.offset = np.array(offset, float)
      self.x = self.end + self.offset
    assert self.du.shape == self.u.shape == self.offset.shape, (
        self.du.shape, self.u.shape, self.offset.shape)
    assert len(self.x) >= 2, len(self.x)
    assert self.offset[-1] == 0, self.offset[-1]
    assert np.all(np.diff(self.offset) > 0), 'mesh x must be strictly increasing'
    self.h_bold = float(h_bold)
    self.iteration = iteration
    self.last_step = last_step
    self.residual_norm = residual_norm
    self.sweeps = sweeps

  def __len__(self):
    return len(self.x)

  def __repr__(self):
    return (
        f'MsMesh(knots={len(self)}, h_bold={self.h_bold}, '
        f'iteration={self.iteration})')

  @property
  def straight(self):
    return np.abs(self.du) <= 1

  @property
  def regimes(self):
    return [ivp.STRAIGHT if s else ivp.INVERSE for s in self.straight]

  @property
  def slope0(self):
    return float(self.du[0])

  @property
  def slope1(self):
    return float(self.du[-1])

  @property
  def inverse_slope1(self):
    return 1.0 / self.slope1

  def replace(self, **kwargs):
    state = dict(
        du=self.du, u=self.u, x=self.x, h_bold=self.h_bold,
        iteration=self.iteration, last_step=self.last_step,
        residual_norm=self.residual_norm, sweeps=self.sweeps,
        offset=self.offset)
    if 'x' in kwargs:
      state['offset'] = None
    state.update(kwargs)
    return MsMesh(**state)

  def spans(self):
    return np.maximum(np.abs(np.diff(self.offset)), np.abs(np.diff(self.u)))

  def compliant(self):
    return bool(np.all(self.spans() <= self.h_bold * (1 + SPACING_RTOL)))

  def refine(self):
    spans = self.spans()
    if np.all(spans <= self.h_bold * (1 + SPACING_RTOL)):
      return self
    du, u, offset = [self.du[0]], [self.u[0]], [self.offset[0]]
    for i, span in enumerate(spans):
      pieces = max(1, math.ceil(span / self.h_bold * (1 - SPACING_RTOL)))
      for j in range(1, pieces):
        t = j / pieces
        du.append(self._slope_between(i, t))
        u.append(self.u[i] + t * (self.u[i + 1] - self.u[i]))
        offset.append(
            self.offset[i] + t * (self.offset[i + 1] - self.offset[i]))
      du.append(self.du[i + 1])
      u.append(self.u[i + 1])
      offset.append(self.offset[i + 1])
    return self.replace(du=du, u=u, offset=offset)

  def _slope_between(self, i, t):
    left, right = self.du[i], self.du[i + 1]
    if abs(left) <= 1 or right == 0:
      return left + t * (right - left)
    inverse = 1 / left + t * (1 / right - 1 / left)
    return 1 / inverse if inverse != 0 else left + t * (right - left)

  def interpolate(self, xs, problem=None):
    return self.at_offsets(np.asarray(xs, float) - self.end, problem)

  def at_offsets(self, offsets, problem=None):
    u = interpolate.CubicHermiteSpline(self.offset, self.u, self.du)(offsets)
    if problem is None:
      return u
    curvature = [problem.N(ui, xi) * ui for ui, xi in zip(self.u, self.x)]
    du = interpolate.CubicHermiteSpline(self.offset, self.du, curvature)(offsets)
    return u, du

  def tree(self):
    return {
        'i': np.arange(len(self)),
        'x': self.x, 'u': self.u, 'u_prime': self.du,
        'regime': self.regimes, 'to_end': np.abs(self.offset),
        'h_bold': self.h_bold, 'sweeps': self.sweeps,
        'residual_norm': self.residual_norm,
    }

  @classmethod
  def from_trace(cls, trace, h_bold, u_right, x_end):
    du, u, offset = trace.dus.copy(), trace.us.copy(), -trace.to_ends
    u[-1], offset[-1] = u_right, 0.0
    keep = np.ones(len(offset), bool)
    keep[1:-1] = offset[1:-1] < 0
    du, u, offset = du[keep], u[keep], offset[keep]
    if len(offset) > 2:
      gap = max(abs(offset[-1] - offset[-2]), abs(u[-1] - u[-2]))
      if gap < 1e-3 * h_bold:
        du, u, offset = (
            np.delete(du, -2), np.delete(u, -2), np.delete(offset, -2))
    return cls(du, u, x_end + offset, h_bold, offset=offset).refine()


class MsSystem:
  """Residuals of the step equations between consecutive mesh knots.

  Knot i contributes a position unknown (u_i when the step into it is
  straight, otherwise its offset x_i - b from the right end; none at the
  pinned ends) and a slope unknown (u'_i when its own step is straight,
  otherwise x'_i). Rows 2i and 2i+1 match the step from knot i to knot i+1 in
  position and slope.
  """

  def __init__(self, problem, mesh):
    self.problem = problem
    self.mesh = mesh
    self.straight = mesh.straight
    self.intervals = len(mesh) - 1
    self.size = 2 * self.intervals
    self.cols = []
    for j in range(len(mesh)):
      if j == 0:
        self.cols.append((None, 0))
      elif j == self.intervals:
        self.cols.append((None, self.size - 1))
      else:
        self.cols.append((2 * j - 1, 2 * j))

  @property
  def branches(self):
    return ['U' if s else 'V' for s in self.straight[:-1]]

  def unknowns(self):
    mesh, z = self.mesh, np.zeros(self.size)
    for j, (pcol, qcol) in enumerate(self.cols):
      if pcol is not None:
        z[pcol] = mesh.u[j] if self.straight[j - 1] else mesh.offset[j]
      z[qcol] = mesh.du[j] if self.straight[j] else 1 / mesh.du[j]
    return z

  def to_arrays(self, z):
    mesh = self.mesh
    du, u, offset = mesh.du.copy(), mesh.u.copy(), mesh.offset.copy()
    for j, (pcol, qcol) in enumerate(self.cols):
      if pcol is not None:
        if self.straight[j - 1]:
          u[j] = z[pcol]
        else:
          offset[j] = z[pcol]
      du[j] = z[qcol] if self.straight[j] else 1 / z[qcol]
    return du, u, offset

  def residuals(self, z):
    F = np.empty(self.size)
    for i in range(self.intervals):
      position, slope = self._pair(i, z)
      F[2 * i], F[2 * i + 1] = dual.real(position), dual.real(slope)
    return F

  def jacobian(self, z):
    ab = np.zeros((5, self.size))
    for i in range(self.intervals):
      for col in self._stencil(i):
        position, slope = self._pair(i, z, seed=col)
        for row, value in ((2 * i, position), (2 * i + 1, slope)):
          assert -2 <= row - col <= 2, (row, col)
          ab[2 + row - col, col] = dual.deriv(value)
    return ab

  def dense_jacobian(self, z):
    ab = self.jacobian(z)
    J = np.zeros((self.size, self.size))
    for col in range(self.size):
      for row in range(max(0, col - 2), min(self.size, col + 3)):
        J[row, col] = ab[2 + row - col, col]
    return J

  def reciprocal_slopes(self):
    cols = []
    for j, (_, qcol) in enumerate(self.cols):
      inverse = not self.straight[j]
      flips = j > 0 and self.straight[j] != self.straight[j - 1]
      if inverse or flips:
        cols.append(qcol)
    return np.array(cols, int)

  def _stencil(self, i):
    cols = [*self.cols[i], *self.cols[i + 1]]
    return [c for c in cols if c is not None]

  def _knot(self, j, z, seed):
    t, u = float(self.mesh.offset[j]), float(self.mesh.u[j])
    pcol, qcol = self.cols[j]
    if pcol is not None:
      value = _unknown(z, pcol, seed)
      if self.straight[j - 1]:
        u = value
      else:
        t = value
    return t, u, _unknown(z, qcol, seed)

  def _pair(self, i, z, seed=None):
    t0, u0, q0 = self._knot(i, z, seed)
    t1, u1, q1 = self._knot(i + 1, z, seed)
    x0 = self.mesh.end + t0
    if self.straight[i]:
      A, B = self.problem.straight_coeffs(x0, u0, q0)
      result = stepfn.u_step(stepfn.StepArgs(A, B, q0, u0, t1 - t0))
      target = u1
      slope = q1 if self.straight[i + 1] else 1 / q1
    else:
      A, B = self.problem.inverse_coeffs(u0, x0, q0)
      result = stepfn.v_step(stepfn.StepArgs(A, B, q0, t0, u1 - u0))
      target = t1
      slope = 1 / q1 if self.straight[i + 1] else q1
    return result.value - target, result.deriv_s - slope


def ms_build_system(problem, mesh):
  return MsSystem(problem, mesh)


def ms_newton_sweep(problem, mesh, damping=True):
  system = ms_build_system(problem, mesh)
  z = system.unknowns()
  F = system.residuals(z)
  norm = np.abs(F).max()
  try:
    step = linalg.solve_banded((2, 2), system.jacobian(z), -F)
  except (linalg.LinAlgError, ValueError) as e:
    raise errors.SingularJacobian(
        f'Singular Jacobian in sweep {mesh.iteration + 1}: {e}') from e
  if not np.all(np.isfinite(step)):
    raise errors.SingularJacobian(
        f'Non-finite Newton step in sweep {mesh.iteration + 1}')
  guarded = system.reciprocal_slopes()
  scale = 1.0
  for attempt in range(MAX_HALVINGS + 1):
    trial = z + scale * step
    flipped = np.any(np.sign(trial[guarded]) != np.sign(z[guarded]))
    new_norm = math.inf if flipped else _residual_norm(system, trial)
    if flipped:
      logger.info(
          'Newton step flips a reciprocal slope; halving (attempt %d)',
          attempt + 1)
    elif not damping or new_norm <= max(norm, RESIDUAL_FLOOR):
      break
    if attempt < MAX_HALVINGS:
      scale /= 2
  if not math.isfinite(new_norm):
    raise errors.DivergenceDetected(
        f'No admissible Newton step after {MAX_HALVINGS} halvings')
  last_step = scale * np.abs(step).max()
  threshold = 1e-6 * (1 + np.abs(z).max())
  if mesh.last_step is not None and last_step > threshold and (
      last_step > DIVERGENCE_GROWTH * mesh.last_step):
    raise errors.DivergenceDetected(
        f'Newton step grew from {mesh.last_step:.3e} to {last_step:.3e}')
  du, u, offset = _tidy(*system.to_arrays(trial))
  new = MsMesh(
      du, u, mesh.end + offset, mesh.h_bold, iteration=mesh.iteration + 1,
      last_step=last_step, residual_norm=new_norm, offset=offset)
  return new.refine()


def ms_solve(problem, h_bold, init=None, stop_tol=1e-12, max_sweeps=50):
  if not 0 < h_bold < 1:
    raise errors.ConfigError(f'Step bound must lie in (0, 1): {h_bold}')
  mesh = initial_mesh(problem, h_bold) if init is None else init
  if mesh.h_bold != h_bold:
    mesh = mesh.replace(h_bold=h_bold).refine()
  for sweep in range(1, max_sweeps + 1):
    new = ms_newton_sweep(problem, mesh)
    change = mesh_distance(problem, mesh, new)
    logger.info(
        'Sweep %d: knots=%d residual=%.3e change=%.3e',
        sweep, len(new), new.residual_norm, change)
    mesh = new
    if change <= stop_tol:
      return mesh.replace(sweeps=sweep)
  raise errors.MaxSweepsExceeded(
      f'No convergence to {stop_tol} within {max_sweeps} sweeps',
      mesh, mesh.residual_norm)


def initial_mesh(problem, h_bold, coarse=None, bracket=(None, None)):
  h = coarse or max(h_bold, min(10 * h_bold, 0.5, _layer_width(problem)))
  config = ShootingConfig(h=h, slope_lo=bracket[0], slope_hi=bracket[1])
  slope, trace = simple_shoot(problem, config)
  logger.info(
      'Initial guess: slope %.15e from h=%g with %d knots',
      slope, h, len(trace))
  return MsMesh.from_trace(trace, h_bold, problem.u_right, problem.domain[1])


def _layer_width(problem):
  # Decay length of u'' = N u at the left end; coarser marches miss the layer.
  n = problem.N(problem.u_left, problem.domain[0])
  return 1 / math.sqrt(n) if n > 0 else math.inf


def mesh_distance(problem, a, b):
  stations, other = (a, b) if len(a) <= len(b) else (b, a)
  u, du = other.at_offsets(stations.offset, problem)
  with np.errstate(divide='ignore', invalid='ignore'):
    weight = np.minimum(1.0, 1.0 / np.abs(stations.du))
    position = np.abs(u - stations.u) * weight
    slope = np.where(
        stations.straight, np.abs(du - stations.du),
        np.abs(1 / du - 1 / stations.du))
  return float(max(position.max(), slope.max()))


def _residual_norm(system, z):
  try:
    F = system.residuals(z)
  except (errors.SolverError, ZeroDivisionError, OverflowError):
    return math.inf
  norm = np.abs(F).max()
  return norm if np.isfinite(norm) else math.inf


def _tidy(du, u, t):
  order = np.argsort(t[1:-1], kind='stable') + 1
  a, b, end = t[0], t[-1], len(t) - 1
  keep = [0]
  for j in order:
    if not a < t[j] < b or t[j] <= t[keep[-1]] or _inverted(du, u, keep[-1], j):
      continue
    keep.append(j)
  while len(keep) > 1 and _inverted(du, u, keep[-1], end):
    keep.pop()
  keep.append(end)
  dropped = len(t) - len(keep)
  if dropped:
    logger.info('Dropped %d knots out of order after the Newton step', dropped)
  return du[keep], u[keep], t[keep]


def _inverted(du, u, i, j):
  # Inside the inverse regime u must advance in the direction of the slope.
  if abs(du[i]) <= 1 or abs(du[j]) <= 1:
    return False
  return (u[j] - u[i]) * np.sign(du[i]) <= 0


def _unknown(z, col, seed):
  if col == seed:
    return Dual2(z[col], 1.0)
  return float(z[col])
