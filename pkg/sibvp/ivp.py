"""Straight-inverse marching of u'' = N(u, x) u from an initial slope.

While |u'| <= 1 the marcher advances x by h with the U step function
(straight regime). Once |u'| > 1 it advances u by sign(x') h and integrates
the inverse function x(u) with the V step function (inverse regime), so the
marched function never has a slope above one.
"""

import dataclasses
import functools
import logging
import math

import numpy as np
from scipy import interpolate
from scipy import optimize

from . import dual
from . import errors
from . import stepfn
from .dual import Dual2


logger = logging.getLogger(__name__)

STRAIGHT = 'straight'
INVERSE = 'inverse'
REACHED_X_END = 'ReachedXEnd'
REACHED_U_CAP = 'ReachedUCap'
KNOT_BUDGET = 'KnotBudget'
LANDING_XTOL = 1e-14
BUDGET_SCALE = 1e8


@dataclasses.dataclass(frozen=True)
class Knot:

  u_prime: object
  x_prime: object
  u: object
  x: object
  regime: str
  # Distance left to the stopping point. Carries x to full relative precision
  # where x itself rounds onto the end.
  to_end: object = None

  def real(self):
    return Knot(
        dual.real(self.u_prime), dual.real(self.x_prime),
        dual.real(self.u), dual.real(self.x), self.regime,
        dual.real(self.to_end))


@dataclasses.dataclass(frozen=True)
class StopRule:

  x_end: float
  u_cap: float = None
  budget: int = None

  def resolve(self, problem, h):
    u_cap = self.u_cap
    if u_cap is None:
      u_cap = problem.u_right + 10 * max(1.0, abs(problem.u_right))
    if problem.u_limit is not None:
      u_cap = min(u_cap, problem.u_limit)
    budget = self.budget
    if budget is None:
      budget = int(BUDGET_SCALE / h)
    return StopRule(float(self.x_end), float(u_cap), int(budget))


class IvpTrace:

  def __init__(self, knots, h, stop_reason=None):
    self.knots = list(knots)
    self.h = h
    self.stop_reason = stop_reason

  def __len__(self):
    return len(self.knots)

  def __getitem__(self, index):
    return self.knots[index]

  def __iter__(self):
    return iter(self.knots)

  def __repr__(self):
    return (
        f'IvpTrace(knots={len(self)}, h={self.h}, '
        f'stop_reason={self.stop_reason})')

  @property
  def final(self):
    return self.knots[-1]

  @functools.cached_property
  def xs(self):
    return np.array([dual.real(k.x) for k in self.knots])

  @functools.cached_property
  def us(self):
    return np.array([dual.real(k.u) for k in self.knots])

  @functools.cached_property
  def dus(self):
    return np.array([dual.real(k.u_prime) for k in self.knots])

  @functools.cached_property
  def dxs(self):
    return np.array([dual.real(k.x_prime) for k in self.knots])

  @functools.cached_property
  def to_ends(self):
    return np.array([dual.real(k.to_end) for k in self.knots])

  @property
  def regimes(self):
    return [k.regime for k in self.knots]

  @property
  def i_star(self):
    for i in range(len(self.knots) - 1):
      if self.knots[i + 1].regime == INVERSE:
        return i
    return None

  def ders(self, field):
    return np.array([dual.deriv(getattr(k, field)) for k in self.knots])

  @functools.cached_property
  def _spline(self):
    assert np.all(np.diff(self.xs) > 0), 'trace is not monotone in x'
    return interpolate.CubicHermiteSpline(self.xs, self.us, self.dus)

  def interpolate(self, xs):
    return self._spline(np.asarray(xs, float))

  def nearest(self, xs):
    xs = np.atleast_1d(np.asarray(xs, float))
    right = np.clip(np.searchsorted(self.xs, xs), 1, len(self) - 1)
    left = right - 1
    closer = np.abs(self.xs[right] - xs) < np.abs(xs - self.xs[left])
    return np.where(closer, right, left)

  def tree(self):
    return {
        'i': np.arange(len(self)),
        'regime': self.regimes,
        'x': self.xs, 'u': self.us,
        'u_prime': self.dus, 'x_prime': self.dxs, 'to_end': self.to_ends,
        'h': self.h, 'stop_reason': self.stop_reason,
    }


def si_march(problem, u0, du0, h, stop):
  return _march(problem, float(u0), float(du0), h, stop)


def si_march_dual(problem, u0, du0, h, stop):
  return _march(problem, Dual2(u0), Dual2(du0), h, stop)


def _march(problem, u0, du0, h, stop):
  h = float(h)
  if not 0 < h < 1:
    raise errors.InvalidStep(f'Step size must lie in (0, 1): {h}')
  stop = stop.resolve(problem, h)
  x_end = stop.x_end
  x0 = problem.domain[0]
  knots = [Knot(
      du0, _reciprocal(du0), u0, x0, _regime(du0), x_end - x0)]
  anchor, count, run = None, 0, None
  while True:
    prev = knots[-1]
    if len(knots) > stop.budget:
      trace = IvpTrace(knots, h, KNOT_BUDGET)
      raise errors.BudgetExhausted(
          f'Knot budget {stop.budget} exhausted at x={dual.real(prev.x)}',
          trace)
    straight = abs(dual.real(prev.u_prime)) <= 1
    if straight:
      key = STRAIGHT
    else:
      key = (INVERSE, math.copysign(1.0, dual.real(prev.x_prime)))
    if key != run:
      run, anchor, count = key, (prev.x if straight else prev.u), 0
    try:
      if straight:
        knot, landed = _straight(problem, prev, anchor, count, h, x_end)
      else:
        knot, landed = _inverse(problem, prev, anchor, count, key[1] * h, x_end)
    except errors.NonConvergence as e:
      raise errors.StepFunctionFailure(
          f'Step function failed after knot {len(knots) - 1}: {e}',
          knot=prev) from e
    except OverflowError as e:
      trace = IvpTrace(knots, h, REACHED_U_CAP)
      raise errors.BlowUp(
          f'Overflow after knot {len(knots) - 1} at x={dual.real(prev.x)}: {e}',
          prev, trace) from e
    count += 1
    knots.append(knot)
    u = dual.real(knot.u)
    if not (math.isfinite(u) and math.isfinite(dual.real(knot.x))):
      raise errors.StepFunctionFailure(
          f'Non-finite knot {len(knots) - 1}: {knot}', knot=knot)
    if abs(u) >= stop.u_cap:
      trace = IvpTrace(knots, h, REACHED_U_CAP)
      raise errors.BlowUp(
          f'|u| reached {stop.u_cap} at x={dual.real(knot.x)}', knot, trace)
    if landed:
      return IvpTrace(knots, h, REACHED_X_END)


def _straight(problem, prev, anchor, count, h, x_end):
  A, B = problem.straight_coeffs(prev.x, prev.u, prev.u_prime)
  _check_coeffs(A, B)
  x = anchor + (count + 1) * h
  landed = dual.real(x) >= x_end - 1e-12 * h
  if landed:
    s = prev.to_end
    x = x_end
  else:
    s = h
  result = stepfn.u_step(stepfn.StepArgs(A, B, prev.u_prime, prev.u, s))
  du = result.deriv_s
  knot = Knot(du, _reciprocal(du), result.value, x, STRAIGHT, x_end - x)
  return knot, landed


def _inverse(problem, prev, anchor, count, hs, x_end):
  A, B = problem.inverse_coeffs(prev.u, prev.x, prev.x_prime)
  _check_coeffs(A, B)
  # Integrate the offset x - x_end so positions near the end keep their digits.
  args = stepfn.StepArgs(A, B, prev.x_prime, -prev.to_end, hs)
  result = stepfn.v_step(args)
  landed = dual.real(result.value) >= 0
  if landed:
    s = _landing(args, 0.0)
    result = stepfn.v_step(args.replace(s=s))
    u, to_end = prev.u + s, 0.0
  else:
    u, to_end = anchor + (count + 1) * hs, -result.value
  dx = result.deriv_s
  knot = Knot(_reciprocal(dx), dx, u, x_end - to_end, INVERSE, to_end)
  return knot, landed


def _landing(args, target):
  # Solve V(s) = target on the step interval; carry ds/dp for dual inputs.
  def gap(s):
    return dual.real(stepfn.v_step(args.replace(s=s)).value) - target
  lo, hi = sorted((0.0, args.s))
  if gap(args.s) == 0:
    s = args.s
  else:
    s = optimize.bisect(gap, lo, hi, xtol=LANDING_XTOL, maxiter=200)
  logger.debug('Inverse landing step %.17g of %.17g', s, args.s)
  if not dual.isdual(args.A, args.B, args.C, args.D):
    return s
  fixed = stepfn.v_step(args.replace(s=s))
  return Dual2(s, -dual.deriv(fixed.value) / dual.real(fixed.deriv_s))


def _check_coeffs(A, B):
  for value in (A, B):
    if not (math.isfinite(dual.real(value)) and
            math.isfinite(dual.deriv(value))):
      raise OverflowError(f'Non-finite step coefficients A={A}, B={B}')


def _reciprocal(value):
  if dual.real(value) == 0:
    return math.inf
  return 1.0 / value


def _regime(du):
  return STRAIGHT if abs(dual.real(du)) <= 1 else INVERSE
