"""A priori error bounds of the straight-inverse method.

The constants bound the straight phase by ``h**2 * P(h)`` and the inverse
phase knot by knot. They are deliberately pessimistic; only the inequality
direction is meaningful.
"""

import dataclasses
import logging
import math

import numpy as np
from scipy import integrate
from scipy import optimize

from . import errors


logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.1
GRID_POINTS = 4096
MU_POINTS = 20001
MU_SPAN = 10.0
GAUSS_NODES = 32
TAIL_CUTOFF = 1e-16
TAIL_RTOL = 1e-12
MAX_SEGMENTS = 200


@dataclasses.dataclass(frozen=True)
class BoundConstants:

  epsilon: float
  S_star: float
  M_star: float
  L0: float
  L1: float
  L2: float
  variant: str = 'remark'

  def P_star(self, h, variant=None):
    variant = variant or self.variant
    M, L0, L1, L2, S = self.M_star, self.L0, self.L1, self.L2, self.S_star
    if variant == 'original':
      exponent = (S + 1) * max(1.0, L0 + L1) + S * M * (2 * L1 + L2)
      return (M / 2) * (L2 + L1 * L0 * M) * math.exp(exponent) / (
          L1 * M + max(1.0, L0))
    assert variant == 'remark', variant
    if not 0 < h < 1:
      raise errors.ConfigError(f'Step size must lie in (0, 1): {h}')
    E = max(1.0, L0 + L1 * h)
    K = L1 + h * (L1 + L2)
    numerator = (h * M / 2) * (L2 + L1 * L0 * M) * math.exp(h * E) * (
        math.expm1(S * (E + M * K)))
    denominator = math.expm1(h * E) + h * M * K * math.exp(h * E)
    return numerator / denominator

  def P_star_of_h(self, h):
    return self.P_star(h)

  def h_restrictions(self, h, mu=None):
    P, eps = self.P_star(h), self.epsilon
    first = 0 < h < min(1.0, math.sqrt(eps / P), eps / (self.L0 * self.M_star))
    second = h < (1 - 2 * eps) / P
    if mu is not None and mu > 0:
      second = second and h < 1 / (3 * mu)
    return {'first': bool(first), 'second': bool(second)}

  def i_star_bound_ok(self, h, mu=None):
    return all(self.h_restrictions(h, mu).values())

  def report(self, h, mu=None):
    restrictions = self.h_restrictions(h, mu)
    return {
        'epsilon': self.epsilon,
        'S_star': self.S_star,
        'M_star': self.M_star,
        'L0': self.L0, 'L1': self.L1, 'L2': self.L2,
        'P_star_at_h': self.P_star(h),
        'straight_phase_bound': straight_phase_bound(self, h),
        'mu_estimate': mu,
        'h_restrictions': restrictions,
        'h_restrictions_satisfied': all(restrictions.values()),
    }


@dataclasses.dataclass(frozen=True)
class MuEstimate:

  value: float
  at: float
  trend: str
  truncated: bool = True

  def __float__(self):
    return self.value


@dataclasses.dataclass(frozen=True)
class InverseBound:

  i_star: int
  u: np.ndarray
  x: np.ndarray
  x_err: np.ndarray
  xp_err: np.ndarray

  def tree(self):
    return {
        'i_star': self.i_star, 'u': self.u, 'x': self.x,
        'x_err_bound': self.x_err, 'xp_err_bound': self.xp_err}


def compute_S_star(problem, u_l, du_l, b=math.inf, growth=None):
  if not du_l > 0:
    raise errors.PreconditionFailed(f'Initial slope must be positive: {du_l}')
  growth = problem.growth if growth is None else growth

  def integrand(eta):
    try:
      return 1 / math.sqrt(du_l ** 2 + 2 * problem.phi(eta, u_l))
    except OverflowError:
      return 0.0

  total, lo, width = 0.0, u_l, 1.0
  for _ in range(MAX_SEGMENTS):
    hi = lo + width
    part, _ = integrate.quad(integrand, lo, hi, epsabs=0, epsrel=1e-13, limit=200)
    total += part
    if total >= b:
      return float(b)
    value = integrand(hi)
    if growth is None:
      after = integrand(2 * hi)
      if value == 0:
        decay = math.inf
      else:
        decay = math.log(value / after) / math.log(2) - 1 if after > 0 else math.inf
    else:
      decay = growth / 2
    # The integrand decays no faster than 1/eta without superlinear growth.
    if decay > 0:
      if value < TAIL_CUTOFF:
        return total
      tail = value * abs(hi) / decay
      if tail <= TAIL_RTOL * total:
        return min(float(b), total + tail)
    lo, width = hi, 2 * width
  raise errors.DivergentIntegral(
      f'Blow-up integral does not converge (partial value {total:.6g} at '
      f'u={lo:.3g})')


def compute_M_star(
    problem, epsilon, u_l, du_l, variant='remark', S_star=None):
  _check_epsilon(epsilon)
  if variant == 'original':
    if S_star is None:
      S_star = compute_S_star(problem, u_l, du_l, b=problem.domain[1] - problem.domain[0])
    return 0.5 * S_star * (1 + 3 * epsilon - du_l)
  assert variant == 'remark', variant
  target = ((1 + 3 * epsilon) ** 2 - du_l ** 2) / 2
  if target < 0:
    raise errors.NoRoot(f'No level set for negative target {target}')
  if target == 0:
    return float(u_l)
  lo, width = u_l, 1.0
  hi = lo + width
  for _ in range(MAX_SEGMENTS):
    if problem.phi(hi, u_l) >= target:
      break
    lo, width = hi, 2 * width
    hi = lo + width
  else:
    raise errors.NoRoot(f'Could not bracket the level {target}')
  return optimize.brentq(
      lambda u: problem.phi(u, u_l) - target, lo, hi,
      xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def compute_L(problem, M_star, epsilon):
  radius = M_star + epsilon
  grid = np.linspace(-radius, radius, GRID_POINTS)
  x = problem.domain[0]
  fns = (
      lambda u: problem.N(u, x),
      lambda u: problem.N_u(u, x),
      lambda u: problem.second(u, x)[0],
  )
  return tuple(_max_abs(fn, grid) for fn in fns)


def compute_P_star(h, constants):
  return constants.P_star(h)


def compute_mu(problem, u_istar, u_max, points=MU_POINTS):
  if not u_max > u_istar:
    raise errors.ConfigError(f'Empty range [{u_istar}, {u_max}]')
  x = problem.domain[0]
  grid = np.linspace(u_istar, u_max, points)
  growth = np.array([problem.N(u, x) * u for u in grid])
  if problem.F:
    area = np.array([problem.phi(u, u_istar) for u in grid])
  else:
    area = integrate.cumulative_trapezoid(growth, grid, initial=0.0)
  values = growth / (1 + area)
  j = int(np.argmax(values))
  best, at = float(values[j]), float(grid[j])
  if 0 < j < len(grid) - 1:
    ratio = lambda u: problem.N(u, x) * u / (1 + problem.phi(u, u_istar))
    try:
      result = optimize.minimize_scalar(
          lambda u: -ratio(u), bracket=(grid[j - 1], grid[j], grid[j + 1]),
          method='golden', tol=1e-12)
      if grid[0] <= result.x <= grid[-1] and -result.fun > best:
        best, at = float(-result.fun), float(result.x)
    except ValueError:
      pass
  trend = 'increasing' if values[-1] > values[-2] else 'decreasing'
  return MuEstimate(best, at, trend)


def straight_phase_bound(constants, h):
  return h * h * constants.P_star(h)


def inverse_phase_bound(problem, constants, trace, h, mu=None):
  i_star = trace.i_star
  if i_star is None:
    raise errors.PreconditionFailed('The trace never enters the inverse regime')
  us, xs = trace.us[i_star:], trace.xs[i_star:]
  if mu is None:
    mu = compute_mu(problem, us[0], us[0] + MU_SPAN).value
  restrictions = constants.h_restrictions(h, mu)
  if not all(restrictions.values()):
    raise errors.PreconditionFailed(
        f'Step size {h} violates the bound restrictions {restrictions}')
  eps, M, L0 = constants.epsilon, constants.M_star, constants.L0
  P = constants.P_star(h)
  u_star = us[0]
  x = problem.domain[0]

  def area(lo, hi):
    return problem.phi(hi, u_star) - problem.phi(lo, u_star)

  def terms(zeta):
    n = problem.N(zeta, x)
    nu = problem.N_u(zeta, x)
    nuu = problem.second(zeta, x)[0]
    g0, g1, g2 = n * zeta, nu * zeta + n, nuu * zeta + 2 * nu
    shifted = 1 - 6 * eps + area(u_star - 2 * h, zeta - 2 * h)
    doubled = 1 - 6 * eps + 2 * area(u_star - h, zeta - h)
    scale = ((1 - 2 * eps) ** 2 + 2 * area(u_star, zeta)) ** -0.5
    exponent = ((g0 + h * g1) / shifted ** 0.5 + 2 * h * g0 ** 2 / shifted ** 1.5)
    curvature = g2 / doubled + 6 * g1 * g0 / doubled ** 2 + 8 * g0 ** 3 / doubled ** 3
    return exponent * scale, curvature * scale

  nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)
  count = len(us) - 1
  cum_e, cum_t, cum_zt = np.zeros(count), np.zeros(count), np.zeros(count)
  run_e = run_t = run_zt = 0.0
  for j in range(count):
    half, mid = (us[j + 1] - us[j]) / 2, (us[j + 1] + us[j]) / 2
    for node, weight in zip(nodes, weights):
      zeta = mid + half * node
      e, t = terms(zeta)
      run_e += half * weight * e
      run_t += half * weight * t
      run_zt += half * weight * zeta * t
    cum_e[j], cum_t[j], cum_zt[j] = run_e, run_t, run_zt
  u = us[1:]
  growth = np.exp(2 * cum_e)
  c = (L0 * M / (1 - 2 * eps) ** 2 + 1) * P / (1 - 2 * eps)
  double = u * cum_t - cum_zt
  first = P * h ** 2 / (1 - P * h ** 2 - L0 * M * h)
  x_err = first + growth * (c * (u - u_star) + double / 2) * h ** 2
  xp_err = growth * (c + cum_t / 2) * h ** 2
  return InverseBound(i_star, u, xs[1:], x_err, xp_err)


def compute_constants(
    problem, du_l, epsilon=DEFAULT_EPSILON, b=None, variant='remark'):
  _check_epsilon(epsilon)
  a = problem.domain[0]
  b = problem.domain[1] - a if b is None else b
  u_l = problem.u_left
  S = compute_S_star(problem, u_l, du_l, b)
  M = compute_M_star(problem, epsilon, u_l, du_l, variant=variant, S_star=S)
  L0, L1, L2 = compute_L(problem, M, epsilon)
  logger.info(
      'Bound constants: S*=%.10g M*=%.10g L=(%.10g, %.10g, %.10g)',
      S, M, L0, L1, L2)
  return BoundConstants(epsilon, S, M, L0, L1, L2, variant)


def inverse_solution(problem, du_l, us):
  """Exact x(u) and x'(u) of the initial value problem from (a, u_l, du_l)."""
  us = np.atleast_1d(np.asarray(us, float))
  u_l, a = problem.u_left, problem.domain[0]
  integrand = lambda eta: 1 / math.sqrt(du_l ** 2 + 2 * problem.phi(eta, u_l))
  order = np.argsort(us)
  xs = np.empty_like(us)
  position, last = a, u_l
  for j in order:
    part, _ = integrate.quad(
        integrand, last, us[j], epsabs=1e-15, epsrel=1e-13, limit=200)
    position, last = position + part, us[j]
    xs[j] = position
  return xs, np.array([integrand(u) for u in us])


def oracle_u(problem, du_l, xs):
  """Exact u(x) and u'(x) by inverting the closed-form inverse solution."""
  xs = np.atleast_1d(np.asarray(xs, float))
  u_l = problem.u_left
  position = lambda u: inverse_solution(problem, du_l, u)[0][0]
  hi = u_l + 1.0
  while position(hi) < xs.max():
    hi = u_l + 2 * (hi - u_l)
  us = np.array([
      optimize.brentq(lambda u: position(u) - x, u_l, hi, xtol=1e-15)
      if x > problem.domain[0] else u_l for x in xs])
  slopes = np.sqrt(du_l ** 2 + 2 * np.array([problem.phi(u, u_l) for u in us]))
  return us, slopes


def check_hypotheses(problem, u_lo, u_hi, points=1001):
  x = problem.domain[0]
  grid = np.linspace(u_lo, u_hi, points)
  n = np.array([problem.N(u, x) for u in grid])
  nu = np.array([problem.N_u(u, x) for u in grid])
  nuu = np.array([problem.second(u, x)[0] for u in grid])
  phi = np.array([problem.phi(u, u_lo) for u in grid])
  with np.errstate(divide='ignore', invalid='ignore'):
    quotient = phi[1:] / (grid[1:] - u_lo) ** 2
  return {
      'N_positive': bool(np.all(n > 0)),
      'N_u_nonnegative': bool(np.all(nu >= 0)),
      'N_uu_nonnegative': bool(np.all(nuu >= 0)),
      'autonomous': bool(problem.autonomous),
      'phi_superquadratic': bool(quotient[-1] > quotient[len(quotient) // 2]),
  }


def _max_abs(fn, grid):
  values = np.abs([fn(u) for u in grid])
  j = int(np.argmax(values))
  best = float(values[j])
  if 0 < j < len(grid) - 1:
    try:
      result = optimize.minimize_scalar(
          lambda u: -abs(fn(u)), bracket=(grid[j - 1], grid[j], grid[j + 1]),
          method='golden', tol=1e-12)
      if grid[0] <= result.x <= grid[-1]:
        best = max(best, float(-result.fun))
    except ValueError:
      pass
  return best


def _check_epsilon(epsilon):
  if not 0 < epsilon < 1 / 6:
    raise errors.ConfigError(f'Epsilon must lie in (0, 1/6): {epsilon}')
