import math

from scipy import integrate

from . import dual
from . import errors
from .dual import Dual2


SERIES_N = 1e-3
OVERFLOW_Z = 690.0
SERIES_DERIVS = 1.0
FD_STEP = 1e-5


class Problem:

  def __init__(
      self, name, N, N_u, N_x=None, domain=(0.0, 1.0), u_left=0.0,
      u_right=1.0, N_uu=None, N_ux=None, N_xx=None, F=None, growth=None,
      bracket=None, params=None, u_limit=None):
    a, b = map(float, domain)
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
      raise errors.ConfigError(f'Invalid domain {domain}')
    self.name = name
    self.N = N
    self.N_u = N_u
    self.N_x = N_x or _zero
    self.N_uu = N_uu
    self.N_ux = N_ux or (_zero if N_x is None else None)
    self.N_xx = N_xx or (_zero if N_x is None else None)
    self.F = F
    self.growth = growth
    self.domain = (a, b)
    self.u_left = float(u_left)
    self.u_right = float(u_right)
    self.autonomous = N_x is None
    self.params = dict(params or {})
    self.u_limit = None if u_limit is None else float(u_limit)
    if bracket is None:
      chord = (self.u_right - self.u_left) / (b - a)
      bracket = (min(0.0, chord), max(0.0, chord))
    self.bracket = tuple(map(float, bracket))

  def __repr__(self):
    params = ', '.join(f'{k}={v}' for k, v in self.params.items())
    return f'Problem({self.name}, {params})'

  def describe(self):
    return {
        'name': self.name, **self.params, 'domain': list(self.domain),
        'u_left': self.u_left, 'u_right': self.u_right}

  def evaluate(self, u, x):
    uv, xv = dual.real(u), dual.real(x)
    n, nu, nx = self.N(uv, xv), self.N_u(uv, xv), self.N_x(uv, xv)
    if not dual.isdual(u, x):
      return n, nu, nx
    du, dx = dual.deriv(u), dual.deriv(x)
    nuu, nux, nxx = self.second(uv, xv)
    return (
        Dual2(n, nu * du + nx * dx),
        Dual2(nu, nuu * du + nux * dx),
        Dual2(nx, nux * du + nxx * dx))

  def second(self, u, x):
    step_u = FD_STEP * max(1.0, abs(u))
    step_x = FD_STEP * max(1.0, abs(x))
    if self.N_uu:
      nuu = self.N_uu(u, x)
    else:
      nuu = (self.N_u(u + step_u, x) - self.N_u(u - step_u, x)) / (2 * step_u)
    if self.N_ux:
      nux = self.N_ux(u, x)
    else:
      nux = (self.N_u(u, x + step_x) - self.N_u(u, x - step_x)) / (2 * step_x)
    if self.N_xx:
      nxx = self.N_xx(u, x)
    else:
      nxx = (self.N_x(u, x + step_x) - self.N_x(u, x - step_x)) / (2 * step_x)
    return nuu, nux, nxx

  def straight_coeffs(self, x, u, du):
    n, nu, nx = self.evaluate(u, x)
    return nu * du + nx, n

  def inverse_coeffs(self, u, x, dx):
    n, nu, nx = self.evaluate(u, x)
    dx2 = dx * dx
    # N u x'^2 stays moderate where N u and x'^2 alone overflow or underflow.
    w = n * u * dx2
    A = -((nu + nx * dx) * u + n) * dx2 + 2 * (w * w)
    B = -w
    return A, B

  def phi(self, u, u0=None):
    """Integral of N(v) v dv from u0 (default: the left boundary value) to u."""
    u0 = self.u_left if u0 is None else u0
    if self.F:
      return self.F(u) - self.F(u0)
    x = self.domain[0]
    value, _ = integrate.quad(
        lambda v: self.N(v, x) * v, u0, u, epsabs=1e-15, epsrel=1e-13,
        limit=200)
    return value


def troesch_N(lam, u):
  z = lam * u
  if abs(z) < SERIES_N:
    z2 = z * z
    return lam * lam * (1 + z2 / 6 * (1 + z2 / 20 * (1 + z2 / 42)))
  return lam * math.sinh(z) / u


def troesch_N_u(lam, u):
  z = lam * u
  if abs(z) < SERIES_DERIVS:
    return lam ** 3 * _sinhc_series(z, order=1)
  return lam * (z * math.cosh(z) - math.sinh(z)) / (u * u)


def troesch_N_uu(lam, u):
  z = lam * u
  if abs(z) < SERIES_DERIVS:
    return lam ** 4 * _sinhc_series(z, order=2)
  return lam ** 4 * ((z * z + 2) * math.sinh(z) - 2 * z * math.cosh(z)) / z ** 3


def troesch_pole(lam, du0):
  return math.log(8 / du0) / lam


def _sinhc_series(z, order):
  # Derivatives of sinh(z)/z = sum z^2k / (2k+1)!, summed until negligible.
  total, k, fact = 0.0, 1, 6.0
  while True:
    if order == 1:
      term = 2 * k * z ** (2 * k - 1) / fact
    else:
      term = 2 * k * (2 * k - 1) * z ** (2 * k - 2) / fact
    total += term
    if abs(term) <= 1e-17 * abs(total) or k > 30:
      return total
    k += 1
    fact *= (2 * k) * (2 * k + 1)


def troesch(lam=1.0):
  lam = float(lam)
  if not (math.isfinite(lam) and lam > 0):
    raise errors.ConfigError(f'Troesch parameter must be positive: {lam}')
  return Problem(
      'troesch',
      N=lambda u, x: troesch_N(lam, u),
      N_u=lambda u, x: troesch_N_u(lam, u),
      N_uu=lambda u, x: troesch_N_uu(lam, u),
      F=lambda u: math.cosh(lam * u),
      domain=(0.0, 1.0), u_left=0.0, u_right=1.0,
      bracket=(0.0, 1.0), params={'lam': lam}, u_limit=OVERFLOW_Z / lam)


def linear(u_left=0.0, u_right=1.0):
  return Problem(
      'linear',
      N=lambda u, x: 0.0, N_u=lambda u, x: 0.0, N_uu=lambda u, x: 0.0,
      F=lambda u: 0.0, u_left=u_left, u_right=u_right)


def constant(c=1.0, u_left=0.0, u_right=1.0):
  c = float(c)
  if not c > 0:
    raise errors.ConfigError(f'Constant coefficient must be positive: {c}')
  return Problem(
      'constant',
      N=lambda u, x: c, N_u=lambda u, x: 0.0, N_uu=lambda u, x: 0.0,
      F=lambda u: c * u * u / 2, growth=0.0,
      u_left=u_left, u_right=u_right, params={'c': c})


def quadratic(c=1.0, u_left=0.0, u_right=1.0):
  c = float(c)
  if not c > 0:
    raise errors.ConfigError(f'Quadratic coefficient must be positive: {c}')
  return Problem(
      'quadratic',
      N=lambda u, x: c * (1 + u * u), N_u=lambda u, x: 2 * c * u,
      N_uu=lambda u, x: 2 * c,
      F=lambda u: c * (u * u / 2 + u ** 4 / 4), growth=2.0,
      u_left=u_left, u_right=u_right, params={'c': c})


problems = {
    'troesch': troesch,
    'linear': linear,
    'constant': constant,
    'quadratic': quadratic,
}


def register(name, factory):
  assert callable(factory), factory
  if name in problems:
    raise errors.ConfigError(f'Problem already registered: {name}')
  problems[name] = factory


def make_problem(name, **params):
  if name not in problems:
    raise errors.ConfigError(
        f"Unknown problem '{name}', choose from {sorted(problems)}")
  try:
    return problems[name](**params)
  except TypeError as e:
    raise errors.ConfigError(f"Bad parameters for '{name}': {e}") from e


def _zero(u, x):
  return 0.0
