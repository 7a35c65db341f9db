"""Step functions of the straight and inverse regimes.

``u_step`` solves ``u'' = (A s + B) u`` with ``u(0) = D``, ``u'(0) = C`` and
``v_step`` solves ``v'' = (A s + B) v'`` with ``v(0) = D``, ``v'(0) = C``, both
by successive approximations. Every iterate is a polynomial in ``s``, so the
increments are kept as exact coefficient lists and the nested integrals are
coefficient shifts. The coefficients may be floats or ``Dual2`` numbers; real
coefficients run through compiled loops with the same operation order.
"""

import dataclasses
import math

import numpy as np
from numba import njit

from . import dual
from . import errors
from .dual import Dual2


N_MAX = 50
S_MAX = 1.0
RTOL = 1e-15

# Status codes of the compiled real-valued series.
DONE, NO_CONVERGENCE, BAD_INCREMENT = 0, 1, 2


@dataclasses.dataclass(frozen=True)
class StepArgs:

  A: object
  B: object
  C: object
  D: object
  s: object

  def __post_init__(self):
    for name in ('A', 'B', 'C', 'D', 's'):
      value = getattr(self, name)
      if not (math.isfinite(dual.real(value)) and
              math.isfinite(dual.deriv(value))):
        raise errors.InvalidStep(f'Step argument {name} is not finite: {value}')

  def replace(self, **kwargs):
    return dataclasses.replace(self, **kwargs)


@dataclasses.dataclass(frozen=True)
class StepResult:

  value: object
  deriv_s: object
  terms_used: int
  tail_bound: float


def default_tol(args, rtol=RTOL):
  s = abs(dual.real(args.s))
  return rtol * (dual.norm(args.D) + dual.norm(args.C) * s)


def u_step(args, tol=None, terms=None, n_max=N_MAX):
  if isinstance(args.s, Dual2):
    return _moving_end(u_step, args, tol, terms, n_max, curvature=lambda r: (
        dual.real(args.A) * args.s.val + dual.real(args.B)) * dual.real(r.value))
  A, B, C, D, s = args.A, args.B, args.C, args.D, _check_step(args.s)
  if s == 0:
    return StepResult(D, C, 0, 0.0)
  tol = default_tol(args) if tol is None else tol
  assert tol >= 0, tol
  q = dual.norm(A) * abs(s) + dual.norm(B)
  scale = dual.norm(C) * abs(s) + dual.norm(D)
  dtol = RTOL * (dual.norm(C) + q * abs(s) * dual.norm(D))
  if _is_real(A, B, C, D):
    status, value, deriv, n, bound, increment = _u_series(
        float(A), float(B), float(C), float(D), s, float(tol), dtol, q, scale,
        -1 if terms is None else terms, n_max)
    _raise_on(status, 'U', increment, bound, tol, n, s, q)
    return _finish(value, deriv, n, bound,
                   q * (s * s) / ((2 * n + 1) * (2 * n + 2)))
  s2 = s * s
  value, deriv, poly = 0.0, C, [D, C]
  bound, n = scale, 0
  while True:
    # Next derivative increment is bounded by q * |s| * bound / (2n + 1).
    dbound = q * abs(s) * bound / (2 * n + 1)
    if terms is None and n >= 1 and bound <= tol and dbound <= dtol:
      break
    if terms is not None and n >= terms:
      break
    if n >= n_max:
      raise errors.NonConvergence(
          f'U series bound {bound:.3e} above tolerance {tol:.3e} after '
          f'{n} terms (s={s}, q={q:.3e})', bound=bound, terms=n)
    increment = _horner(poly, s)
    _check_increment('U', increment, bound, n, s, q)
    value = value + increment
    poly = _integrate(_times_linear(poly, A, B))
    deriv = deriv + _horner(poly, s)
    poly = _integrate(poly)
    n += 1
    bound = bound * q * s2 / ((2 * n - 1) * (2 * n))
  return _finish(value, deriv, n, bound, q * s2 / ((2 * n + 1) * (2 * n + 2)))


def v_step(args, tol=None, terms=None, n_max=N_MAX):
  if isinstance(args.s, Dual2):
    return _moving_end(v_step, args, tol, terms, n_max, curvature=lambda r: (
        dual.real(args.A) * args.s.val + dual.real(args.B)) * dual.real(r.deriv_s))
  A, B, C, D, s = args.A, args.B, args.C, args.D, _check_step(args.s)
  if s == 0:
    return StepResult(D, C, 0, 0.0)
  tol = default_tol(args) if tol is None else tol
  assert tol >= 0, tol
  q = dual.norm(A) * abs(s) + dual.norm(B)
  dtol = RTOL * dual.norm(C)
  if _is_real(A, B, C, D):
    status, value, deriv, n, bound, increment = _v_series(
        float(A), float(B), float(C), float(D), s, float(tol), dtol, q,
        -1 if terms is None else terms, n_max)
    _raise_on(status, 'V', increment, bound, tol, n, s, q)
    return _finish(value, deriv, n, bound, q * abs(s) / (n + 1))
  value, deriv, poly = D, 0.0, [C]
  bound, n = dual.norm(C) * abs(s), 0
  while True:
    dbound = bound / abs(s)
    if terms is None and n >= 1 and bound <= tol and dbound <= dtol:
      break
    if terms is not None and n >= terms:
      break
    if n >= n_max:
      raise errors.NonConvergence(
          f'V series bound {bound:.3e} above tolerance {tol:.3e} after '
          f'{n} terms (s={s}, q={q:.3e})', bound=bound, terms=n)
    increment = _horner(_integrate(poly), s)
    _check_increment('V', increment, bound, n, s, q)
    value = value + increment
    deriv = deriv + _horner(poly, s)
    poly = _integrate(_times_linear(poly, A, B))
    n += 1
    bound = bound * q * abs(s) / n
  return _finish(value, deriv, n, bound, q * abs(s) / (n + 1))


def u_step_grad(args, tol=None):
  return _grad(u_step, args, tol)


def v_step_grad(args, tol=None):
  return _grad(v_step, args, tol)


def _grad(step, args, tol):
  base = step(args, tol)
  partials = []
  for name in ('A', 'B', 'C', 'D'):
    seeded = args.replace(**{name: Dual2(dual.real(getattr(args, name)), 1.0)})
    partials.append(dual.deriv(step(seeded, tol).value))
  return (base.value, base.deriv_s, *partials)


def _moving_end(step, args, tol, terms, n_max, curvature):
  # The step length itself carries a derivative: shift both outputs along s.
  ds = args.s.der
  fixed = step(args.replace(s=args.s.val), tol, terms, n_max)
  value = fixed.value + Dual2(0.0, dual.real(fixed.deriv_s) * ds)
  deriv_s = fixed.deriv_s + Dual2(0.0, curvature(fixed) * ds)
  return StepResult(value, deriv_s, fixed.terms_used, fixed.tail_bound)


def _is_real(*values):
  return not any(isinstance(value, Dual2) for value in values)


def _raise_on(status, name, increment, bound, tol, n, s, q):
  if status == NO_CONVERGENCE:
    raise errors.NonConvergence(
        f'{name} series bound {bound:.3e} above tolerance {tol:.3e} after '
        f'{n} terms (s={s}, q={q:.3e})', bound=bound, terms=n)
  if status == BAD_INCREMENT:
    _check_increment(name, increment, bound, n, s, q)
    raise AssertionError((n, increment, bound))


def _finish(value, deriv, n, bound, ratio):
  tail = bound / (1 - ratio) if ratio < 1 else math.inf
  return StepResult(value, deriv, n, tail)


def _check_increment(name, increment, bound, n, s, q):
  size = dual.norm(increment)
  if math.isnan(bound) or not math.isfinite(size):
    raise errors.NonConvergence(
        f'{name} series increment is {size} after {n} terms '
        f'(s={s}, q={q:.3e})', bound=bound, terms=n)
  assert size <= bound * (1 + 1e-9) + 1e-300, (n, size, bound)


def _check_step(s):
  s = float(s)
  if abs(s) > S_MAX:
    raise errors.InvalidStep(f'Step argument |s| = {abs(s)} exceeds {S_MAX}')
  return s


def _horner(coeffs, s):
  acc = coeffs[-1]
  for coeff in reversed(coeffs[:-1]):
    acc = acc * s + coeff
  return acc


def _times_linear(coeffs, A, B):
  out = [B * coeff for coeff in coeffs] + [0.0]
  for k, coeff in enumerate(coeffs):
    out[k + 1] = out[k + 1] + A * coeff
  return out


def _integrate(coeffs):
  return [0.0] + [coeff / (k + 1) for k, coeff in enumerate(coeffs)]


@njit()
def _horner_array(poly, m, s):
  acc = poly[m - 1]
  for k in range(m - 2, -1, -1):
    acc = acc * s + poly[k]
  return acc


@njit()
def _u_series(A, B, C, D, s, tol, dtol, q, scale, terms, n_max):
  # Same operation order as the list-based loop in u_step, so results match
  # the real parts of a Dual2 run bit for bit.
  poly = np.zeros(3 * n_max + 4)
  work = np.zeros(3 * n_max + 4)
  poly[0] = D
  poly[1] = C
  m = 2
  value, deriv = 0.0, C
  bound, n = scale, 0
  s2 = s * s
  while True:
    dbound = q * abs(s) * bound / (2 * n + 1)
    if terms < 0 and n >= 1 and bound <= tol and dbound <= dtol:
      break
    if terms >= 0 and n >= terms:
      break
    if n >= n_max:
      return NO_CONVERGENCE, value, deriv, n, bound, 0.0
    increment = _horner_array(poly, m, s)
    if (math.isnan(bound) or not math.isfinite(increment) or
        abs(increment) > bound * (1 + 1e-9) + 1e-300):
      return BAD_INCREMENT, value, deriv, n, bound, increment
    value = value + increment
    for k in range(m):
      work[k] = B * poly[k]
    work[m] = 0.0
    for k in range(m):
      work[k + 1] = work[k + 1] + A * poly[k]
    m += 1
    poly[0] = 0.0
    for k in range(m):
      poly[k + 1] = work[k] / (k + 1)
    m += 1
    deriv = deriv + _horner_array(poly, m, s)
    for k in range(m - 1, -1, -1):
      poly[k + 1] = poly[k] / (k + 1)
    poly[0] = 0.0
    m += 1
    n += 1
    bound = bound * q * s2 / ((2 * n - 1) * (2 * n))
  return DONE, value, deriv, n, bound, 0.0


@njit()
def _v_series(A, B, C, D, s, tol, dtol, q, terms, n_max):
  poly = np.zeros(2 * n_max + 3)
  work = np.zeros(2 * n_max + 3)
  poly[0] = C
  m = 1
  value, deriv = D, 0.0
  bound, n = abs(C) * abs(s), 0
  while True:
    dbound = bound / abs(s)
    if terms < 0 and n >= 1 and bound <= tol and dbound <= dtol:
      break
    if terms >= 0 and n >= terms:
      break
    if n >= n_max:
      return NO_CONVERGENCE, value, deriv, n, bound, 0.0
    work[0] = 0.0
    for k in range(m):
      work[k + 1] = poly[k] / (k + 1)
    increment = _horner_array(work, m + 1, s)
    if (math.isnan(bound) or not math.isfinite(increment) or
        abs(increment) > bound * (1 + 1e-9) + 1e-300):
      return BAD_INCREMENT, value, deriv, n, bound, increment
    value = value + increment
    deriv = deriv + _horner_array(poly, m, s)
    for k in range(m):
      work[k] = B * poly[k]
    work[m] = 0.0
    for k in range(m):
      work[k + 1] = work[k + 1] + A * poly[k]
    m += 1
    for k in range(m - 1, -1, -1):
      poly[k + 1] = work[k] / (k + 1)
    poly[0] = 0.0
    m += 1
    n += 1
    bound = bound * q * abs(s) / n
  return DONE, value, deriv, n, bound, 0.0
