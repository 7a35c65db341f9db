"""Dual numbers over the 2x2 Jordan algebra.

A ``Dual2(val, der)`` stands for the matrix ``val * E + der * J`` with
``J = [[0, 1], [0, 0]]``. Evaluating an analytic function on it yields the
pair ``(f(val), der * f'(val))``, which is how the step functions are
differentiated with respect to one seeded parameter at a time. Plain floats
are the sub-algebra with zero derivative part, and every function in this
module accepts both.
"""

import math

import numpy as np


class Dual2:

  __slots__ = ('val', 'der')
  __array_ufunc__ = None

  def __init__(self, val, der=0.0):
    if isinstance(val, Dual2):
      val, der = val.val, val.der + der
    object.__setattr__(self, 'val', float(val))
    object.__setattr__(self, 'der', float(der))

  def __setattr__(self, name, value):
    raise AttributeError('Dual2 is immutable')

  def __repr__(self):
    return f'Dual2({self.val!r}, {self.der!r})'

  def __iter__(self):
    return iter((self.val, self.der))

  def __add__(self, other):
    if isinstance(other, Dual2):
      return Dual2(self.val + other.val, self.der + other.der)
    return Dual2(self.val + other, self.der)

  __radd__ = __add__

  def __sub__(self, other):
    if isinstance(other, Dual2):
      return Dual2(self.val - other.val, self.der - other.der)
    return Dual2(self.val - other, self.der)

  def __rsub__(self, other):
    return Dual2(other - self.val, -self.der)

  def __mul__(self, other):
    if isinstance(other, Dual2):
      return Dual2(
          self.val * other.val, self.val * other.der + self.der * other.val)
    return Dual2(self.val * other, self.der * other)

  __rmul__ = __mul__

  def __truediv__(self, other):
    if isinstance(other, Dual2):
      if other.val == 0:
        raise ZeroDivisionError('dual division by zero value part')
      return Dual2(
          self.val / other.val,
          (self.der * other.val - self.val * other.der) / other.val ** 2)
    return Dual2(self.val / other, self.der / other)

  def __rtruediv__(self, other):
    if self.val == 0:
      raise ZeroDivisionError('dual division by zero value part')
    return Dual2(other / self.val, -other * self.der / self.val ** 2)

  def __pow__(self, exponent):
    assert isinstance(exponent, int) and exponent >= 0, exponent
    result = Dual2(1.0)
    for _ in range(exponent):
      result = result * self
    return result

  def __neg__(self):
    return Dual2(-self.val, -self.der)

  def __pos__(self):
    return self

  def __abs__(self):
    return abs(self.val)

  def __float__(self):
    return self.val

  def __eq__(self, other):
    if isinstance(other, Dual2):
      return self.val == other.val and self.der == other.der
    if isinstance(other, (int, float)):
      return self.val == other and self.der == 0
    return NotImplemented

  def __hash__(self):
    if self.der == 0:
      return hash(self.val)
    return hash((self.val, self.der))

  def __lt__(self, other):
    return self.val < real(other)

  def __le__(self, other):
    return self.val <= real(other)

  def __gt__(self, other):
    return self.val > real(other)

  def __ge__(self, other):
    return self.val >= real(other)

  def exp(self):
    value = math.exp(self.val)
    return Dual2(value, self.der * value)

  def matrix(self):
    return np.array([[self.val, self.der], [0.0, self.val]])

  @classmethod
  def from_matrix(cls, matrix):
    matrix = np.asarray(matrix)
    assert matrix.shape == (2, 2), matrix.shape
    assert matrix[1, 0] == 0 and matrix[0, 0] == matrix[1, 1], matrix
    return cls(matrix[0, 0], matrix[0, 1])


def dual_add(a, b):
  return Dual2(a) + Dual2(b)


def dual_mul(a, b):
  return Dual2(a) * Dual2(b)


def dual_div(a, b):
  return Dual2(a) / Dual2(b)


def dual_exp(a):
  return Dual2(a).exp()


def exp(x):
  if isinstance(x, Dual2):
    return x.exp()
  return math.exp(x)


def real(x):
  if isinstance(x, Dual2):
    return x.val
  return float(x)


def deriv(x):
  if isinstance(x, Dual2):
    return x.der
  return 0.0


def norm(x):
  # Induced norm of val * E + der * J, submultiplicative on the algebra.
  if isinstance(x, Dual2):
    return abs(x.val) + abs(x.der)
  return abs(x)


def seed(x, active=True):
  return Dual2(real(x), 1.0 if active else 0.0)


def isdual(*xs):
  return any(isinstance(x, Dual2) for x in xs)
