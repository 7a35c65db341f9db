class SolverError(Exception):
  pass


class ConfigError(SolverError, ValueError):
  pass


class InvalidStep(SolverError, ValueError):
  pass


class NonConvergence(SolverError, ArithmeticError):

  def __init__(self, message, bound=None, terms=None):
    super().__init__(message)
    self.bound = bound
    self.terms = terms


class StepFunctionFailure(SolverError):

  def __init__(self, message, knot=None):
    super().__init__(message)
    self.knot = knot


class BlowUp(SolverError):

  def __init__(self, message, knot, trace=None):
    super().__init__(message)
    self.knot = knot
    self.trace = trace


class BudgetExhausted(SolverError):

  def __init__(self, message, trace=None):
    super().__init__(message)
    self.trace = trace


class BadBracket(SolverError):
  pass


class SingularJacobian(SolverError):
  pass


class DivergenceDetected(SolverError):
  pass


class MaxSweepsExceeded(SolverError):

  def __init__(self, message, mesh, residual_norm):
    super().__init__(message)
    self.mesh = mesh
    self.residual_norm = residual_norm


class DivergentIntegral(SolverError, ArithmeticError):
  pass


class NoRoot(SolverError):
  pass


class PreconditionFailed(SolverError):
  pass
