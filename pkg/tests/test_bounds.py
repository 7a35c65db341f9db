import math

import numpy as np
import pytest
from scipy import integrate
from scipy import special

from sibvp import bounds
from sibvp import errors
from sibvp import ivp
from sibvp import problem as problem_lib

SLOPE = 0.518621219269


class TestConstants:

  def test_worked_example(self):
    constants = bounds.compute_constants(problem_lib.troesch(2.0), SLOPE, 0.1)
    assert constants.S_star == 1.0
    assert constants.M_star == pytest.approx(0.5654221730, rel=1e-6)
    assert constants.L0 == pytest.approx(5.289849576, rel=1e-6)
    assert constants.L1 == pytest.approx(4.218574488, rel=1e-6)
    assert constants.L2 == pytest.approx(8.48000570, rel=1e-6)

  @pytest.mark.parametrize('h,reference', ((1e-4, 1675.2), (1e-5, 1673.5)))
  def test_step_dependent_constant(self, h, reference):
    constants = bounds.compute_constants(problem_lib.troesch(2.0), SLOPE, 0.1)
    assert bounds.compute_P_star(h, constants) == pytest.approx(reference, rel=5e-3)

  def test_original_variant(self):
    problem = problem_lib.troesch(2.0)
    constants = bounds.compute_constants(problem, SLOPE, 0.1)
    M = bounds.compute_M_star(problem, 0.1, 0.0, SLOPE, variant='original', S_star=1.0)
    assert M == pytest.approx(0.5 * (1.3 - SLOPE))
    P = constants.P_star(1e-4, variant='original')
    assert math.isfinite(P) and P > 0

  def test_restrictions(self):
    constants = bounds.compute_constants(problem_lib.troesch(2.0), SLOPE, 0.1)
    assert constants.h_restrictions(1e-4, mu=2.0) == {'first': True, 'second': True}
    assert constants.h_restrictions(1e-3, mu=2.0) == {'first': True, 'second': False}
    assert constants.i_star_bound_ok(1e-4, mu=2.0)
    report = constants.report(1e-4, mu=2.0)
    assert report['h_restrictions_satisfied']
    assert report['straight_phase_bound'] == pytest.approx(1e-8 * report['P_star_at_h'])

  @pytest.mark.parametrize('epsilon', (0.0, 1 / 6, 0.5))
  def test_invalid_epsilon(self, epsilon):
    with pytest.raises(errors.ConfigError):
      bounds.compute_constants(problem_lib.troesch(2.0), SLOPE, epsilon)

  @pytest.mark.parametrize('problem', (
      problem_lib.troesch(2.0), problem_lib.quadratic(1.0),
      problem_lib.constant(3.0)))
  def test_level_set(self, problem):
    M = bounds.compute_M_star(problem, 0.1, 0.0, SLOPE)
    target = ((1 + 3 * 0.1) ** 2 - SLOPE ** 2) / 2
    assert M > 0
    assert abs(problem.phi(M, 0.0) - target) <= 1e-12


class TestBlowUpIntegral:

  def test_troesch_pole(self):
    problem = problem_lib.troesch(2.0)
    value = bounds.compute_S_star(problem, 0.0, SLOPE)
    reference = special.ellipk(1 - SLOPE ** 2 / 4) / 2
    assert value == pytest.approx(reference, rel=1e-9)
    assert value == pytest.approx(problem_lib.troesch_pole(2.0, SLOPE), abs=2e-2)

  def test_clamped(self):
    problem = problem_lib.troesch(2.0)
    assert bounds.compute_S_star(problem, 0.0, SLOPE, b=1.0) == 1.0

  def test_algebraic_tail(self):
    problem = problem_lib.quadratic(1.0)
    integrand = lambda u: 1 / math.sqrt(1 + u * u + u ** 4 / 2)
    reference, _ = integrate.quad(integrand, 0, np.inf, epsabs=0, epsrel=1e-12)
    value = bounds.compute_S_star(problem, 0.0, 1.0)
    assert value == pytest.approx(reference, rel=1e-8)

  def test_divergent(self):
    with pytest.raises(errors.DivergentIntegral):
      bounds.compute_S_star(problem_lib.constant(1.0), 0.0, 1.0)

  def test_nonpositive_slope(self):
    with pytest.raises(errors.PreconditionFailed):
      bounds.compute_S_star(problem_lib.troesch(2.0), 0.0, 0.0)


class TestSupremum:

  def test_constant(self):
    assert bounds.compute_L(problem_lib.constant(3.0), 0.5, 0.1) == (3.0, 0.0, 0.0)

  def test_ratio_of_constant_problem(self):
    mu = bounds.compute_mu(problem_lib.constant(1.0), 0.0, 5.0)
    assert mu.value == pytest.approx(math.sqrt(2) / 2, rel=1e-8)
    assert mu.at == pytest.approx(math.sqrt(2), rel=1e-4)
    assert mu.trend == 'decreasing'
    assert mu.truncated
    assert float(mu) == mu.value

  def test_ratio_of_troesch(self):
    mu = bounds.compute_mu(problem_lib.troesch(2.0), 0.4, 10.4)
    assert 1.9 <= mu.value <= 2.5

  def test_empty_range(self):
    with pytest.raises(errors.ConfigError):
      bounds.compute_mu(problem_lib.troesch(2.0), 1.0, 1.0)

  def test_hypotheses(self):
    checks = bounds.check_hypotheses(problem_lib.troesch(2.0), 0.0, 1.0)
    assert all(checks.values())
    checks = bounds.check_hypotheses(problem_lib.linear(), 0.0, 1.0)
    assert not checks['N_positive']


class TestSoundness:

  @pytest.mark.parametrize('h', (2e-4, pytest.param(1e-4, marks=pytest.mark.slow)))
  def test_bounds_dominate_errors(self, h):
    problem = problem_lib.troesch(2.0)
    constants = bounds.compute_constants(problem, SLOPE, 0.1)
    trace = ivp.si_march(problem, 0.0, SLOPE, h, ivp.StopRule(1.0))
    i_star = trace.i_star
    samples = np.linspace(0, i_star, 40).astype(int)
    exact, _ = bounds.oracle_u(problem, SLOPE, trace.xs[samples])
    observed = np.abs(trace.us[samples] - exact)
    assert observed.max() <= bounds.straight_phase_bound(constants, h)
    assert observed.max() <= 1e-5
    inverse = bounds.inverse_phase_bound(problem, constants, trace, h)
    exact_x, exact_dx = bounds.inverse_solution(problem, SLOPE, inverse.u)
    assert np.all(np.abs(inverse.x - exact_x) <= inverse.x_err)
    dxs = trace.dxs[i_star + 1:]
    assert np.all(np.abs(dxs - exact_dx) <= inverse.xp_err)
    assert np.all(np.diff(inverse.x_err) >= 0)

  def test_coarse_step_rejected(self):
    problem = problem_lib.troesch(2.0)
    constants = bounds.compute_constants(problem, SLOPE, 0.1)
    trace = ivp.si_march(problem, 0.0, SLOPE, 1e-3, ivp.StopRule(1.0))
    with pytest.raises(errors.PreconditionFailed):
      bounds.inverse_phase_bound(problem, constants, trace, 1e-3)

  @pytest.mark.slow
  def test_bounds_scale_with_step(self):
    problem = problem_lib.troesch(2.0)
    constants = bounds.compute_constants(problem, SLOPE, 0.1)
    finals = []
    for h in (2e-4, 1e-4):
      trace = ivp.si_march(problem, 0.0, SLOPE, h, ivp.StopRule(1.0))
      inverse = bounds.inverse_phase_bound(problem, constants, trace, h)
      finals.append((inverse.x_err[-1], inverse.xp_err[-1]))
    (x_coarse, xp_coarse), (x_fine, xp_fine) = finals
    assert 3.5 <= x_coarse / x_fine <= 4.5
    assert 3.5 <= xp_coarse / xp_fine <= 4.5


class TestOracle:

  def test_inverse_solution(self):
    problem = problem_lib.constant(4.0)
    us = np.array([0.5, 0.1, 1.0])
    x, dx = bounds.inverse_solution(problem, 0.5, us)
    assert np.allclose(x, np.arcsinh(2 * us / 0.5) / 2, rtol=1e-10)
    assert np.allclose(dx, 1 / np.sqrt(0.25 + 4 * us ** 2), rtol=1e-12)

  def test_oracle_u(self):
    problem = problem_lib.constant(4.0)
    xs = np.array([0.0, 0.3, 0.9])
    u, du = bounds.oracle_u(problem, 0.5, xs)
    assert np.allclose(u, 0.5 * np.sinh(2 * xs) / 2, rtol=1e-10, atol=1e-14)
    assert np.allclose(du, 0.5 * np.cosh(2 * xs), rtol=1e-10)
