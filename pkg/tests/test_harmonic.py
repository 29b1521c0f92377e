import math

import numpy as np
import pytest

from globalcurves.harmonic import (
    SingularSystem,
    continue_in_xi,
    find_mu_roots,
    linear_solve,
    newton_at_xi,
    profile,
    shooting_defect,
    solve_at,
)
from globalcurves.model import Family, NewtonFailed, ProblemSpec, catalog

X = np.linspace(0, math.pi, 101)


def forced(f, e=None, k=1):
    return ProblemSpec(Family.HARMONIC_FORCED, f, forcing=e, k=k)


def zero(x):
    return 0.0


def test_pure_forcing_closed_form():
    s = linear_solve(zero, zero, 1.0)
    assert s.mu == pytest.approx(-2 / math.pi, abs=1e-9)
    assert np.allclose(s.values(X), 2 / math.pi * np.sin(X), atol=1e-9)


def test_resonant_coefficient_two_closed_form():
    s = linear_solve(lambda x: 2.0, zero, math.pi / 2)
    assert s.mu == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(s.values(X), np.sin(X), atol=1e-9)


def test_orthogonal_forcing_closed_form():
    s = linear_solve(zero, lambda x: math.sin(2 * x), 0.0)
    assert s.mu == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(s.values(X), -np.sin(2 * X) / 4, atol=1e-9)


def test_second_harmonic_constraint():
    s = linear_solve(zero, zero, 0.7, k=2)
    assert s.harmonic() == pytest.approx(0.7, abs=1e-12)
    assert abs(s.values(math.pi)) < 1e-12
    assert s.mu == pytest.approx(-8 * 0.7 / math.pi, abs=1e-9)
    assert np.allclose(s.values(X), -s.mu / 4 * np.sin(2 * X), atol=1e-9)


def test_tighter_tolerance_sharpens_linear_solve():
    s = linear_solve(zero, zero, 1.0, tol=(1e-13, 1e-15))
    assert s.mu == pytest.approx(-2 / math.pi, abs=1e-12)


def test_resonance_detected():
    # a = 4: the homogeneous solution sin(2x)/2 vanishes at pi and is orthogonal to sin x
    with pytest.raises(SingularSystem):
        linear_solve(lambda x: 4.0, zero, 1.0)
    with pytest.raises(SingularSystem):
        linear_solve(lambda x: 4.0, zero, 1.0, tol=(1e-13, 1e-15))
    # near but off resonance the system is solvable
    assert linear_solve(lambda x: 3.9, zero, 1.0).mu == pytest.approx(2 * 2.9 / math.pi, rel=1e-8)


def test_bad_harmonic_index():
    with pytest.raises(ValueError):
        linear_solve(zero, zero, 1.0, k=3)


def test_linear_line():
    p = forced(catalog("linear", c=2.0))
    c = continue_in_xi(p, -2.0, 0.5, 8)
    xi = c.alphas
    assert np.allclose(c.lambdas, 2 * xi / math.pi, atol=1e-10)
    roots = find_mu_roots(p, c)
    assert len(roots) == 1
    assert roots[0].xi == pytest.approx(0.0, abs=1e-9)


@pytest.fixture(scope="module")
def tilt_curve():
    p = forced(catalog("sin"), catalog("tilt"))
    return p, continue_in_xi(p, -3.0, 0.5, 11)


def test_constraint_and_boundary_values(tilt_curve):
    p, c = tilt_curve
    for q, s in zip(c.points, c.meta["solutions"]):
        assert abs(s.harmonic() - q.alpha) <= 1e-9
        assert abs(s.values(0.0)) <= 1e-12
        assert abs(s.values(math.pi)) <= 1e-9
        assert q.newton.converged


def test_quadrature_refinement(tilt_curve):
    _, c = tilt_curve
    for s in c.meta["solutions"][::3]:
        assert abs(s.harmonic(64) - s.harmonic(128)) <= 1e-10


def test_solutions_pass_independent_shooting_check(tilt_curve):
    p, c = tilt_curve
    for s in c.meta["solutions"][::4]:
        assert shooting_defect(p, s.mu, s.uprime0, s.scalar()) <= 1e-7


def test_mu_decreasing_for_sine(tilt_curve):
    # differentiating in xi gives mu' = -int w'^2 + int cos(u) w^2 < 0
    _, c = tilt_curve
    assert np.all(np.diff(c.lambdas) < 0)
    assert len(find_mu_roots(*tilt_curve)) == 1


def test_first_guess_strategies():
    p = forced(catalog("castro"), k=2)
    s = solve_at(p, 0.85, None, "sin2x")
    t = solve_at(p, -0.85, None, "-sin2x")
    # sign-flipped starts give the mirror-image family
    assert s.mu == pytest.approx(-t.mu, abs=1e-8)


def test_newton_failure_when_steps_exhausted():
    p = forced(catalog("castro"))
    with pytest.raises(NewtonFailed) as info:
        newton_at_xi(p, 1.0, lambda x: 0.0, steps=1, max_steps=1, residual_tol=0.0)
    assert info.value.report.steps == 1


def test_sweep_records_failures(monkeypatch):
    import globalcurves.harmonic as hm

    real = hm.newton_at_xi

    def flaky(problem, xi, u0, **kw):
        if abs(xi - 1.0) < 1e-12:
            raise NewtonFailed("injected")
        return real(problem, xi, u0, **kw)

    monkeypatch.setattr(hm, "newton_at_xi", flaky)
    c = hm.continue_in_xi(forced(catalog("linear", c=2.0)), 0.0, 0.5, 3)
    assert [x for x, _ in c.meta["failed"]] == [1.0]
    assert len(c) == 2


def test_validation():
    p = forced(catalog("sin"))
    with pytest.raises(ValueError):
        continue_in_xi(p, 0.0, 0.1, 2, strategy="cold")
    with pytest.raises(ValueError):
        continue_in_xi(ProblemSpec(Family.RADIAL_DIRICHLET, catalog("exp")), 0.0, 0.1, 2)


def test_profile_linear():
    x, u, s = profile(forced(catalog("linear", c=2.0)), math.pi / 2)
    assert len(x) == 401
    # mu = 2 xi / pi = 1 and u'' + 2u = sin x gives u = sin x
    assert np.allclose(u, np.sin(x), atol=1e-10)
