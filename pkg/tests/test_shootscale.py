import math

import numpy as np
import pytest

from globalcurves.model import Family, ProblemSpec, Terminal, catalog, detect_folds, parse_nonlinearity
from globalcurves.ode import IvpSystem, integrate
from globalcurves.shootscale import ShootKind, dirichlet_curve, neumann_curve, profile, shoot

PI2 = math.pi**2


def dirichlet(f, n):
    return ProblemSpec(Family.RADIAL_DIRICHLET, f, n=n)


def neumann(f, n):
    return ProblemSpec(Family.RADIAL_NEUMANN, f, n=n)


def test_constant_source_quadratic_closed_form():
    res = shoot(dirichlet(catalog("one"), 1), 2.0)
    assert res.kind == ShootKind.V_ROOT
    assert res.r_star == pytest.approx(2.0, abs=1e-10)
    assert res.lam == pytest.approx(4.0, abs=1e-9)


def test_linear_source_sinc_closed_form():
    res = shoot(dirichlet(catalog("linear"), 3), 5.0)
    assert res.r_star == pytest.approx(math.pi, abs=1e-9)
    assert res.lam == pytest.approx(PI2, abs=1e-8)


def test_cubic_neumann_root_near_linearized_eigenvalue():
    res = shoot(neumann(catalog("cubic"), 1), 0.9)
    assert res.kind == ShootKind.VPRIME_ROOT
    assert res.v_star > 0
    # linearization at u = 1 with f'(1) = 6 gives lam = pi^2 / 6
    lam = [shoot(neumann(catalog("cubic"), 1), a).lam for a in (0.999, 1.001)]
    assert lam == pytest.approx([PI2 / 6] * 2, abs=2e-3)


def test_no_event_when_cap_reached():
    res = shoot(dirichlet(catalog("zero"), 3), 1.0, tend=5.0)
    assert res.kind == ShootKind.NO_EVENT and res.lam is None


def test_alpha_must_be_positive():
    with pytest.raises(ValueError):
        shoot(dirichlet(catalog("exp"), 3), 0.0)


def test_shoot_rejects_other_families():
    with pytest.raises(ValueError):
        shoot(ProblemSpec(Family.PLAPLACE_DIRICHLET, catalog("exp"), p=3), 1.0)


def test_linear_curve_constant():
    c = dirichlet_curve(dirichlet(catalog("linear"), 3), 0.0, 1.0, 10)
    assert len(c) == 10
    assert np.allclose(c.lambdas, PI2, atol=1e-6)
    assert detect_folds(c) == []


def _bvp_residual(problem, alpha, lam, eps=1e-8):
    f, n = problem.nonlinearity.f, problem.n
    fa = f(0.0, alpha)

    def rhs(r, y):
        return (y[1], -(n - 1) / r * y[1] - lam * f(r, y[0]))

    y0 = (alpha - lam * fa * eps**2 / (2 * n), -lam * fa * eps / n)
    return integrate(IvpSystem(rhs, eps, y0, 1.0)).y_final


@pytest.mark.parametrize("name,n,alpha", [("exp", 3, 1.0), ("oscillatory", 3, 7.0), ("castro", 2, 0.5), ("perturbed_gelfand", 1, 4.0)])
def test_scaled_solution_satisfies_bvp(name, n, alpha):
    p = dirichlet(catalog(name), n)
    res = shoot(p, alpha)
    assert abs(_bvp_residual(p, alpha, res.lam)[0]) <= 1e-6


def test_neumann_point_satisfies_scaled_bvp():
    p = neumann(catalog("cubic"), 5)
    res = shoot(p, 2.0)
    assert res.kind == ShootKind.VPRIME_ROOT
    u1, du1 = _bvp_residual(p, 2.0, res.lam)
    assert abs(du1) <= 1e-6
    assert u1 == pytest.approx(res.v_star, abs=1e-6)


def test_profile_is_decreasing_when_f_positive():
    p = dirichlet(catalog("exp"), 3)
    res = shoot(p, 2.0, keep_trajectory=True)
    r = np.linspace(res.eps * 2, res.r_star, 500)
    assert np.all(res.trajectory.evaluate(r)[:, 1] < 0)


@pytest.mark.parametrize("name,alpha", [("exp", 1.0), ("oscillatory", 12.0), ("castro", 0.3)])
def test_eps_robustness(name, alpha):
    p = dirichlet(catalog(name), 3)
    a = shoot(p, alpha, eps=1e-8).lam
    b = shoot(p, alpha, eps=1e-9).lam
    assert abs(a - b) <= 1e-8 * abs(a)


def test_curve_alphas_unique_and_sorted():
    c = dirichlet_curve(dirichlet(catalog("exp"), 3), 0.0, 0.5, 20)
    for i in range(len(c.branches)):
        a, _ = c.branch_arrays(i)
        assert np.all(np.diff(a) > 0)
    assert len(set(c.alphas)) == len(c)


def test_parallel_sweep_matches_serial():
    p = dirichlet(parse_nonlinearity("u + 0.5*u*sin(u)"), 3)
    a = dirichlet_curve(p, 0.0, 0.5, 12)
    b = dirichlet_curve(p, 0.0, 0.5, 12, jobs=3)
    assert [q.lam for q in a.points] == [q.lam for q in b.points]
    assert a.branches == b.branches


def test_rejected_points_recorded():
    c = dirichlet_curve(dirichlet(catalog("cubic"), 1), 0.0, 0.25, 8)
    kinds = {k for _, k, _ in c.meta["rejected"]}
    assert ShootKind.VPRIME_ROOT.value in kinds
    assert all(q.terminal == Terminal.DIRICHLET_ROOT for q in c.points)


def test_neumann_degenerate_equilibrium_skipped():
    c = neumann_curve(neumann(catalog("cubic"), 1), 0.5, 0.25, 4)
    assert c.meta["degenerate"] == [1.0]
    assert 1.0 not in c.alphas
    assert all(q.terminal == Terminal.NEUMANN_CRITICAL for q in c.points)


def test_supercritical_mode_runs_past_v_prime_roots():
    p = dirichlet(catalog("lin_ni", q=4), 3)
    res = shoot(p, 1.0, supercritical=True)
    assert res.kind == ShootKind.WENT_NEGATIVE
    plain = shoot(p, 1.0)
    assert plain.kind == ShootKind.V_ROOT
    assert res.lam == pytest.approx(plain.lam, rel=1e-9)


def test_profile_sinc():
    r, u, lam = profile(dirichlet(catalog("linear"), 3), 2.0)
    assert len(r) == 401
    expected = 2 * np.sinc(r)  # numpy sinc is sin(pi r)/(pi r)
    assert np.max(np.abs(u - expected)) < 1e-8
    assert lam == pytest.approx(PI2, abs=1e-8)


def test_profile_requires_matching_event():
    with pytest.raises(ValueError):
        profile(neumann(catalog("linear"), 3), 1.0)
