import math
import pickle
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from globalcurves.expr import ExpressionError
from globalcurves.model import (
    CATALOG,
    CurvePoint,
    Family,
    ProblemSpec,
    SolutionCurve,
    Terminal,
    catalog,
    detect_folds,
    parse_nonlinearity,
    resolve_nonlinearity,
    split_branches,
)


def pts(lams, alphas=None, terminal=Terminal.DIRICHLET_ROOT):
    alphas = range(1, len(lams) + 1) if alphas is None else alphas
    return [CurvePoint(float(a), float(l), terminal) for a, l in zip(alphas, lams)]


def test_identity_nonlinearity():
    g = parse_nonlinearity("u", ("u",))
    assert g.f(0.0, 2.0) == 2.0
    assert g.f_u(0.0, 2.0) == 1.0
    assert g.autonomous and g.f_r is None


def test_oscillatory_derivative():
    g = parse_nonlinearity("u + 0.5*u*sin(u)")
    assert g.f_u(0.0, 0.0) == 1.0
    for u in (0.5, 3.0, 10.0):
        assert g.f_u(0.0, u) == pytest.approx(1 + 0.5 * math.sin(u) + 0.5 * u * math.cos(u), rel=1e-14)


def test_radial_potential_values():
    g = parse_nonlinearity("(1 - 1.1*r^2)*exp(u)", ("r", "u"))
    assert g.f(0.0, 0.0) == 1.0
    assert g.f(1.0, 0.0) == pytest.approx(-0.1, abs=1e-15)
    assert g.f_r(1.0, 0.0) == pytest.approx(-2.2)
    assert not g.autonomous


def test_declaring_r_without_using_it_stays_autonomous():
    assert parse_nonlinearity("exp(u)", ("r", "u")).autonomous


def test_two_independent_variables_rejected():
    with pytest.raises(ExpressionError):
        parse_nonlinearity("u", ("r", "x", "u"))


def test_evaluation_is_pure():
    g = catalog("castro")
    assert [g.f(0.0, 1.3) for _ in range(3)] == [g.f(0.0, 1.3)] * 3


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_derivatives_match_central_differences(name):
    g = catalog(name)
    rng = np.random.default_rng(7)
    for t, u in zip(rng.uniform(0, 1, 100), rng.uniform(0.01, 5, 100)):
        h = 1e-6 * max(1.0, abs(u))
        fd = (g.f(t, u + h) - g.f(t, u - h)) / (2 * h)
        d = g.f_u(t, u)
        assert abs(d - fd) / max(1.0, abs(d)) <= 1e-6, (name, u)


def test_catalog_matches_parsed_expression():
    pairs = [
        ("oscillatory", "u + 0.5*u*sin(u)", ("u",)),
        ("cubic", "u*(u-1)*(7-u)", ("u",)),
        ("gelfand_potential", "(1 - 1.1*r^2)*exp(u)", ("r", "u")),
        ("perturbed_gelfand", "exp(5*u/(5+u))", ("u",)),
        ("castro", "6*u/(1+u+2*u^2)", ("u",)),
        ("lin_ni", "u^4 + u^7", ("u",)),
    ]
    for name, text, variables in pairs:
        a, b = catalog(name), parse_nonlinearity(text, variables)
        for t, u in [(0.2, 0.4), (0.7, 2.5)]:
            assert a.f(t, u) == pytest.approx(b.f(t, u), rel=1e-14)
            assert a.f_u(t, u) == pytest.approx(b.f_u(t, u), rel=1e-12)


def test_resolve_catalog_reference():
    g = resolve_nonlinearity("@linear(c=2)")
    assert g.f(0.0, 3.0) == 6.0
    assert resolve_nonlinearity("@lin_ni(q=3)").f(0.0, 2.0) == 2**3 + 2**5
    assert resolve_nonlinearity("u^2").f(0.0, 3.0) == 9.0
    with pytest.raises(KeyError):
        resolve_nonlinearity("@nope")
    with pytest.raises(ValueError):
        resolve_nonlinearity("@linear(2)")


@pytest.mark.parametrize("g", [catalog("perturbed_gelfand", a=4.0), parse_nonlinearity("(1-r^2)*exp(u)", ("r", "u"))])
def test_nonlinearities_pickle(g):
    h = pickle.loads(pickle.dumps(g))
    assert h.f(0.3, 1.2) == g.f(0.3, 1.2)
    assert h.f_u(0.3, 1.2) == g.f_u(0.3, 1.2)


def test_problem_spec_invariants():
    g = catalog("exp")
    with pytest.raises(ValueError):
        ProblemSpec(Family.RADIAL_DIRICHLET, g, n=0)
    with pytest.raises(ValueError):
        ProblemSpec(Family.PLAPLACE_DIRICHLET, g, p=1.0)
    with pytest.raises(ValueError):
        ProblemSpec(Family.HARMONIC_FORCED, g, k=3)
    with pytest.raises(ValueError):
        ProblemSpec(Family.RADIAL_DIRICHLET, catalog("gelfand_potential"))


def test_condition_check_flags_increasing_potential():
    good = ProblemSpec(Family.NONAUTONOMOUS_RADIAL, parse_nonlinearity("(1-0.5*r^2)*exp(u)", ("r", "u")), n=3)
    assert good.check_conditions() == []
    bad = ProblemSpec(Family.NONAUTONOMOUS_RADIAL, parse_nonlinearity("(1+r^2)*exp(u)", ("r", "u")), n=3)
    with pytest.warns(UserWarning, match="f_r"):
        assert bad.check_conditions()


# -- branch splitting -------------------------------------------------------


def test_split_on_explicit_jump():
    c = split_branches(pts([1.0, 1.1, 9.0, 9.1]), jump=2)
    assert c.branches == ((0, 2), (2, 4))


def test_monotone_sequence_single_branch():
    c = split_branches(pts(np.linspace(1, 50, 40)), jump=100)
    assert c.branches == ((0, 40),)
    assert split_branches(pts(np.linspace(1, 50, 40))).branches == ((0, 40),)


def test_split_on_terminal_change():
    p = pts([1, 2, 3]) + pts([4, 5], alphas=[4, 5], terminal=Terminal.NEUMANN_CRITICAL)
    assert split_branches(p).branches == ((0, 3), (3, 5))


def test_split_on_missing_grid_points():
    p = pts([1, 1.1, 1.2, 1.3], alphas=[1, 2, 3, 4]) + pts([1.4, 1.5], alphas=[8, 9])
    assert split_branches(p).branches == ((0, 4), (4, 6))


def test_default_threshold_cuts_a_jump():
    lams = [10, 10.2, 10.4, 10.6, 10.8, 60, 60.1, 60.2]
    assert split_branches(pts(lams)).branches == ((0, 5), (5, 8))


def test_empty_input():
    c = split_branches([])
    assert len(c) == 0 and c.branches == ()


@given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=0, max_size=40), st.one_of(st.none(), st.floats(0.01, 100)))
@settings(max_examples=200, deadline=None)
def test_split_preserves_points(lams, jump):
    p = pts(lams)
    c = split_branches(p, jump)
    merged = [q for i in range(len(c.branches)) for q in c.branch(i)]
    assert Counter(merged) == Counter(p)
    # branches tile the index range in order
    ends = [0] + [hi for _, hi in c.branches]
    assert [lo for lo, _ in c.branches] == ends[:-1]
    assert ends[-1] == len(p)


# -- folds ------------------------------------------------------------------


def test_parabola_has_one_fold_at_vertex():
    a = np.linspace(0, 2, 21)
    c = split_branches(pts((a - 1) ** 2, a), jump=10)
    folds = detect_folds(c)
    assert len(folds) == 1
    assert folds[0].alpha == pytest.approx(1.0, abs=1e-12)
    assert folds[0].lam == pytest.approx(0.0, abs=1e-12)


def test_refined_fold_off_grid():
    a = np.linspace(0, 2, 11)
    c = split_branches(pts(-((a - 0.93) ** 2), a), jump=10)
    (fold,) = detect_folds(c)
    assert fold.alpha == pytest.approx(0.93, abs=1e-12)


def test_constant_curve_has_no_folds():
    lam = np.pi**2 + 1e-12 * np.sin(np.arange(10))
    assert detect_folds(split_branches(pts(lam))) == []


def test_s_curve_two_folds():
    a = np.linspace(-2, 2, 41)
    lam = a**3 - 2 * a
    assert len(detect_folds(split_branches(pts(lam, a), jump=100))) == 2


def test_folds_need_three_points():
    c = SolutionCurve(tuple(pts([1, 2])), ((0, 2),))
    assert detect_folds(c) == []
