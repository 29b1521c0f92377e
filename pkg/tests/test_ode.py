import math

import numpy as np
import pytest

from globalcurves.ode import DEFAULT_EVENT_TOL, Direction, EventSpec, IvpSystem, Status, integrate


def harmonic_oscillator(t, y):
    return (y[1], -y[0])


def test_cosine_root():
    traj = integrate(IvpSystem(harmonic_oscillator, 0.0, (1.0, 0.0), 10.0, (EventSpec(lambda t, y: y[0]),)))
    assert traj.status == Status.EVENT
    assert traj.first_event.t == pytest.approx(math.pi / 2, abs=1e-9)
    assert abs(traj.first_event.y[0]) <= 1e-12


def test_radial_linear_root_matches_sinc():
    eps, alpha = 1e-8, 1.7

    def rhs(r, y):
        return (y[1], -2 / r * y[1] - y[0])

    y0 = (alpha * (1 - eps**2 / 6), -alpha * eps / 3)
    ev = EventSpec(lambda r, y: y[0], Direction.DECREASING, eps)
    traj = integrate(IvpSystem(rhs, eps, y0, 100.0, (ev,)))
    assert traj.first_event.t == pytest.approx(math.pi, abs=1e-7)
    r = np.linspace(0.1, 3.0, 30)
    assert np.allclose(traj.evaluate(r)[:, 0], alpha * np.sin(r) / r, atol=1e-9)


def _rk4_root(rhs, t0, y0, h):
    # classical fixed-step RK4, root by linear interpolation of the bracketing step
    t, y = t0, np.array(y0, float)
    while True:
        k1 = np.array(rhs(t, y))
        k2 = np.array(rhs(t + h / 2, y + h / 2 * k1))
        k3 = np.array(rhs(t + h / 2, y + h / 2 * k2))
        k4 = np.array(rhs(t + h, y + h * k3))
        y1 = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if y1[0] <= 0:
            return t + h * y[0] / (y[0] - y1[0])
        t, y = t + h, y1


def test_exponential_root_matches_fixed_step_rk4():
    eps = 1e-8

    def rhs(r, y):
        return (y[1], -2 / r * y[1] - math.exp(y[0]))

    y0 = (1.0 - math.e * eps**2 / 6, -math.e * eps / 3)
    ev = EventSpec(lambda r, y: y[0], Direction.DECREASING, eps)
    traj = integrate(IvpSystem(rhs, eps, y0, 100.0, (ev,)))
    oracle = _rk4_root(rhs, eps, y0, 1e-5)
    assert traj.first_event.t == pytest.approx(oracle, abs=1e-6)


def test_energy_conserved():
    traj = integrate(IvpSystem(harmonic_oscillator, 0.0, (1.0, 0.0), 20.0), (1e-10, 1e-12))
    t = np.linspace(0, 20, 2001)
    y = traj.evaluate(t)
    assert np.max(np.abs(y[:, 0] ** 2 + y[:, 1] ** 2 - 1)) <= 1e-8


def test_tolerance_halving_moves_event_little():
    ev = (EventSpec(lambda t, y: y[0] - 0.3, Direction.DECREASING),)
    sys_ = IvpSystem(lambda t, y: (y[1], -math.sin(y[0])), 0.0, (2.0, 0.0), 50.0, ev)
    a = integrate(sys_, (1e-10, 1e-12)).first_event.t
    b = integrate(sys_, (5e-11, 5e-13)).first_event.t
    assert abs(a - b) < 10 * DEFAULT_EVENT_TOL


def test_event_not_armed_before_active_after():
    # y' vanishes at t = 0 exactly; arming after t0 hides that trivial root
    ev = EventSpec(lambda t, y: y[1], Direction.ANY, 1e-8)
    traj = integrate(IvpSystem(harmonic_oscillator, 0.0, (1.0, 0.0), 10.0, (ev,)))
    assert traj.first_event.t == pytest.approx(math.pi, abs=1e-9)


def test_event_direction_filters_crossings():
    up = EventSpec(lambda t, y: y[0], Direction.INCREASING)
    traj = integrate(IvpSystem(harmonic_oscillator, 0.0, (1.0, 0.0), 10.0, (up,)))
    assert traj.first_event.t == pytest.approx(1.5 * math.pi, abs=1e-9)


def test_earliest_of_several_events_wins():
    evs = (EventSpec(lambda t, y: y[0] + 0.5), EventSpec(lambda t, y: y[0]))
    traj = integrate(IvpSystem(harmonic_oscillator, 0.0, (1.0, 0.0), 10.0, evs))
    assert traj.first_event.index == 1


def test_runs_to_t_end_without_events():
    traj = integrate(IvpSystem(lambda t, y: (1.0,), 0.0, (0.0,), 3.0))
    assert traj.status == Status.COMPLETED
    assert traj.t_final == 3.0
    assert traj.y_final[0] == pytest.approx(3.0)


def test_blow_up_reports_nonfinite_with_partial_trajectory():
    traj = integrate(IvpSystem(lambda t, y: (y[0] ** 2,), 0.0, (1.0,), 2.0))
    assert traj.status in (Status.NONFINITE, Status.UNDERFLOW)
    assert not traj.ok
    assert traj.t_final < 1.0 + 1e-6
    assert len(traj.t) > 1


def test_dense_output_is_continuous_and_accurate():
    traj = integrate(IvpSystem(harmonic_oscillator, 0.0, (1.0, 0.0), 10.0))
    for tk in traj.t[1:-1]:
        left, right = traj.evaluate(tk - 1e-13), traj.evaluate(tk + 1e-13)
        assert np.allclose(left, right, atol=1e-10)
    t = np.linspace(0, 10, 997)
    assert np.max(np.abs(traj.evaluate(t)[:, 0] - np.cos(t))) < 1e-8


def test_component_and_combination_agree_with_evaluate():
    traj = integrate(IvpSystem(harmonic_oscillator, 0.0, (1.0, 0.5), 6.0))
    c0, mix = traj.component(0), traj.combination([2.0, -1.0])
    for t in np.random.default_rng(1).uniform(0, 6, 50):
        y = traj.evaluate(t)
        assert c0(t) == pytest.approx(y[0], abs=1e-15)
        assert mix(t) == pytest.approx(2 * y[0] - y[1], abs=1e-14)


@pytest.mark.parametrize("tol", [(0, 1e-12), (1e-10, -1)])
def test_rejects_bad_tolerances(tol):
    with pytest.raises(ValueError):
        integrate(IvpSystem(harmonic_oscillator, 0.0, (1.0, 0.0), 1.0), tol)


def test_rejects_empty_interval():
    with pytest.raises(ValueError):
        IvpSystem(harmonic_oscillator, 1.0, (1.0, 0.0), 1.0)
