"""Clamped beam ``u'''' = lam f(x, u)`` on (-1, 1), ``u(+-1) = u'(+-1) = 0``.

Positive solutions are even, so the half problem on [0, 1] is shot from
``u(0) = alpha``, ``u'(0) = 0``, ``u''(0) = beta``, ``u'''(0) = 0`` and the pair
``(lam, beta)`` is found by 2-d Newton on ``F = u(1) = 0``, ``G = u'(1) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    CurvePoint,
    Family,
    NewtonFailed,
    NewtonReport,
    Nonlinearity,
    ProblemSpec,
    SingularJacobian,
    SolutionCurve,
    Terminal,
    split_branches,
)
from .newton import MAX_HALVINGS, MAX_ITER, damped_newton
from .ode import DEFAULT_ATOL, DEFAULT_RTOL, DenseTrajectory, IvpSystem, integrate
from .quadrature import nodes_weights

DET_GUARD = 1e-14
BLOWUP_CAP = 1e6


@dataclass
class BeamState:
    alpha: float
    lam: float
    beta: float
    jacobian: np.ndarray
    report: NewtonReport

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.jacobian))


def _nl(f) -> Nonlinearity:
    if isinstance(f, ProblemSpec):
        return f.nonlinearity
    return f


def beam_ivp(lam: float, beta: float, alpha: float, f, *, tol=(DEFAULT_RTOL, DEFAULT_ATOL)) -> DenseTrajectory:
    """``(u, u', u'', u''')`` on [0, 1]."""
    g = _nl(f).f

    def rhs(x, y):
        return (y[1], y[2], y[3], lam * g(x, y[0]))

    return integrate(IvpSystem(rhs, 0.0, (alpha, 0.0, beta, 0.0), 1.0), tol)


def beam_residual(lam: float, beta: float, alpha: float, f, **opts) -> tuple[float, float]:
    """``(F, G) = (u(1), u'(1))``."""
    traj = beam_ivp(lam, beta, alpha, f, **opts)
    if not traj.ok:
        raise ArithmeticError(f"beam IVP failed: {traj.message}")
    return float(traj.y_final[0]), float(traj.y_final[1])


def beam_residual_by_quadrature(lam: float, beta: float, alpha: float, f, panels: int = 64, **opts) -> tuple[float, float]:
    """``(F, G)`` from ``u(1) = alpha + beta/2 + lam int (1-t)^3/6 f``, ``u'(1) = beta + lam int (1-t)^2/2 f``."""
    g = _nl(f).f
    traj = beam_ivp(lam, beta, alpha, f, **opts)
    if not traj.ok:
        raise ArithmeticError(f"beam IVP failed: {traj.message}")
    t, w = nodes_weights(0.0, 1.0, panels)
    ut = traj.evaluate(t)[:, 0]
    ft = np.array([g(a, b) for a, b in zip(t, ut)])
    F = alpha + beta / 2 + lam * float(np.dot(w, (1 - t) ** 3 / 6 * ft))
    G = beta + lam * float(np.dot(w, (1 - t) ** 2 / 2 * ft))
    return F, G


def beam_jacobian(lam: float, beta: float, alpha: float, f, u: DenseTrajectory, *, tol=(DEFAULT_RTOL, DEFAULT_ATOL)) -> np.ndarray:
    """``((F_lam, F_beta), (G_lam, G_beta))`` from the variational IVPs along ``u``."""
    g = _nl(f)
    uu = u.component(0)

    def rhs(x, y):
        w = uu(x)
        fu = lam * g.f_u(x, w)
        return (y[1], y[2], y[3], g.f(x, w) + fu * y[0], y[5], y[6], y[7], fu * y[4])

    traj = integrate(IvpSystem(rhs, 0.0, (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0), 1.0), tol)
    if not traj.ok:
        raise ArithmeticError(f"variational IVP failed: {traj.message}")
    y = traj.y_final
    return np.array([[y[0], y[4]], [y[1], y[5]]])


def _coupled(lam, beta, alpha, g: Nonlinearity, tol):
    f, f_u = g.f, g.f_u

    def rhs(x, y):
        u = y[0]
        fv = f(x, u)
        fu = lam * f_u(x, u)
        return (y[1], y[2], y[3], lam * fv, y[5], y[6], y[7], fv + fu * y[4], y[9], y[10], y[11], fu * y[8])

    y0 = (alpha, 0.0, beta, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    return integrate(IvpSystem(rhs, 0.0, y0, 1.0), tol)


def _solve2(J, r):
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if not abs(det) > DET_GUARD:
        raise SingularJacobian(f"|det J| = {abs(det):.3e} below {DET_GUARD:g}")
    return np.array([-(J[1, 1] * r[0] - J[0, 1] * r[1]) / det, -(-J[1, 0] * r[0] + J[0, 0] * r[1]) / det])


def beam_newton(
    alpha: float,
    start: tuple[float, float],
    f,
    *,
    ftol: float | None = None,
    max_iter: int = MAX_ITER,
    max_halvings: int = MAX_HALVINGS,
    tol=(DEFAULT_RTOL, DEFAULT_ATOL),
) -> BeamState:
    """Newton on ``(F, G)`` in ``(lam, beta)``; converged when ``max(|F|, |G|) <= 1e-10 max(1, alpha)``."""
    g = _nl(f)
    if not all(math.isfinite(s) for s in start):
        raise ValueError("start must be finite")
    ftol = 1e-10 * max(1.0, alpha) if ftol is None else ftol
    cap = BLOWUP_CAP * max(1.0, alpha)

    def evaluate(x):
        traj = _coupled(x[0], x[1], alpha, g, tol)
        if not traj.ok:
            return np.array([cap, cap]), np.full((2, 2), np.nan)
        y = traj.y_final
        return np.array([y[0], y[1]]), np.array([[y[4], y[8]], [y[5], y[9]]])

    x, _, J, report = damped_newton(evaluate, _solve2, start, ftol, max_iter, max_halvings, record=lambda v: (float(v[0]), float(v[1])))
    return BeamState(alpha, float(x[0]), float(x[1]), J, report)


def seed(alpha: float, f) -> tuple[float, float]:
    """Small-alpha linearization ``u'''' ~ lam f(0)``: exact for constant ``f``."""
    f0 = _nl(f).f(0.0, 0.0)
    if not f0 > 0:
        raise ValueError("seed needs f(0, 0) > 0; supply a start")
    return 24 * alpha / f0, -4 * alpha


def beam_curve(
    alpha0: float,
    d_alpha: float,
    nsteps: int,
    f,
    start: tuple[float, float] | None = None,
    *,
    jump: float | None = None,
    **opts,
) -> SolutionCurve:
    """Warm-started sweep over ``alpha0 + i*d_alpha``; points carry ``beta``."""
    g = _nl(f)
    if not d_alpha > 0 or nsteps < 1:
        raise ValueError("need d_alpha > 0 and nsteps >= 1")
    alphas = [alpha0 + i * d_alpha for i in range(1, nsteps + 1)]
    start = seed(alphas[0], g) if start is None else start
    notes = []
    if not g.autonomous:
        notes.append("non-autonomous f: u(0) is not known to be a global parameter here")
    points, failed, positive_beta = [], [], []
    x = tuple(start)
    for i, a in enumerate(alphas):
        try:
            st = beam_newton(a, x, g, **opts)
        except NewtonFailed as exc:
            if i == 0:
                raise
            failed.append((a, str(exc)))
            continue
        if st.beta > 0:
            positive_beta.append(a)
        points.append(CurvePoint(a, st.lam, Terminal.DIRICHLET_ROOT, beta=st.beta, newton=st.report))
        x = (st.lam, st.beta)
    if positive_beta:
        notes.append(f"beta > 0 at {len(positive_beta)} points")
    problem = ProblemSpec(Family.CLAMPED_BEAM, g)
    meta = {"grid": (alpha0, d_alpha, nsteps), "failed": failed, "notes": notes, "positive_beta": positive_beta, "seed": tuple(start)}
    return split_branches(points, jump, problem, meta)


def profile(alpha: float, start: tuple[float, float], f, npts: int = 401, **opts):
    """Converged half-solution on ``npts`` points of [0, 1]; returns ``(x, u, state)``."""
    st = beam_newton(alpha, start, f, **opts)
    traj = beam_ivp(st.lam, st.beta, alpha, f, tol=opts.get("tol", (DEFAULT_RTOL, DEFAULT_ATOL)))
    x = np.linspace(0.0, 1.0, npts)
    return x, traj.evaluate(x)[:, 0], st
