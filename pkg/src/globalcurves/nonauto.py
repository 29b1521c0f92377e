"""Newton continuation in ``alpha = u(0)`` for non-autonomous radial Dirichlet problems.

For ``u'' + (n-1)/r u' + lam f(r, u) = 0``, ``u(0) = alpha``, ``u'(0) = 0`` the
parameter no longer scales out, so at each ``alpha`` the scalar equation
``F(lam) = u(1) = 0`` is solved by Newton with ``F'(lam) = u_lam(1)`` taken from
the variational equation.  The sweep warm-starts each ``alpha`` from the
previous converged ``lam``.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .model import (
    CurvePoint,
    Family,
    NewtonFailed,
    NewtonReport,
    Nonlinearity,
    ProblemSpec,
    SingularDerivative,
    SolutionCurve,
    Terminal,
    split_branches,
)
from .newton import MAX_HALVINGS, MAX_ITER, damped_newton
from .ode import DEFAULT_ATOL, DEFAULT_RTOL, DenseTrajectory, IvpSystem, integrate
from .quadrature import graded_nodes_weights
from .shootscale import DEFAULT_EPS, ShootKind, shoot, start_radius

DERIVATIVE_GUARD = 1e-14
BLOWUP_CAP = 1e6
GLOBAL_PARAMETER_NOTE = (
    "for n > 1 u(0) is not known to be a global parameter; solutions off this curve may exist"
)


def _check(problem: ProblemSpec):
    if problem.family != Family.NONAUTONOMOUS_RADIAL and problem.family != Family.RADIAL_DIRICHLET:
        raise ValueError(f"expected a radial Dirichlet problem, got {problem.family.value}")


def _start(problem, lam, alpha, eps):
    f0 = problem.nonlinearity.f(0.0, alpha)
    e = start_radius(lam * f0, alpha, eps)
    n = problem.n
    return e, f0, (alpha - lam * f0 * e * e / (2 * n), -lam * f0 * e / n)


def ivp_at(problem: ProblemSpec, lam: float, alpha: float, *, eps: float = DEFAULT_EPS, tol=(DEFAULT_RTOL, DEFAULT_ATOL)) -> DenseTrajectory:
    """Integrate the IVP with ``u(0) = alpha`` from the series start at ``eps`` to ``r = 1``."""
    if not math.isfinite(lam):
        raise ValueError("lambda must be finite")
    f = problem.nonlinearity.f
    c = problem.n - 1.0
    e, _, y0 = _start(problem, lam, alpha, eps)

    def rhs(r, y):
        return (y[1], -c / r * y[1] - lam * f(r, y[0]))

    return integrate(IvpSystem(rhs, e, y0, 1.0), tol)


def variational_at(problem: ProblemSpec, lam: float, alpha: float, u: DenseTrajectory, *, tol=(DEFAULT_RTOL, DEFAULT_ATOL)) -> DenseTrajectory:
    """``u_lam`` along a computed trajectory ``u``; the start is the lambda-derivative of the series."""
    g = problem.nonlinearity
    c = problem.n - 1.0
    n = problem.n
    e = float(u.t[0])
    f0 = g.f(0.0, alpha)
    uu = u.component(0)

    def rhs(r, y):
        w = uu(r)
        return (y[1], -c / r * y[1] - lam * g.f_u(r, w) * y[0] - g.f(r, w))

    return integrate(IvpSystem(rhs, e, (-f0 * e * e / (2 * n), -f0 * e / n), 1.0), tol)


def coupled_at(problem: ProblemSpec, lam: float, alpha: float, *, eps: float = DEFAULT_EPS, tol=(DEFAULT_RTOL, DEFAULT_ATOL)) -> DenseTrajectory:
    """``(u, u', u_lam, u_lam')`` integrated together; used inside Newton."""
    g = problem.nonlinearity
    f, fu = g.f, g.f_u
    c = problem.n - 1.0
    n = problem.n
    e, f0, (u0, du0) = _start(problem, lam, alpha, eps)

    def rhs(r, y):
        u, du, v, dv = y
        fv = f(r, u)
        return (du, -c / r * du - lam * fv, dv, -c / r * dv - lam * fu(r, u) * v - fv)

    y0 = (u0, du0, -f0 * e * e / (2 * n), -f0 * e / n)
    return integrate(IvpSystem(rhs, e, y0, 1.0), tol)


def residual(problem: ProblemSpec, lam: float, alpha: float, **opts) -> tuple[float, float]:
    """``(F, F')`` at ``lam``; a blow-up before ``r = 1`` maps to a capped residual with the sign of the escape."""
    traj = coupled_at(problem, lam, alpha, **opts)
    if traj.ok:
        return float(traj.y_final[0]), float(traj.y_final[2])
    cap = BLOWUP_CAP * max(1.0, alpha)
    last = traj.y_final[0]
    sign = 1.0 if last > 0 else -1.0
    return sign * cap, math.nan


def residual_by_quadrature(problem: ProblemSpec, lam: float, alpha: float, panels: int = 64, **opts) -> tuple[float, float]:
    """``(F, F')`` from the kernel representation of ``u(1)`` over the dense trajectory.

    ``u(1) = alpha + lam/(n-2) int_0^1 (z^(n-2) - 1) z f(z, u(z)) dz`` for ``n != 2``
    and ``alpha + lam int_0^1 z log(z) f dz`` for ``n = 2``; differentiating under
    the integral gives ``F'``.
    """
    n = problem.n
    g = problem.nonlinearity
    u = ivp_at(problem, lam, alpha, **opts)
    if not u.ok:
        raise ArithmeticError(f"IVP failed: {u.message}")
    ul = variational_at(problem, lam, alpha, u, tol=opts.get("tol", (DEFAULT_RTOL, DEFAULT_ATOL)))
    z, w = graded_nodes_weights(0.0, 1.0, panels)
    if n == 2:
        kernel = z * np.log(z)
    else:
        kernel = (z ** (n - 2) - 1.0) * z / (n - 2)
    uz = u.evaluate(z)[:, 0]
    vz = ul.evaluate(z)[:, 0]
    # below the start radius the series values are used
    e = float(u.t[0])
    f0 = g.f(0.0, alpha)
    inside = z < e
    uz[inside] = alpha - lam * f0 * z[inside] ** 2 / (2 * n)
    vz[inside] = -f0 * z[inside] ** 2 / (2 * n)
    fz = np.array([g.f(a, b) for a, b in zip(z, uz)])
    fuz = np.array([g.f_u(a, b) for a, b in zip(z, uz)])
    F = alpha + lam * float(np.dot(w, kernel * fz))
    dF = float(np.dot(w, kernel * (fz + lam * fuz * vz)))
    return F, dF


def newton_tol(alpha: float) -> float:
    return 1e-10 * max(1.0, alpha)


def _solve_scalar(J, r):
    if not abs(J[0]) >= DERIVATIVE_GUARD:
        raise SingularDerivative(f"|F'(lambda)| = {abs(J[0]):.3e} below {DERIVATIVE_GUARD:g}")
    return -r / J


def newton_lambda(
    problem: ProblemSpec,
    alpha: float,
    lambda0: float,
    *,
    ftol: float | None = None,
    max_iter: int = MAX_ITER,
    max_halvings: int = MAX_HALVINGS,
    **opts,
) -> tuple[float, NewtonReport]:
    """Solve ``u(1; lam, alpha) = 0`` for ``lam`` starting at ``lambda0``.

    ``ftol`` defaults to :func:`newton_tol`; ``opts`` (``eps``, ``tol``) go to the integrator.
    Raises :class:`NewtonFailed` (or :class:`SingularDerivative`) with the report attached.
    """
    if not math.isfinite(lambda0):
        raise ValueError("lambda0 must be finite")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")

    def evaluate(x):
        F, dF = residual(problem, float(x[0]), alpha, **opts)
        return np.array([F]), np.array([dF])

    ftol = newton_tol(alpha) if ftol is None else ftol
    x, _, _, report = damped_newton(evaluate, _solve_scalar, [lambda0], ftol, max_iter, max_halvings, record=lambda v: float(v[0]))
    return float(x[0]), report


def autonomous_guess(problem: ProblemSpec, alpha: float) -> float | None:
    """Shoot-and-scale value for the frozen nonlinearity ``f(0, u)``; None if the shot has no root."""
    g = problem.nonlinearity
    frozen = Nonlinearity(
        text=f"({g.text}) at r=0",
        f=lambda t, u: g.f(0.0, u),
        f_u=lambda t, u: g.f_u(0.0, u),
    )
    res = shoot(ProblemSpec(Family.RADIAL_DIRICHLET, frozen, n=problem.n), alpha)
    return res.lam if res.kind == ShootKind.V_ROOT else None


def continue_in_alpha(
    problem: ProblemSpec,
    alpha0: float,
    d_alpha: float,
    nsteps: int,
    lambda_init: float | None = None,
    *,
    jump: float | None = None,
    **opts,
) -> SolutionCurve:
    """Sequential warm-started sweep over ``alpha0 + i*d_alpha``, ``i = 1..nsteps``.

    Failed points are listed in ``meta["failed"]`` and skipped; the next point
    restarts from the last converged ``lam``.  Only a failure at the first point
    aborts the sweep.
    """
    _check(problem)
    if not d_alpha > 0 or nsteps < 1:
        raise ValueError("need d_alpha > 0 and nsteps >= 1")
    alphas = [alpha0 + i * d_alpha for i in range(1, nsteps + 1)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        problem.check_conditions()
    notes = [str(w.message) for w in caught]
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    if problem.n > 1:
        notes.append(GLOBAL_PARAMETER_NOTE)
    seed_source = "user"
    if lambda_init is None:
        lambda_init = autonomous_guess(problem, alphas[0])
        seed_source = "autonomous shoot of f(0, u)"
        if lambda_init is None:
            raise ValueError("no autonomous bootstrap available for the first point; pass lambda_init")
    points, failed = [], []
    lam = lambda_init
    for i, a in enumerate(alphas):
        try:
            lam_new, report = newton_lambda(problem, a, lam, **opts)
        except NewtonFailed as exc:
            if i == 0:
                raise
            failed.append((a, str(exc)))
            continue
        points.append(CurvePoint(a, lam_new, Terminal.DIRICHLET_ROOT, newton=report))
        lam = lam_new
    meta = {
        "grid": (alpha0, d_alpha, nsteps),
        "failed": failed,
        "notes": notes,
        "seed": (lambda_init, seed_source),
    }
    return split_branches(points, jump, problem, meta)


def profile(problem: ProblemSpec, alpha: float, lam_guess: float, npts: int = 401, **opts):
    """Converged solution at ``alpha`` on ``npts`` points of [0, 1]; returns ``(r, u, lam, report)``."""
    lam, report = newton_lambda(problem, alpha, lam_guess, **opts)
    traj = ivp_at(problem, lam, alpha, **{k: v for k, v in opts.items() if k in ("eps", "tol")})
    r = np.linspace(0.0, 1.0, npts)
    u = traj.evaluate(np.maximum(r, traj.t[0]))[:, 0]
    u[0] = alpha
    return r, u, lam, report
