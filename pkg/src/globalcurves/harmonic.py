"""Continuation in a Fourier harmonic for ``u'' + f(x, u) = mu sin(kx) + e(x)`` on (0, pi).

With ``u(0) = u(pi) = 0`` and the constraint ``int_0^pi u sin(kx) dx = xi`` the
forcing amplitude ``mu`` becomes an unknown.  Each Newton step solves the
linear problem ``u'' + a(x) u = mu sin(kx) + g(x)`` under the same constraints
by combining three IVP solutions: ``Y1`` (rhs ``sin kx``), ``Y2`` (rhs ``g``)
and the homogeneous ``u1``, all started with ``u(0) = 0``, ``u'(0) = 1``.
Roots of ``mu(xi)`` are solutions of the unforced problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import (
    CurvePoint,
    Family,
    NewtonFailed,
    NewtonReport,
    ProblemSpec,
    SolutionCurve,
    Terminal,
    split_branches,
)
from .ode import DEFAULT_ATOL, DEFAULT_RTOL, DenseTrajectory, IvpSystem, integrate
from .quadrature import nodes_weights

DET_GUARD = 1e-12
DET_PER_RTOL = 100.0
RESIDUAL_TOL = 1e-7
NEWTON_STEPS = 3
MAX_NEWTON_STEPS = 10
ROOT_TOL = 1e-9
RESIDUAL_SAMPLES = 201
STRATEGIES = ("warm", "sin2x", "-sin2x")


class SingularSystem(ArithmeticError):
    """The 2x2 system of the linear solver is (nearly) singular: resonance of the linearization."""


@dataclass
class HarmonicSolution:
    """Solution ``u = mu Y1 + Y2 + c1 u1`` of one linear solve (the last Newton step)."""

    xi: float
    mu: float
    c1: float
    k: int
    traj: DenseTrajectory = field(repr=False)  # components Y1, Y1', Y2, Y2', u1, u1'
    report: NewtonReport | None = None
    _evals: tuple = field(default=(), repr=False)

    @property
    def uprime0(self) -> float:
        return self.mu + 1.0 + self.c1

    def _coef(self):
        return np.array([self.mu, 1.0, self.c1])

    def values(self, x) -> np.ndarray:
        y = self.traj.evaluate(np.asarray(x, dtype=float))
        return y[..., [0, 2, 4]] @ self._coef()

    def derivatives(self, x) -> np.ndarray:
        y = self.traj.evaluate(np.asarray(x, dtype=float))
        return y[..., [1, 3, 5]] @ self._coef()

    def scalar(self) -> Callable[[float], float]:
        """Fast scalar evaluator of ``u`` for use inside right-hand sides."""
        return self.traj.combination([self.mu, 0.0, 1.0, 0.0, self.c1, 0.0])

    def harmonic(self, panels: int = 64) -> float:
        x, w = nodes_weights(0.0, math.pi, panels)
        return float(np.dot(w, self.values(x) * np.sin(self.k * x)))


def _projections(traj: DenseTrajectory, k: int, panels: int = 64) -> np.ndarray:
    x, w = nodes_weights(0.0, math.pi, panels)
    y = traj.evaluate(x)
    return (w * np.sin(k * x)) @ y[:, [0, 2, 4]]


def linear_solve(a, g, xi: float, k: int = 1, *, tol=(DEFAULT_RTOL, DEFAULT_ATOL), panels: int = 64, ag=None) -> HarmonicSolution:
    """Solve ``u'' + a u = mu sin(kx) + g``, ``u(0) = u(pi) = 0``, ``int u sin(kx) = xi`` for ``(u, mu)``.

    ``a`` and ``g`` are scalar callables of ``x``; ``ag(x) -> (a, g)`` may be
    given instead to evaluate both at once.  Raises :class:`SingularSystem`
    when the 2x2 determinant is below ``max(1e-12, 100 rtol)`` of its scale.
    """
    if k not in (1, 2):
        raise ValueError(f"k must be 1 or 2, got {k}")
    if ag is None:
        def ag(x):
            return a(x), g(x)

    def rhs(x, y):
        ax, gx = ag(x)
        return (y[1], math.sin(k * x) - ax * y[0], y[3], gx - ax * y[2], y[5], -ax * y[4])

    traj = integrate(IvpSystem(rhs, 0.0, (0.0, 1.0, 0.0, 1.0, 0.0, 1.0), math.pi), tol)
    if not traj.ok:
        raise ArithmeticError(f"linear IVPs failed: {traj.message}")
    end = traj.y_final
    i1, i2, i3 = _projections(traj, k, panels)
    m = np.array([[end[0], end[4]], [i1, i3]])
    rhs_v = np.array([-end[2], xi - i2])
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    scale = max(1.0, float(np.max(np.abs(m)))) ** 2
    # an exactly singular system integrates to det ~ rtol, so the guard cannot sit below that
    guard = max(DET_GUARD, DET_PER_RTOL * tol[0])
    if not abs(det) > guard * scale:
        raise SingularSystem(f"determinant {det:.3e} below {guard:g} x scale {scale:.3e}")
    mu = (rhs_v[0] * m[1, 1] - m[0, 1] * rhs_v[1]) / det
    c1 = (m[0, 0] * rhs_v[1] - m[1, 0] * rhs_v[0]) / det
    return HarmonicSolution(xi, float(mu), float(c1), k, traj)


def _forcing(problem: ProblemSpec):
    e = problem.forcing
    if e is None:
        return lambda x: 0.0
    return lambda x: e.f(x, 0.0)


def taylor_remainder(problem: ProblemSpec, new: HarmonicSolution, old, samples: int = RESIDUAL_SAMPLES) -> float:
    """Sampled ``max |u'' + f(u) - mu sin(kx) - e|`` of the new iterate.

    The linear solve makes ``u'' = mu sin(kx) + e - f(u_n) - f'(u_n)(u - u_n)``
    exactly, so the BVP residual is the Taylor remainder around ``u_n``.
    """
    f, fu = problem.nonlinearity.f, problem.nonlinearity.f_u
    x = np.linspace(0.0, math.pi, samples)
    u = new.values(x)
    un = np.array([old(s) for s in x])
    r = [f(s, a) - f(s, b) - fu(s, b) * (a - b) for s, a, b in zip(x, u, un)]
    return float(np.max(np.abs(r)))


def newton_at_xi(
    problem: ProblemSpec,
    xi: float,
    u0: Callable[[float], float],
    *,
    steps: int = NEWTON_STEPS,
    max_steps: int = MAX_NEWTON_STEPS,
    residual_tol: float = RESIDUAL_TOL,
    tol=(DEFAULT_RTOL, DEFAULT_ATOL),
) -> HarmonicSolution:
    """Newton iterations from ``u0``: ``steps`` fixed ones, then more (up to ``max_steps``) until the residual check passes."""
    f, fu = problem.nonlinearity.f, problem.nonlinearity.f_u
    e = _forcing(problem)
    k = problem.k
    report = NewtonReport()
    un = u0
    for it in range(1, max_steps + 1):
        cur = un

        def ag(x, cur=cur):
            v = cur(x)
            d = fu(x, v)
            return d, -f(x, v) + d * v + e(x)

        try:
            sol = linear_solve(None, None, xi, k, tol=tol, ag=ag)
        except (SingularSystem, ArithmeticError) as exc:
            report.message = str(exc)
            raise NewtonFailed(f"linear solve failed at xi={xi:.6g}: {exc}", report) from exc
        res = taylor_remainder(problem, sol, cur)
        report.steps = it
        report.iterates.append((sol.mu, res))
        un = sol.scalar()
        if it >= steps and res <= residual_tol:
            report.converged = True
            sol.report = report
            return sol
    report.message = f"residual {res:.3e} above {residual_tol:g} after {max_steps} Newton steps"
    raise NewtonFailed(report.message, report)


def _initial(problem: ProblemSpec, xi: float, strategy: str):
    k = problem.k
    if strategy == "sin2x":
        return lambda x: math.sin(2 * x)
    if strategy == "-sin2x":
        return lambda x: -math.sin(2 * x)
    # xi sin(kx) has k-th harmonic xi * pi/2; rescale so the constraint holds from the start
    s = 2 * xi / math.pi
    return lambda x: s * math.sin(k * x)


def continue_in_xi(
    problem: ProblemSpec,
    xi0: float,
    d_xi: float,
    nsteps: int,
    strategy: str = "warm",
    *,
    jump: float | None = None,
    **opts,
) -> SolutionCurve:
    """Sweep ``xi0 + i*d_xi``, ``i = 1..nsteps``; points hold ``(xi, mu, u'(0))``.

    ``strategy="warm"`` starts each Newton solve from the previous solution
    (the first from a multiple of ``sin kx``); ``"sin2x"`` and ``"-sin2x"``
    restart every point from ``+-sin 2x``.  Solutions are kept in ``meta["solutions"]`` aligned with points.
    """
    if problem.family != Family.HARMONIC_FORCED:
        raise ValueError(f"expected a HarmonicForced problem, got {problem.family.value}")
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if not d_xi > 0 or nsteps < 1:
        raise ValueError("need d_xi > 0 and nsteps >= 1")
    xis = [xi0 + i * d_xi for i in range(1, nsteps + 1)]
    points, sols, failed = [], [], []
    prev = None
    for xi in xis:
        u0 = prev.scalar() if (prev is not None and strategy == "warm") else _initial(problem, xi, strategy)
        try:
            sol = newton_at_xi(problem, xi, u0, **opts)
        except NewtonFailed as exc:
            failed.append((xi, str(exc)))
            prev = None
            continue
        points.append(CurvePoint(xi, sol.mu, Terminal.DIRICHLET_ROOT, uprime0=sol.uprime0, newton=sol.report))
        sols.append(sol)
        prev = sol
    if not points:
        raise NewtonFailed(f"no point converged on the xi grid ({len(failed)} failures)")
    meta = {"grid": (xi0, d_xi, nsteps), "failed": failed, "strategy": strategy}
    curve = split_branches(points, jump, problem, meta)
    # split_branches preserves order, so solutions stay aligned with points
    curve.meta["solutions"] = sols
    return curve


@dataclass(frozen=True)
class MuRoot:
    xi: float
    solution: HarmonicSolution
    uprime0: float


def solve_at(problem: ProblemSpec, xi: float, warm: HarmonicSolution | None, strategy: str = "warm", **opts) -> HarmonicSolution:
    """Tightly converged solution at ``xi`` started from ``warm``."""
    u0 = warm.scalar() if (warm is not None and strategy == "warm") else _initial(problem, xi, strategy)
    kw = {"steps": 2, "max_steps": 20, "residual_tol": 1e-12}
    kw.update(opts)
    return newton_at_xi(problem, xi, u0, **kw)


def find_mu_roots(problem: ProblemSpec, curve: SolutionCurve, *, tol: float = ROOT_TOL, max_iter: int = 60, strategy: str | None = None) -> list[MuRoot]:
    """Secant refinement of every sign change of ``mu`` along ``curve`` to ``|mu| <= tol``."""
    strategy = curve.meta.get("strategy", "warm") if strategy is None else strategy
    sols = curve.meta["solutions"]
    roots = []
    for lo, hi in curve.branches:
        for i in range(lo, hi):
            p = curve.points[i]
            if p.lam == 0.0:
                roots.append(MuRoot(p.alpha, sols[i], sols[i].uprime0))
                continue
            if i + 1 >= hi:
                continue
            q = curve.points[i + 1]
            if p.lam * q.lam < 0:
                root = _secant(problem, sols[i], sols[i + 1], tol, max_iter, strategy)
                if root is not None:
                    roots.append(root)
    return roots


def _secant(problem, sa: HarmonicSolution, sb: HarmonicSolution, tol, max_iter, strategy):
    # Illinois-modified regula falsi: secant steps that keep the bracket
    try:
        sa = solve_at(problem, sa.xi, sa, strategy)
        sb = solve_at(problem, sb.xi, sb, strategy)
    except NewtonFailed:
        return None
    xa, fa, xb, fb = sa.xi, sa.mu, sb.xi, sb.mu
    if fa * fb > 0:
        return None
    side = 0
    for _ in range(max_iter):
        for s in (sa, sb):
            if abs(s.mu) <= tol:
                return MuRoot(s.xi, s, s.uprime0)
        x = xb - fb * (xb - xa) / (fb - fa)
        near = sa if abs(x - xa) < abs(x - xb) else sb
        try:
            s = solve_at(problem, x, near, strategy)
        except NewtonFailed:
            return None
        if abs(s.mu) <= tol:
            return MuRoot(x, s, s.uprime0)
        if s.mu * fb < 0:
            xa, fa, sa = xb, fb, sb
            side = 0
        else:
            if side == 1:
                fa /= 2
            side = 1
        xb, fb, sb = x, s.mu, s
    return None


def shooting_defect(problem: ProblemSpec, mu: float, uprime0: float, profile: Callable, samples: int = RESIDUAL_SAMPLES) -> float:
    """``max |v - profile|`` where ``v`` solves the nonlinear IVP with ``v(0) = 0``, ``v'(0) = uprime0``.

    An independent check that ``profile`` solves ``u'' + f(u) = mu sin(kx) + e``.
    """
    f = problem.nonlinearity.f
    e = _forcing(problem)
    k = problem.k

    def rhs(x, y):
        return (y[1], mu * math.sin(k * x) + e(x) - f(x, y[0]))

    traj = integrate(IvpSystem(rhs, 0.0, (0.0, uprime0), math.pi))
    if not traj.ok:
        return math.inf
    x = np.linspace(0.0, math.pi, samples)
    return float(np.max(np.abs(traj.evaluate(x)[:, 0] - np.array([profile(s) for s in x]))))


def profile(problem: ProblemSpec, xi: float, warm: HarmonicSolution | None = None, npts: int = 401, strategy: str = "warm"):
    """Converged solution at ``xi`` on ``npts`` points of [0, pi]; returns ``(x, u, solution)``."""
    sol = solve_at(problem, xi, warm, strategy)
    x = np.linspace(0.0, math.pi, npts)
    return x, sol.values(x), sol
