"""Shoot-and-scale curves for autonomous radial Dirichlet and Neumann problems.

For ``u'' + (n-1)/r u' + lam f(u) = 0`` the parameter scales out: shooting
``v'' + (n-1)/r v' + f(v) = 0`` from ``v(0) = alpha`` and finding the first
root ``r*`` of ``v`` (Dirichlet) or ``v'`` (Neumann) gives ``lam = r*^2``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.optimize import brentq

from .model import CurvePoint, Family, ProblemSpec, SolutionCurve, Terminal, split_branches
from .ode import DEFAULT_ATOL, DEFAULT_EVENT_TOL, DEFAULT_RTOL, DenseTrajectory, Direction, EventSpec, IvpSystem, Status, integrate

DEFAULT_EPS = 1e-8
DEFAULT_TEND = 1000.0
NEGATIVE_FLOOR = -1e-8
NEUMANN_GUARD = 1e-10


class ShootKind(enum.Enum):
    V_ROOT = "VRoot"
    VPRIME_ROOT = "VPrimeRoot"
    NO_EVENT = "NoEvent"
    WENT_NEGATIVE = "WentNegative"


@dataclass(frozen=True)
class ShootResult:
    alpha: float
    r_star: float | None
    kind: ShootKind
    lam: float | None
    v_star: float | None = None
    eps: float = DEFAULT_EPS
    message: str = ""
    trajectory: DenseTrajectory | None = None


def start_radius(f_alpha: float, alpha: float, eps: float = DEFAULT_EPS) -> float:
    """Starting radius for the series start, shrunk when ``f(alpha)`` is large against ``alpha``.

    Keeps the quadratic series term below ~1e-6 of ``alpha`` so the neglected
    quartic term stays at round-off level even for fast-growing ``f``.
    """
    if f_alpha == 0:
        return eps
    return min(eps, 1e-3 * math.sqrt(max(abs(alpha), 1e-300) / abs(f_alpha)))


def series_start(f_alpha: float, alpha: float, n: int, eps: float) -> tuple[float, float]:
    """``v(eps)``, ``v'(eps)`` from ``v = alpha - f(alpha) r^2 / (2n) + O(r^4)``."""
    return alpha - f_alpha * eps * eps / (2 * n), -f_alpha * eps / n


def shoot(
    problem: ProblemSpec,
    alpha: float,
    *,
    eps: float = DEFAULT_EPS,
    tend: float = DEFAULT_TEND,
    tol: tuple[float, float] = (DEFAULT_RTOL, DEFAULT_ATOL),
    event_tol: float = DEFAULT_EVENT_TOL,
    supercritical: bool = False,
    keep_trajectory: bool = False,
) -> ShootResult:
    """Shoot the unit-lambda problem from ``v(0) = alpha`` to the first root of ``v`` or ``v'``.

    In supercritical mode the ``v'`` root is ignored and the shot runs until ``v``
    drops below ``-1e-8``; ``r*`` is then the zero crossing of ``v``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if problem.family not in (Family.RADIAL_DIRICHLET, Family.RADIAL_NEUMANN):
        raise ValueError(f"shoot handles radial Dirichlet/Neumann problems, not {problem.family.value}")
    f = problem.nonlinearity.f
    n = problem.n
    c = n - 1.0
    f_alpha = f(0.0, alpha)
    e = start_radius(f_alpha, alpha, eps)
    v0, dv0 = series_start(f_alpha, alpha, n, e)

    def rhs(r, y):
        return (y[1], -c / r * y[1] - f(r, y[0]))

    if supercritical:
        events = (EventSpec(lambda r, y: y[0] - NEGATIVE_FLOOR, Direction.DECREASING, e),)
    else:
        events = (
            EventSpec(lambda r, y: y[0], Direction.DECREASING, e),
            EventSpec(lambda r, y: y[1], Direction.ANY, e),
        )
    traj = integrate(IvpSystem(rhs, e, (v0, dv0), tend, events), tol, event_tol)
    keep = traj if keep_trajectory else None
    hit = traj.first_event
    if hit is None:
        msg = "" if traj.status == Status.COMPLETED else f"{traj.status}: {traj.message}"
        return ShootResult(alpha, None, ShootKind.NO_EVENT, None, eps=e, message=msg, trajectory=keep)
    if supercritical:
        r0 = _zero_crossing(traj, event_tol)
        return ShootResult(alpha, r0, ShootKind.WENT_NEGATIVE, r0 * r0, 0.0, e, trajectory=keep)
    if hit.index == 0:
        return ShootResult(alpha, hit.t, ShootKind.V_ROOT, hit.t**2, float(hit.y[0]), e, trajectory=keep)
    v_star = float(hit.y[0])
    if abs(f(hit.t, v_star)) <= NEUMANN_GUARD:
        return ShootResult(alpha, None, ShootKind.NO_EVENT, None, v_star, e, "degenerate v' root (|v''| <= 1e-10)", keep)
    return ShootResult(alpha, hit.t, ShootKind.VPRIME_ROOT, hit.t**2, v_star, e, trajectory=keep)


def _zero_crossing(traj: DenseTrajectory, event_tol: float) -> float:
    """Last sign change of v from + to - on the dense output (just before the stopping floor)."""
    v = traj.y[:, 0]
    k = len(v) - 1
    while k > 0 and v[k - 1] <= 0:
        k -= 1
    if k == 0:
        return float(traj.t[0])
    lo, hi = float(traj.t[k - 1]), float(traj.t[k])
    if v[k] == 0:
        return hi
    comp = traj.component(0)
    return brentq(comp, lo, hi, xtol=event_tol, rtol=4 * np.finfo(float).eps)


_KIND_TO_TERMINAL = {
    ShootKind.V_ROOT: Terminal.DIRICHLET_ROOT,
    ShootKind.VPRIME_ROOT: Terminal.NEUMANN_CRITICAL,
    ShootKind.NO_EVENT: Terminal.NO_EVENT_BY_TEND,
    ShootKind.WENT_NEGATIVE: Terminal.WENT_NEGATIVE,
}


def _point(res: ShootResult) -> CurvePoint:
    lam = res.lam if res.lam is not None else math.nan
    return CurvePoint(res.alpha, lam, _KIND_TO_TERMINAL[res.kind])


def _grid(alpha0, d_alpha, nsteps):
    if not d_alpha > 0:
        raise ValueError("d_alpha must be positive")
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    return [alpha0 + i * d_alpha for i in range(1, nsteps + 1)]


def sweep(problem: ProblemSpec, alphas, jobs: int = 1, **opts) -> list[ShootResult]:
    """Shoot every alpha; with ``jobs > 1`` shots run in a process pool, results stay in grid order."""
    run = partial(shoot, problem, **opts)
    if jobs <= 1 or len(alphas) < 2:
        return [run(a) for a in alphas]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, alphas, chunksize=max(1, len(alphas) // (4 * jobs))))


def dirichlet_curve(
    problem: ProblemSpec,
    alpha0: float,
    d_alpha: float,
    nsteps: int,
    *,
    jobs: int = 1,
    jump: float | None = None,
    **opts,
) -> SolutionCurve:
    """Dirichlet curve on ``alpha0 + i*d_alpha``, ``i = 1..nsteps``.

    Keeps ``v``-root points (or ``WentNegative`` points when ``supercritical=True``);
    every other shot is listed in ``meta["rejected"]``.
    """
    alphas = _grid(alpha0, d_alpha, nsteps)
    results = sweep(problem, alphas, jobs, **opts)
    want = ShootKind.WENT_NEGATIVE if opts.get("supercritical") else ShootKind.V_ROOT
    kept = [_point(r) for r in results if r.kind == want]
    rejected = [(r.alpha, r.kind.value, r.message) for r in results if r.kind != want]
    meta = {"grid": (alpha0, d_alpha, nsteps), "rejected": rejected, "options": _describe(opts)}
    return split_branches(kept, jump, problem, meta)


def neumann_curve(
    problem: ProblemSpec,
    alpha0: float,
    d_alpha: float,
    nsteps: int,
    *,
    jobs: int = 1,
    jump: float | None = None,
    **opts,
) -> SolutionCurve:
    """Curve of Neumann solutions: shots whose first event is a ``v'`` root with ``v > 0``.

    Grid points with ``f(alpha) = 0`` are constant solutions; they are skipped and
    listed in ``meta["degenerate"]``.
    """
    f = problem.nonlinearity.f
    alphas = _grid(alpha0, d_alpha, nsteps)
    degenerate = [a for a in alphas if f(0.0, a) == 0]
    live = [a for a in alphas if f(0.0, a) != 0]
    results = sweep(problem, live, jobs, **opts)
    ok = [r.kind == ShootKind.VPRIME_ROOT and r.v_star > 0 for r in results]
    kept = [_point(r) for r, good in zip(results, ok) if good]
    rejected = [(r.alpha, r.kind.value, r.message) for r, good in zip(results, ok) if not good]
    meta = {
        "grid": (alpha0, d_alpha, nsteps),
        "rejected": rejected,
        "degenerate": degenerate,
        "options": _describe(opts),
    }
    return split_branches(kept, jump, problem, meta)


def _describe(opts):
    out = {"eps": DEFAULT_EPS, "tend": DEFAULT_TEND, "tol": (DEFAULT_RTOL, DEFAULT_ATOL)}
    out.update({k: v for k, v in opts.items() if k != "keep_trajectory"})
    return out


def profile(problem: ProblemSpec, alpha: float, npts: int = 401, **opts) -> tuple[np.ndarray, np.ndarray, float]:
    """Scaled solution ``u(r) = v(r sqrt(lam))`` on ``npts`` points of [0, 1]; returns ``(r, u, lam)``."""
    res = shoot(problem, alpha, keep_trajectory=True, **opts)
    if res.r_star is None:
        raise ValueError(f"no root for alpha={alpha}: {res.kind.value} {res.message}")
    if problem.family == Family.RADIAL_NEUMANN and not (res.kind == ShootKind.VPRIME_ROOT and res.v_star > 0):
        raise ValueError(f"no Neumann solution at alpha={alpha}: first event is {res.kind.value}")
    if problem.family == Family.RADIAL_DIRICHLET and res.kind not in (ShootKind.V_ROOT, ShootKind.WENT_NEGATIVE):
        raise ValueError(f"no Dirichlet solution at alpha={alpha}: first event is {res.kind.value}")
    r = np.linspace(0.0, 1.0, npts)
    s = r * res.r_star
    u = res.trajectory.evaluate(np.maximum(s, res.eps))[:, 0]
    # inside the start radius use the series itself
    f_alpha = problem.nonlinearity.f(0.0, alpha)
    small = s < res.eps
    u[small] = alpha - f_alpha * s[small] ** 2 / (2 * problem.n)
    return r, u, res.lam
