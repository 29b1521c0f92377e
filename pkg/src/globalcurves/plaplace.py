"""Shoot-and-scale for the radial p-Laplace Dirichlet problem.

Unit-lambda shooting is done either in ``r`` directly (``naive``) or after the
substitution ``z = r**beta_bar``, ``beta_bar = p / (2(p-1))`` (``regularized``),
under which the solution ``w(z)`` is twice differentiable at the origin::

    a w'' + (A/z) w' + z**(p-2) f(w) / ((p-1) |w'|**(p-2)) = 0

The first root ``z0`` gives ``lam = z0**(2(p-1))``; in ``r`` the root ``xi``
gives ``lam = xi**p``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .model import CurvePoint, Family, ProblemSpec, SolutionCurve, Terminal, split_branches
from .ode import DEFAULT_ATOL, DEFAULT_EVENT_TOL, DEFAULT_RTOL, Direction, EventSpec, IvpSystem, Status, integrate
from .shootscale import DEFAULT_TEND, ShootKind, ShootResult

H_REGULARIZED = 1e-3
H_NAIVE = 1e-5
MODES = ("regularized", "naive")


@dataclass(frozen=True)
class RegularizedConstants:
    p: float
    n: int
    beta_bar: float
    a: float
    A: float
    a1: float
    a2: float
    B1: float

    @property
    def quoted_a1(self) -> float:
        """Leading coefficient from the closed form with ``B1 = 2a + 2A/(p-1)``, kept for comparison only."""
        return math.nan if self.B1 <= 0 else -((self._f_alpha / ((self.p - 1) * 2 ** (self.p - 2) * self.B1)) ** (1 / (self.p - 1)))

    _f_alpha: float = 0.0


def structural_constants(p: float, n: int) -> tuple[float, float, float]:
    """``(beta_bar, a, A)`` of the regularized equation."""
    bb = p / (2 * (p - 1))
    a = bb**p
    A = bb ** (p - 1) * (bb - 1) + (n - 1) / (p - 1) * bb ** (p - 1)
    return bb, a, A


def regularize_constants(p: float, n: int, alpha: float, f) -> RegularizedConstants:
    """Constants of the regularized equation and its series start ``w = alpha + a1 z^2 + a2 z^4``.

    ``a1 = -((p-1)/p) (f(alpha)/n)**(1/(p-1))`` balances the ``z^0`` terms;
    ``a2`` balances the ``z^2`` terms after expanding ``|w'|**(p-2)`` and
    ``f(w)`` to first order.  ``f`` is a :class:`~globalcurves.model.Nonlinearity`.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    f_alpha = f.f(0.0, alpha)
    if not f_alpha > 0:
        raise ValueError(f"f(alpha) must be positive for positive solutions, got f({alpha}) = {f_alpha}")
    bb, a, A = structural_constants(p, n)
    a1 = -((p - 1) / p) * (f_alpha / n) ** (1 / (p - 1))
    K = 1.0 / ((p - 1) * (2 * abs(a1)) ** (p - 2))
    denom = 12 * a + 4 * A + 4 * (p - 2) * (a + A)
    a2 = -K * f.f_u(0.0, alpha) * a1 / denom
    if not math.isfinite(a2):
        a2 = math.nan
    return RegularizedConstants(p, n, bb, a, A, a1, a2, 2 * a + 2 * A / (p - 1), f_alpha)


def _regularized_system(problem, alpha, h, tend):
    p, n, f = problem.p, problem.n, problem.nonlinearity.f
    k = regularize_constants(p, n, alpha, problem.nonlinearity)
    a, A = k.a, k.A
    c = 1.0 / (p - 1)
    pm2 = p - 2
    if math.isnan(k.a2):
        h, a2 = h / 10, 0.0
    else:
        a2 = k.a2
    w0 = alpha + k.a1 * h * h + a2 * h**4
    dw0 = 2 * k.a1 * h + 4 * a2 * h**3

    def rhs(z, y):
        w, dw = y
        return (dw, -(A / z * dw + z**pm2 * f(z, w) * c / abs(dw) ** pm2) / a)

    ev = EventSpec(lambda z, y: y[0], Direction.DECREASING, h)
    return IvpSystem(rhs, h, (w0, dw0), tend, (ev,)), k


def _naive_system(problem, alpha, h, tend):
    p, n, f = problem.p, problem.n, problem.nonlinearity.f
    f_alpha = f(0.0, alpha)
    if not f_alpha > 0:
        raise ValueError(f"f(alpha) must be positive for positive solutions, got f({alpha}) = {f_alpha}")
    a1 = -((p - 1) / p) * (f_alpha / n) ** (1 / (p - 1))
    e = p / (p - 1)
    u0 = alpha + a1 * h**e
    du0 = a1 * e * h ** (e - 1)
    c = (n - 1) / (p - 1)
    inv = 1.0 / (p - 1)
    pm2 = p - 2

    def rhs(r, y):
        u, du = y
        return (du, -c / r * du - f(r, u) * inv / abs(du) ** pm2)

    ev = EventSpec(lambda r, y: y[0], Direction.DECREASING, h)
    return IvpSystem(rhs, h, (u0, du0), tend, (ev,))


def plaplace_shoot(
    problem: ProblemSpec,
    alpha: float,
    h: float | None = None,
    mode: str = "regularized",
    *,
    tend: float = DEFAULT_TEND,
    tol: tuple[float, float] = (DEFAULT_RTOL, DEFAULT_ATOL),
    event_tol: float = DEFAULT_EVENT_TOL,
    keep_trajectory: bool = False,
) -> ShootResult:
    """Unit-lambda shot for the p-Laplacian; ``r_star`` is ``z0`` (regularized) or ``xi`` (naive)."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    p = problem.p
    if mode == "regularized":
        if p < 2:
            raise ValueError("regularized mode needs p >= 2; use mode='naive'")
        h = H_REGULARIZED if h is None else h
        sys_, _ = _regularized_system(problem, alpha, h, tend)
    else:
        h = H_NAIVE if h is None else h
        sys_ = _naive_system(problem, alpha, h, tend)
    if not h > 0:
        raise ValueError("h must be positive")
    traj = integrate(sys_, tol, event_tol)
    keep = traj if keep_trajectory else None
    hit = traj.first_event
    if hit is None:
        msg = "" if traj.status == Status.COMPLETED else f"{traj.status}: {traj.message}"
        return ShootResult(alpha, None, ShootKind.NO_EVENT, None, eps=h, message=msg, trajectory=keep)
    root = hit.t
    lam = root ** (2 * (p - 1)) if mode == "regularized" else root**p
    return ShootResult(alpha, root, ShootKind.V_ROOT, lam, float(hit.y[0]), h, trajectory=keep)


def plaplace_curve(
    problem: ProblemSpec,
    alpha0: float,
    d_alpha: float,
    nsteps: int,
    mode: str = "regularized",
    h: float | None = None,
    *,
    jobs: int = 1,
    jump: float | None = None,
    **opts,
) -> SolutionCurve:
    if problem.family not in (Family.PLAPLACE_DIRICHLET, Family.RADIAL_DIRICHLET):
        raise ValueError(f"plaplace_curve needs a p-Laplace Dirichlet problem, not {problem.family.value}")
    if not d_alpha > 0 or nsteps < 1:
        raise ValueError("need d_alpha > 0 and nsteps >= 1")
    alphas = [alpha0 + i * d_alpha for i in range(1, nsteps + 1)]
    run = partial(plaplace_shoot, problem, h=h, mode=mode, **opts)
    if jobs > 1 and len(alphas) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, alphas))
    else:
        results = [run(a) for a in alphas]
    kept = [CurvePoint(r.alpha, r.lam, Terminal.DIRICHLET_ROOT) for r in results if r.kind == ShootKind.V_ROOT]
    rejected = [(r.alpha, r.kind.value, r.message) for r in results if r.kind != ShootKind.V_ROOT]
    meta = {"grid": (alpha0, d_alpha, nsteps), "mode": mode, "h": h, "rejected": rejected}
    if problem.p < 2:
        meta["note"] = "p < 2: f(u)/|u'|^(p-2) is non-Lipschitz at u' = 0; naive shooting only"
        warnings.warn(meta["note"], stacklevel=2)
    return split_branches(kept, jump, problem, meta)


def regularized_values(problem: ProblemSpec, alpha: float, zs, h: float | None = None, **opts) -> np.ndarray:
    """``w(z)`` of the unit-lambda regularized solution; the series is used below the start point."""
    h = H_REGULARIZED if h is None else h
    sys_, k = _regularized_system(problem, alpha, h, opts.pop("tend", DEFAULT_TEND))
    zs = np.asarray(zs, dtype=float)
    traj = integrate(sys_, opts.pop("tol", (DEFAULT_RTOL, DEFAULT_ATOL)), opts.pop("event_tol", DEFAULT_EVENT_TOL))
    out = traj.evaluate(np.maximum(zs, h))[..., 0]
    a2 = 0.0 if math.isnan(k.a2) else k.a2
    small = zs < h
    series = alpha + k.a1 * zs**2 + a2 * zs**4
    return np.where(small, series, out)


def naive_values(problem: ProblemSpec, alpha: float, rs, h: float | None = None, **opts) -> np.ndarray:
    """``u(r)`` of the unit-lambda problem integrated directly in ``r``."""
    h = H_NAIVE if h is None else h
    sys_ = _naive_system(problem, alpha, h, opts.pop("tend", DEFAULT_TEND))
    traj = integrate(sys_, opts.pop("tol", (DEFAULT_RTOL, DEFAULT_ATOL)), opts.pop("event_tol", DEFAULT_EVENT_TOL))
    rs = np.asarray(rs, dtype=float)
    return traj.evaluate(np.maximum(rs, h))[..., 0]


def second_difference(problem: ProblemSpec, alpha: float, h: float, start: float = 1e-6) -> float:
    """``(w(2h) - 2 w(h) + w(0)) / h^2`` with ``w`` integrated from ``start`` << h."""
    w1, w2 = regularized_values(problem, alpha, [h, 2 * h], h=start)
    return (w2 - 2 * w1 + alpha) / (h * h)


def profile(problem: ProblemSpec, alpha: float, npts: int = 401, mode: str = "regularized", **opts):
    """Solution at ``lam(alpha)`` on ``npts`` points of [0, 1]; returns ``(r, u, lam)``."""
    res = plaplace_shoot(problem, alpha, mode=mode, **opts)
    if res.r_star is None:
        raise ValueError(f"no root for alpha={alpha}: {res.message}")
    r = np.linspace(0.0, 1.0, npts)
    if mode == "regularized":
        bb = problem.p / (2 * (problem.p - 1))
        xi = res.r_star ** (1 / bb)
        u = regularized_values(problem, alpha, (r * xi) ** bb)
    else:
        u = naive_values(problem, alpha, r * res.r_star)
        u[0] = alpha
    return r, u, res.lam
