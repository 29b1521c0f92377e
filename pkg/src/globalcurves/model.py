"""Problem definitions, nonlinearities and solution-curve containers shared by the solvers."""

from __future__ import annotations

import enum
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import expr as _expr

Scalar2 = Callable[[float, float], float]


# -- nonlinearities ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """A right-hand side ``f(t, u)`` with its partial derivatives.

    Every callable takes ``(t, u)`` where ``t`` is the independent variable
    (``r`` for radial problems, ``x`` for the beam and harmonic problems).
    Autonomous nonlinearities simply ignore ``t``.  ``f_t`` is None unless
    the nonlinearity was declared over the independent variable.
    """

    text: str
    f: Scalar2
    f_u: Scalar2
    f_t: Scalar2 | None = None
    autonomous: bool = True
    tree: _expr.Node | None = None
    source: tuple = ()

    def __call__(self, t, u):
        return self.f(t, u)

    def __reduce__(self):
        # compiled lambdas do not pickle; rebuild from the recorded source instead
        kind, *args = self.source
        if kind == "parse":
            return (parse_nonlinearity, tuple(args))
        if kind == "catalog":
            return (_catalog_from_items, tuple(args))
        raise TypeError(f"nonlinearity {self.text!r} was built from raw callables and cannot be pickled")

    @property
    def f_r(self):
        return self.f_t

    def __repr__(self):
        return f"Nonlinearity({self.text!r})"


_INDEPENDENT = ("r", "x")


def parse_nonlinearity(text: str, variables: Sequence[str] = ("u",)) -> Nonlinearity:
    """Parse ``text`` and build ``f``, ``f_u`` (and ``f_t`` if ``r`` or ``x`` is allowed).

    >>> g = parse_nonlinearity("u + 0.5*u*sin(u)")
    >>> g.f_u(0.0, 0.0)
    1.0
    """
    variables = tuple(dict.fromkeys(variables))
    unknown = set(variables) - {"u", *_INDEPENDENT}
    if unknown:
        raise _expr.ExpressionError(f"unsupported variables {sorted(unknown)}; use u and one of r, x")
    indep = [v for v in variables if v in _INDEPENDENT]
    if len(indep) > 1:
        raise _expr.ExpressionError("declare at most one independent variable (r or x)")
    t = indep[0] if indep else "r"
    tree = _expr.parse(text, variables)
    args = (t, "u")
    f = _expr.compile_expr(tree, args)
    f_u = _expr.compile_expr(_expr.diff(tree, "u"), args)
    f_t = _expr.compile_expr(_expr.diff(tree, t), args) if indep else None
    autonomous = not (indep and _expr._depends(tree, t))
    return Nonlinearity(
        text=text,
        f=f,
        f_u=f_u,
        f_t=f_t,
        autonomous=autonomous,
        tree=tree,
        source=("parse", text, variables),
    )


def _const(value):
    return lambda t, u: value


def _cat_one():
    return dict(text="1", f=_const(1.0), f_u=_const(0.0))


def _cat_linear(c=1.0):
    return dict(text=f"{c}*u", f=lambda t, u: c * u, f_u=_const(float(c)))


def _cat_oscillatory():
    return dict(
        text="u + 0.5*u*sin(u)",
        f=lambda t, u: u + 0.5 * u * math.sin(u),
        f_u=lambda t, u: 1.0 + 0.5 * math.sin(u) + 0.5 * u * math.cos(u),
    )


def _cat_cubic():
    return dict(
        text="u*(u-1)*(7-u)",
        f=lambda t, u: u * (u - 1.0) * (7.0 - u),
        f_u=lambda t, u: -3.0 * u * u + 16.0 * u - 7.0,
    )


def _cat_exp():
    return dict(text="exp(u)", f=lambda t, u: math.exp(u), f_u=lambda t, u: math.exp(u))


def _cat_gelfand_potential(c=1.1):
    return dict(
        text=f"(1 - {c}*r^2)*exp(u)",
        f=lambda t, u: (1.0 - c * t * t) * math.exp(u),
        f_u=lambda t, u: (1.0 - c * t * t) * math.exp(u),
        f_t=lambda t, u: -2.0 * c * t * math.exp(u),
        autonomous=False,
    )


def _cat_perturbed_gelfand(a=5.0):
    def f(t, u):
        return math.exp(a * u / (a + u))

    return dict(
        text=f"exp({a}*u/({a}+u))",
        f=f,
        f_u=lambda t, u: f(t, u) * a * a / ((a + u) * (a + u)),
    )


def _cat_sin():
    return dict(text="sin(u)", f=lambda t, u: math.sin(u), f_u=lambda t, u: math.cos(u))


def _cat_castro():
    def f_u(t, u):
        d = 1.0 + u + 2.0 * u * u
        return 6.0 * (1.0 - 2.0 * u * u) / (d * d)

    return dict(text="6*u/(1+u+2*u^2)", f=lambda t, u: 6.0 * u / (1.0 + u + 2.0 * u * u), f_u=f_u)


def _cat_lin_ni(q=4):
    q = float(q)
    if q.is_integer():
        qi, pi_ = int(q), int(2 * q - 1)
        return dict(
            text=f"u^{qi} + u^{pi_}",
            f=lambda t, u: u**qi + u**pi_,
            f_u=lambda t, u: qi * u ** (qi - 1) + pi_ * u ** (pi_ - 1),
        )
    p = 2 * q - 1
    return dict(
        text=f"u^{q} + u^{p}",
        f=lambda t, u: math.pow(u, q) + math.pow(u, p),
        f_u=lambda t, u: q * math.pow(u, q - 1) + p * math.pow(u, p - 1),
    )


def _cat_zero():
    return dict(text="0", f=_const(0.0), f_u=_const(0.0))


def _cat_tilt():
    # forcing e(x) = x - pi/2, orthogonal to sin x on (0, pi)
    return dict(text="x - pi/2", f=lambda t, u: t - math.pi / 2, f_u=_const(0.0), f_t=_const(1.0), autonomous=False)


CATALOG: dict[str, Callable[..., dict]] = {
    "one": _cat_one,
    "linear": _cat_linear,
    "oscillatory": _cat_oscillatory,
    "cubic": _cat_cubic,
    "exp": _cat_exp,
    "gelfand_potential": _cat_gelfand_potential,
    "perturbed_gelfand": _cat_perturbed_gelfand,
    "sin": _cat_sin,
    "castro": _cat_castro,
    "lin_ni": _cat_lin_ni,
    "zero": _cat_zero,
    "tilt": _cat_tilt,
}


def catalog(name: str, **params) -> Nonlinearity:
    """Hand-coded nonlinearity from the catalog, e.g. ``catalog("lin_ni", q=4)``."""
    try:
        factory = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog nonlinearity {name!r}; known: {', '.join(sorted(CATALOG))}") from None
    fields = factory(**params)
    return Nonlinearity(source=("catalog", name, tuple(sorted(params.items()))), **fields)


def _catalog_from_items(name, items):
    return catalog(name, **dict(items))


_CATALOG_REF = re.compile(r"^@(\w+)\s*(?:\((.*)\))?\s*$")


def resolve_nonlinearity(text: str, variables: Sequence[str] = ("u",)) -> Nonlinearity:
    """``@name(k=v, ...)`` selects a catalog entry; anything else is parsed as an expression."""
    m = _CATALOG_REF.match(text.strip())
    if not m:
        return parse_nonlinearity(text, variables)
    params = {}
    if m.group(2) and m.group(2).strip():
        for item in m.group(2).split(","):
            key, _, value = item.partition("=")
            if not _:
                raise ValueError(f"catalog parameter must be key=value, got {item.strip()!r}")
            params[key.strip()] = float(value)
    return catalog(m.group(1), **params)


# -- problems ---------------------------------------------------------------


class Family(enum.Enum):
    RADIAL_DIRICHLET = "RadialDirichlet"
    RADIAL_NEUMANN = "RadialNeumann"
    PLAPLACE_DIRICHLET = "PLaplaceDirichlet"
    NONAUTONOMOUS_RADIAL = "NonAutonomousRadial"
    CLAMPED_BEAM = "ClampedBeam"
    HARMONIC_FORCED = "HarmonicForced"


_NEWTON_FAMILIES = {Family.NONAUTONOMOUS_RADIAL, Family.CLAMPED_BEAM, Family.HARMONIC_FORCED}


@dataclass(frozen=True)
class ProblemSpec:
    family: Family
    nonlinearity: Nonlinearity
    n: int = 1
    p: float = 2.0
    q: float | None = None
    forcing: Nonlinearity | None = None
    k: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"space dimension n must be >= 1, got {self.n}")
        if not self.p > 1:
            raise ValueError(f"p-Laplace exponent must exceed 1, got {self.p}")
        if self.k not in (1, 2):
            raise ValueError(f"harmonic index must be 1 or 2, got {self.k}")
        if self.family in _NEWTON_FAMILIES and self.nonlinearity.f_u is None:
            raise ValueError(f"{self.family.value} needs f_u")
        if self.family in (Family.RADIAL_DIRICHLET, Family.RADIAL_NEUMANN, Family.PLAPLACE_DIRICHLET):
            if not self.nonlinearity.autonomous:
                raise ValueError(f"{self.family.value} requires an autonomous f(u); use NonAutonomousRadial")

    def check_conditions(self, u_samples=(0.5, 1.0, 2.0, 5.0), r_samples=None) -> list[str]:
        """Sign checks f > 0 and f_r <= 0 on sampled points; returns warning messages."""
        msgs = []
        g = self.nonlinearity
        if g.f_t is None:
            return msgs
        rs = np.linspace(0.05, 0.95, 10) if r_samples is None else r_samples
        if any(g.f_t(r, u) > 0 for r in rs for u in u_samples):
            msg = f"f_r(r,u) > 0 somewhere for {g.text}; u(0) may not be a global parameter"
            warnings.warn(msg, stacklevel=2)
            msgs.append(msg)
        return msgs


# -- curves -----------------------------------------------------------------


class Terminal(enum.Enum):
    DIRICHLET_ROOT = "DirichletRoot"
    NEUMANN_CRITICAL = "NeumannCritical"
    NO_EVENT_BY_TEND = "NoEventByTend"
    WENT_NEGATIVE = "WentNegative"
    NEWTON_FAILED = "NewtonFailed"

    def __str__(self):
        return self.value


@dataclass
class NewtonReport:
    """Iteration history: ``iterates`` holds ``(value, |residual|)`` pairs, first entry is the start."""

    iterates: list = field(default_factory=list)
    converged: bool = False
    steps: int = 0
    message: str = ""

    def residuals(self) -> list[float]:
        return [r for _, r in self.iterates]

    def quadratic_ratios(self, floor: float = 1e-13) -> list[float]:
        """``|F_{k+1}| / |F_k|^2`` for consecutive residuals above ``floor``."""
        res = self.residuals()
        return [b / (a * a) for a, b in zip(res, res[1:]) if a > floor and b > floor]


class NewtonFailed(RuntimeError):
    """Newton iteration did not converge; ``report`` holds the history."""

    def __init__(self, message: str, report: NewtonReport | None = None):
        super().__init__(message)
        self.report = report


class SingularDerivative(NewtonFailed):
    """Scalar Newton derivative below the singularity guard."""


class SingularJacobian(NewtonFailed):
    """2x2 Newton Jacobian with determinant below the singularity guard."""


@dataclass(frozen=True)
class CurvePoint:
    alpha: float
    lam: float
    terminal: Terminal
    beta: float | None = None
    uprime0: float | None = None
    newton: NewtonReport | None = None

    @property
    def accepted(self) -> bool:
        return self.terminal in (Terminal.DIRICHLET_ROOT, Terminal.NEUMANN_CRITICAL, Terminal.WENT_NEGATIVE)


@dataclass(frozen=True)
class SolutionCurve:
    points: tuple[CurvePoint, ...]
    branches: tuple[tuple[int, int], ...]
    problem: ProblemSpec | None = None
    meta: dict = field(default_factory=dict)

    def branch(self, i: int) -> list[CurvePoint]:
        lo, hi = self.branches[i]
        return list(self.points[lo:hi])

    def branch_arrays(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        pts = self.branch(i)
        return np.array([p.alpha for p in pts]), np.array([p.lam for p in pts])

    @property
    def alphas(self) -> np.ndarray:
        return np.array([p.alpha for p in self.points])

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    def __len__(self):
        return len(self.points)


JUMP_WINDOW = 10
JUMP_FLOOR = 1e-3
MAX_ACCELERATION = 4.0


def _default_jump(window: Sequence[float]) -> float:
    return max(0.5 * (max(window) - min(window)), JUMP_FLOOR)


def split_branches(
    points: Sequence[CurvePoint],
    jump: float | None = None,
    problem: ProblemSpec | None = None,
    meta: dict | None = None,
) -> SolutionCurve:
    """Cut an alpha-ordered point list into branches.

    A new branch starts when the terminal kind changes, when the alpha spacing
    exceeds 1.5x the median spacing (points were dropped in between), or when
    lambda jumps.  With an explicit ``jump`` the test is ``|dlam| > jump``.
    Without one, the threshold is half the lambda range over the trailing 10
    points of the current branch (floor 1e-3) and lambda must also miss the
    linear extrapolation from the previous two points by that much.  A step
    that keeps the previous direction and is at most 4x the previous step, or
    follows an already accelerating run, is a steady run-up (e.g. toward an
    asymptote) and never cut; branches
    shorter than 3 points are never cut on lambda alone.
    """
    pts = tuple(points)
    if not pts:
        return SolutionCurve((), (), problem, dict(meta or {}))
    if jump is not None and not jump > 0:
        raise ValueError("jump must be positive")
    alphas = np.array([p.alpha for p in pts])
    gaps = np.diff(alphas)
    max_gap = 1.5 * float(np.median(gaps)) if len(gaps) >= 2 else math.inf

    branches = []
    start = 0
    for i in range(1, len(pts)):
        prev, cur = pts[i - 1], pts[i]
        cut = cur.terminal != prev.terminal or gaps[i - 1] > max_gap
        if not cut:
            dlam = abs(cur.lam - prev.lam)
            if jump is not None:
                cut = dlam > jump
            elif i - start >= 3:
                window = [p.lam for p in pts[max(start, i - JUMP_WINDOW) : i]]
                thresh = _default_jump(window)
                last_step = prev.lam - pts[i - 2].lam
                step_before = pts[i - 2].lam - pts[i - 3].lam
                predicted = prev.lam + last_step
                accelerating = last_step * step_before > 0 and abs(last_step) >= 1.5 * abs(step_before)
                steady = (cur.lam - prev.lam) * last_step > 0 and (
                    dlam <= MAX_ACCELERATION * abs(last_step) or accelerating
                )
                cut = dlam > thresh and abs(cur.lam - predicted) > thresh and not steady
        if cut:
            branches.append((start, i))
            start = i
    branches.append((start, len(pts)))
    return SolutionCurve(pts, tuple(branches), problem, dict(meta or {}))


class Fold(NamedTuple):
    index: int
    alpha: float
    lam: float


def _vertex(a, l):
    (a0, a1, a2), (l0, l1, l2) = a, l
    d = (a0 - a1) * (a0 - a2) * (a1 - a2)
    c2 = (a2 * (l1 - l0) + a1 * (l0 - l2) + a0 * (l2 - l1)) / d
    c1 = (a2 * a2 * (l0 - l1) + a1 * a1 * (l2 - l0) + a0 * a0 * (l1 - l2)) / d
    c0 = l1 - c2 * a1 * a1 - c1 * a1
    if c2 == 0:
        return a1, l1
    av = -c1 / (2 * c2)
    if not min(a0, a2) <= av <= max(a0, a2):
        return a1, l1
    return av, c0 + c1 * av + c2 * av * av


def detect_folds(curve: SolutionCurve, rel_tol: float = 1e-8) -> list[Fold]:
    """Turning points of lambda(alpha) within each branch, refined by a parabola through 3 points.

    Increments with ``|dlam| <= rel_tol * max(1, max|lam|)`` count as flat and never start a fold.
    """
    folds = []
    for lo, hi in curve.branches:
        if hi - lo < 3:
            continue
        pts = curve.points[lo:hi]
        lam = np.array([p.lam for p in pts])
        alpha = np.array([p.alpha for p in pts])
        tol = rel_tol * max(1.0, float(np.max(np.abs(lam))))
        d = np.diff(lam)
        signed = [(j, np.sign(dj)) for j, dj in enumerate(d) if abs(dj) > tol]
        for (j0, s0), (j1, s1) in zip(signed, signed[1:]):
            if s0 == s1:
                continue
            seg = lam[j0 + 1 : j1 + 1]
            k = j0 + 1 + int(np.argmax(seg) if s0 > 0 else np.argmin(seg))
            k = min(max(k, 1), len(pts) - 2)
            av, lv = _vertex(alpha[k - 1 : k + 2], lam[k - 1 : k + 2])
            folds.append(Fold(lo + k, float(av), float(lv)))
    return folds
