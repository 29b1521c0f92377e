"""Adaptive Dormand-Prince 5(4) integration with dense output and event location.

Every solver in the package reduces its initial value problems to first-order
systems and runs them through :func:`integrate`.  Failures (blow-up, step size
collapse) do not raise; they are recorded in :attr:`DenseTrajectory.status`
and the partial trajectory is returned so sweeps can keep going.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq

# Dormand & Prince (1980) coefficients
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array(
    [
        [0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# free 4th-order continuous extension (Shampine 1986), y(t0 + x h) = y0 + h K^T P [x, x^2, x^3, x^4]
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_EVENT_TOL = 1e-12

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ARITH = (OverflowError, ValueError, ZeroDivisionError, FloatingPointError)


class Direction(enum.IntEnum):
    ANY = 0
    INCREASING = 1
    DECREASING = -1


class Status(str, enum.Enum):
    COMPLETED = "completed"
    EVENT = "event"
    NONFINITE = "nonfinite"
    UNDERFLOW = "underflow"
    MAX_STEPS = "max_steps"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class EventSpec:
    g: Callable[[float, np.ndarray], float]
    direction: Direction = Direction.ANY
    active_after: float = -math.inf


@dataclass(frozen=True)
class IvpSystem:
    rhs: Callable[[float, np.ndarray], Sequence[float]]
    t0: float
    y0: Sequence[float]
    t_end: float
    events: tuple[EventSpec, ...] = ()

    def __post_init__(self):
        if len(self.y0) < 1:
            raise ValueError("system dimension must be >= 1")
        if not self.t_end > self.t0:
            raise ValueError(f"t_end ({self.t_end}) must exceed t0 ({self.t0})")
        for ev in self.events:
            if ev.active_after > self.t0 and not math.isfinite(ev.active_after):
                raise ValueError("active_after must be finite")

    @property
    def dim(self) -> int:
        return len(self.y0)


class EventHit(NamedTuple):
    index: int
    t: float
    y: np.ndarray


@dataclass
class DenseTrajectory:
    """Accepted steps with their interpolation coefficients."""

    t: np.ndarray
    y: np.ndarray
    q: np.ndarray  # (steps, dim, 4)
    status: Status
    message: str = ""
    first_event: EventHit | None = None
    nfev: int = 0
    _cursor: int = field(default=0, repr=False)

    @property
    def ok(self) -> bool:
        return self.status in (Status.COMPLETED, Status.EVENT)

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.y[-1]

    def _index(self, t):
        i = np.searchsorted(self.t, t, side="right") - 1
        return np.clip(i, 0, len(self.t) - 2)

    def evaluate(self, t):
        """State at ``t`` (scalar -> (dim,), array -> (len, dim)); clamped to the covered range."""
        if len(self.t) < 2:
            y0 = self.y[0]
            return np.broadcast_to(y0, np.shape(t) + y0.shape).copy()
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        ts = np.clip(ts, self.t[0], self.t[-1])
        i = self._index(ts)
        h = self.t[i + 1] - self.t[i]
        x = (ts - self.t[i]) / h
        powers = np.stack([x, x * x, x**3, x**4], axis=-1)
        out = self.y[i] + h[:, None] * np.einsum("kdj,kj->kd", self.q[i], powers)
        return out[0] if scalar else out

    def component(self, j: int) -> Callable[[float], float]:
        """Fast scalar evaluator of one component for near-monotone query sequences."""
        t_arr, y_arr, q_arr = self.t, self.y, self.q
        last = len(t_arr) - 2
        state = [0]

        if last < 0:
            value = float(y_arr[0, j])
            return lambda s: value

        def value(s):
            i = state[0]
            if not (t_arr[i] <= s < t_arr[i + 1]):
                if s >= t_arr[-1]:
                    i = last
                elif s <= t_arr[0]:
                    i = 0
                else:
                    i = int(np.searchsorted(t_arr, s, side="right")) - 1
                state[0] = i
            h = t_arr[i + 1] - t_arr[i]
            x = (s - t_arr[i]) / h
            c = q_arr[i, j]
            return y_arr[i, j] + h * x * (c[0] + x * (c[1] + x * (c[2] + x * c[3])))

        return value

    def combination(self, weights: Sequence[float]) -> Callable[[float], float]:
        """Fast scalar evaluator of ``sum_j weights[j] * y_j`` (one cursor for all components)."""
        w = np.asarray(weights, dtype=float)
        t_arr = self.t
        y_arr = self.y @ w
        q_arr = np.einsum("kdj,d->kj", self.q, w) if len(self.q) else np.zeros((0, 4))
        last = len(t_arr) - 2
        state = [0]

        if last < 0:
            value = float(y_arr[0])
            return lambda s: value

        def value(s):
            i = state[0]
            if not (t_arr[i] <= s < t_arr[i + 1]):
                if s >= t_arr[-1]:
                    i = last
                elif s <= t_arr[0]:
                    i = 0
                else:
                    i = int(np.searchsorted(t_arr, s, side="right")) - 1
                state[0] = i
            h = t_arr[i + 1] - t_arr[i]
            x = (s - t_arr[i]) / h
            c = q_arr[i]
            return y_arr[i] + h * x * (c[0] + x * (c[1] + x * (c[2] + x * c[3])))

        return value


def _rms(x):
    return math.sqrt(float(np.dot(x, x)) / x.size)


class _Stepper:
    def __init__(self, rhs, rtol, atol):
        self.rhs = rhs
        self.rtol = rtol
        self.atol = atol
        self.nfev = 0

    def f(self, t, y):
        self.nfev += 1
        out = np.asarray(self.rhs(t, y), dtype=float)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite right-hand side")
        return out

    def step(self, t, y, f0, h):
        """One DP step; returns (y_new, f_new, K, error_norm)."""
        K = np.empty((7, y.size))
        K[0] = f0
        for s in range(1, 6):
            K[s] = self.f(t + _C[s] * h, y + h * (_A[s, :s] @ K[:s]))
        y_new = y + h * (_B @ K[:6])
        f_new = self.f(t + h, y_new)
        K[6] = f_new
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(h * (_E @ K) / scale)
        return y_new, f_new, K, err

    def initial_step(self, t0, y0, f0, span):
        scale = self.atol + self.rtol * np.abs(y0)
        d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
        f1 = self.f(t0 + h0, y0 + h0 * f0)
        d2 = _rms((f1 - f0) / scale) / h0
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, span)


def _crossed(g0, g1, direction):
    if direction == Direction.DECREASING:
        return g0 > 0 >= g1
    if direction == Direction.INCREASING:
        return g0 < 0 <= g1
    return (g0 > 0 >= g1) or (g0 < 0 <= g1)


def integrate(
    sys: IvpSystem,
    tol: tuple[float, float] = (DEFAULT_RTOL, DEFAULT_ATOL),
    event_tol: float = DEFAULT_EVENT_TOL,
    max_step: float = math.inf,
    max_steps: int = 200_000,
) -> DenseTrajectory:
    """Integrate ``sys`` until ``t_end`` or the earliest armed event root.

    Event roots are bracketed on the dense output, located there with Brent's
    method, and then polished to ``event_tol`` in t on the map
    ``t -> g(t, one RK step from the step start to t)`` so that the reported
    state carries full step accuracy rather than interpolant accuracy.
    """
    rtol, atol = tol
    if not (rtol > 0 and atol > 0 and event_tol > 0):
        raise ValueError("tolerances must be positive")
    stepper = _Stepper(sys.rhs, rtol, atol)
    t = float(sys.t0)
    y = np.array(sys.y0, dtype=float)
    span = float(sys.t_end) - t
    min_step = 1e-14 * span
    ts, ys, qs = [t], [y], []

    def finish(status, message="", event=None):
        q = np.array(qs) if qs else np.zeros((0, y.size, 4))
        return DenseTrajectory(np.array(ts), np.array(ys), q, status, message, event, stepper.nfev)

    with np.errstate(over="ignore", invalid="ignore"):
        try:
            f = stepper.f(t, y)
            h = stepper.initial_step(t, y, f, span)
        except _ARITH as exc:
            return finish(Status.NONFINITE, f"right-hand side failed at t={t:.17g}: {exc}")
        h = min(h, max_step)
        g_prev = [None] * len(sys.events)
        steps = 0
        while t < sys.t_end:
            if steps >= max_steps:
                return finish(Status.MAX_STEPS, f"gave up after {max_steps} steps at t={t:.17g}")
            h = min(h, sys.t_end - t)
            last_failure = None
            while True:
                try:
                    y_new, f_new, K, err = stepper.step(t, y, f, h)
                    if not np.all(np.isfinite(y_new)) or not math.isfinite(err):
                        raise FloatingPointError("non-finite state")
                except _ARITH as exc:
                    last_failure = exc
                    h *= 0.25
                else:
                    if err <= 1.0:
                        break
                    last_failure = None
                    h *= max(_MIN_FACTOR, _SAFETY * err ** -0.2)
                if h < min_step:
                    if last_failure is not None:
                        return finish(Status.NONFINITE, f"blow-up near t={t:.17g}: {last_failure}")
                    return finish(Status.UNDERFLOW, f"step size underflow at t={t:.17g}")
            t_new = t + h if t + h < sys.t_end else float(sys.t_end)
            q = K.T @ _P
            steps += 1

            hit = _scan_events(sys.events, g_prev, t, y, t_new, y_new, q, h, event_tol)
            if hit is not None:
                idx, t_star = hit
                t_star, y_star, q_star = _polish(stepper, sys.events[idx], t, y, f, t_star, h, q, event_tol)
                ts.append(t_star)
                ys.append(y_star)
                qs.append(q_star)
                return finish(Status.EVENT, "", EventHit(idx, t_star, y_star))

            ts.append(t_new)
            ys.append(y_new)
            qs.append(q)
            t, y, f = t_new, y_new, f_new
            if err == 0:
                factor = _MAX_FACTOR
            else:
                factor = min(_MAX_FACTOR, _SAFETY * err ** -0.2)
            if last_failure is not None:
                factor = min(1.0, factor)
            h = min(h * factor, max_step)
    return finish(Status.COMPLETED)


def _interp(t0, y0, h, q, t):
    x = (t - t0) / h
    return y0 + h * (q @ np.array([x, x * x, x**3, x**4]))


def _scan_events(events, g_prev, t0, y0, t1, y1, q, h, event_tol):
    best = None
    for k, ev in enumerate(events):
        if t1 <= ev.active_after:
            continue
        if t0 >= ev.active_after and g_prev[k] is not None:
            ta, ga = t0, g_prev[k]
        else:
            ta = max(t0, ev.active_after)
            ga = ev.g(ta, _interp(t0, y0, h, q, ta) if ta > t0 else y0)
        gb = ev.g(t1, y1)
        g_prev[k] = gb
        if ga == 0 or not _crossed(ga, gb, ev.direction):
            continue
        if gb == 0:
            root = t1
        else:
            root = brentq(lambda s: ev.g(s, _interp(t0, y0, h, q, s)), ta, t1, xtol=event_tol, rtol=4 * np.finfo(float).eps)
        if best is None or root < best[1]:
            best = (k, root)
    return best


def _polish(stepper, ev, t0, y0, f0, t_guess, h, q, event_tol):
    """Refine an interpolated root using genuine RK steps from the step start."""

    def stepped(s):
        if s <= t0:
            return y0, None
        y_s, _, K, _ = stepper.step(t0, y0, f0, s - t0)
        return y_s, K

    def phi(s):
        return ev.g(s, stepped(s)[0])

    try:
        lo_bound = max(t0, ev.active_after)
        hi_bound = t0 + h
        g_guess = phi(t_guess)
        delta = max(event_tol, 1e-9 * h)
        t_root = t_guess
        if g_guess != 0:
            for _ in range(40):
                a, b = max(lo_bound, t_guess - delta), min(hi_bound, t_guess + delta)
                ga, gb = phi(a), phi(b)
                if ga * gb <= 0:
                    t_root = brentq(phi, a, b, xtol=event_tol, rtol=4 * np.finfo(float).eps) if ga * gb < 0 else (a if ga == 0 else b)
                    break
                if a == lo_bound and b == hi_bound:
                    break
                delta *= 8
        y_root, K = stepped(t_root)
        if K is None:
            return t_root, y_root, np.zeros_like(q)
        return t_root, y_root, K.T @ _P
    except _ARITH:
        # fall back to the interpolant root
        y_root = _interp(t0, y0, h, q, t_guess)
        # rescale so that x in [0, 1] spans [t0, t_guess]
        r = (t_guess - t0) / h
        return t_guess, y_root, q * np.array([1.0, r, r * r, r**3])
