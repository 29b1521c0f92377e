"""Damped Newton loop shared by the continuation solvers."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .model import NewtonFailed, NewtonReport

MAX_ITER = 25
MAX_HALVINGS = 8


def damped_newton(
    evaluate: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    solve: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x0,
    tol: float,
    max_iter: int = MAX_ITER,
    max_halvings: int = MAX_HALVINGS,
    record=lambda x: x,
):
    """Newton on ``evaluate(x) -> (residual, jacobian)`` with step halving.

    ``solve(J, r)`` returns the correction ``dx`` with ``J dx = -r`` and may raise
    a :class:`NewtonFailed` subclass for singular systems.  A step is halved (at
    most ``max_halvings`` times) while the max-norm residual fails to decrease.
    Returns ``(x, residual, jacobian, report)``.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    report = NewtonReport()
    r, J = evaluate(x)
    norm = float(np.max(np.abs(r)))
    report.iterates.append((record(x), norm))
    while True:
        if norm <= tol:
            report.converged = True
            return x, r, J, report
        if report.steps >= max_iter:
            report.message = f"no convergence in {max_iter} iterations (|F| = {norm:.3e})"
            raise NewtonFailed(report.message, report)
        try:
            dx = solve(J, r)
        except NewtonFailed as exc:
            exc.report = report
            report.message = str(exc)
            raise
        for _ in range(max_halvings + 1):
            trial = x + dx
            r_t, J_t = evaluate(trial)
            norm_t = float(np.max(np.abs(r_t)))
            if norm_t < norm:
                break
            dx = dx / 2
        else:
            report.message = f"residual did not decrease after {max_halvings} halvings (|F| = {norm:.3e})"
            raise NewtonFailed(report.message, report)
        x, r, J, norm = trial, r_t, J_t, norm_t
        report.steps += 1
        report.iterates.append((record(x), norm))
