"""Composite Gauss-Legendre quadrature."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

ORDER = 8
PANELS = 64


@lru_cache(maxsize=None)
def _rule(order: int):
    return np.polynomial.legendre.leggauss(order)


def nodes_weights(a: float, b: float, panels: int = PANELS, order: int = ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite rule on ``[a, b]`` with equal panels."""
    x, w = _rule(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def graded_nodes_weights(a: float, b: float, panels: int = PANELS, order: int = ORDER, levels: int = 40):
    """Composite rule whose first panel is split dyadically towards ``a``.

    Suited to integrands like ``z log z`` whose derivatives are unbounded at ``a``.
    """
    nodes, weights = nodes_weights(a, b, panels, order)
    width = (b - a) / panels
    keep = slice(order, None)
    parts_n, parts_w = [nodes[keep]], [weights[keep]]
    hi = a + width
    for _ in range(levels):
        lo = a + (hi - a) / 2
        n_, w_ = nodes_weights(lo, hi, 1, order)
        parts_n.append(n_)
        parts_w.append(w_)
        hi = lo
    n_, w_ = nodes_weights(a, hi, 1, order)
    parts_n.append(n_)
    parts_w.append(w_)
    return np.concatenate(parts_n), np.concatenate(parts_w)


def integrate_samples(values: np.ndarray, weights: np.ndarray) -> float:
    return float(np.dot(values, weights))


def gauss_legendre(func, a: float, b: float, panels: int = PANELS, order: int = ORDER) -> float:
    """``int_a^b func`` for a vectorized ``func``."""
    nodes, weights = nodes_weights(a, b, panels, order)
    return float(np.dot(func(nodes), weights))
