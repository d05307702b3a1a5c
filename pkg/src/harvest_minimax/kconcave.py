"""K-concavity checks, the tau condition, and (S, s) threshold extraction.

A function beta is K-concave when for all x < y and b > 0

    beta(x) - beta(y) - (x - y) * (beta(y + b) - beta(y)) / b <= K,

i.e. beta(y) never falls more than K below the secant through (x, beta(x) - K)
and (y + b, beta(y + b)). On sampled functions x, y and y + b range over nodes.
"""
from __future__ import annotations

import logging
import math
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .bioeconomics import effort_between, marginal_cost
from .errors import DomainError
from .models import ConcavityReport, Condition8, EconModel, Grid, SampledFunction, Thresholds

logger = logging.getLogger(__name__)


def default_tolerance(k: float) -> float:
    return 1e-6 * max(1.0, abs(k))


def _prepare(f: SampledFunction, k: float, tol: Optional[float]) -> float:
    if k < 0:
        raise DomainError(f"K must be nonnegative, got {k!r}")
    if len(f) < 3:
        raise DomainError("K-concavity needs at least 3 nodes")
    return default_tolerance(k) if tol is None else tol


def check_k_concave(f: SampledFunction, k: float, tol: Optional[float] = None) -> ConcavityReport:
    """Exhaustive check over every node triple x < y < y + b.

    Work is O(n^3); middles y are processed one at a time so memory stays O(n^2).
    """
    tol = _prepare(f, k, tol)
    x, v = f.nodes, f.values
    n = len(x)
    worst = -math.inf
    witness = None
    for j in range(1, n - 1):
        left_x, left_v = x[:j], v[:j]
        secant = (v[j + 1:] - v[j]) / (x[j + 1:] - x[j])
        # rows: x (i < j), columns: y + b (l > j)
        slack = (left_v - v[j])[:, None] - (left_x - x[j])[:, None] * secant[None, :] - k
        flat = int(np.argmax(slack))
        i, l = divmod(flat, slack.shape[1])
        if slack[i, l] > worst:
            worst = float(slack[i, l])
            witness = (float(left_x[i]), float(x[j]), float(x[j + 1 + l] - x[j]))
    ok = worst <= tol
    return ConcavityReport(is_k_concave=ok, worst_slack=worst, k=k, tolerance=tol,
                           witness=None if ok else witness)


def screen_k_concave(f: SampledFunction, k: float, tol: Optional[float] = None) -> ConcavityReport:
    """O(n^2) variant using the largest right secant at each middle node.

    For a fixed middle y the coefficient y - x of the secant slope is positive,
    so the worst right end is the one with the steepest secant, independently
    of x. The verdict and worst slack match `check_k_concave`.
    """
    tol = _prepare(f, k, tol)
    x, v = f.nodes, f.values
    n = len(x)
    worst = -math.inf
    witness = None
    for j in range(1, n - 1):
        secant = (v[j + 1:] - v[j]) / (x[j + 1:] - x[j])
        l = int(np.argmax(secant))
        slack = v[:j] - v[j] + (x[j] - x[:j]) * secant[l] - k
        i = int(np.argmax(slack))
        if slack[i] > worst:
            worst = float(slack[i])
            witness = (float(x[i]), float(x[j]), float(x[j + 1 + l] - x[j]))
    ok = worst <= tol
    return ConcavityReport(is_k_concave=ok, worst_slack=worst, k=k, tolerance=tol,
                           witness=None if ok else witness)


def tau_from_marginal(g: Callable[[float], float], lower: float, upper: float) -> float:
    """integral of g over [lower, upper] minus (upper - lower) g(upper), by quadrature."""
    area, _ = integrate.quad(g, lower, upper, limit=200)
    return area - (upper - lower) * g(upper)


def tau(econ: EconModel, grid: Grid) -> float:
    """G(x_max) - x_max g(x_max), evaluated with G anchored at x_ref.

    Anchoring moves the origin of the cost integral to x_ref, which adds
    x_ref * g(x_max) to the literal expression:
    tau = G_rel(x_max) - (x_max - x_ref) g(x_max).
    """
    g_top = float(marginal_cost(grid.x_max, econ))
    g_rel = econ.effort_cost * float(effort_between(grid.x_ref, grid.x_max, econ.catchability, econ.elasticity))
    return g_rel - grid.x_max * g_top + grid.x_ref * g_top


def condition8_verdict(tau_value: float, fixed_cost: float, discount_factor: float, anchor: float = 0.0) -> Condition8:
    bound = fixed_cost * (1.0 - discount_factor) / discount_factor
    holds = tau_value < bound
    interval = ((fixed_cost + tau_value) * discount_factor, fixed_cost) if holds else None
    return Condition8(holds=holds, tau=tau_value, bound=bound, anchor=anchor, k_interval=interval)


def condition8_holds(econ: EconModel, grid: Grid) -> Condition8:
    """tau < K (1 - alpha) / alpha, with the admissible k-interval when it holds."""
    report = condition8_verdict(tau(econ, grid), econ.fixed_cost, econ.discount_factor, anchor=grid.x_ref)
    if not report.holds:
        logger.warning("condition (8) fails: tau=%.6g >= bound=%.6g (anchored at x_ref=%g)",
                       report.tau, report.bound, grid.x_ref)
    return report


def extract_thresholds(p: SampledFunction, k: float) -> Thresholds:
    """S maximizes P (largest maximizer); s is the largest node with P >= P(S) - K."""
    return thresholds_from_values(p.nodes, p.values, k)


def thresholds_from_values(nodes: np.ndarray, values: np.ndarray, k: float) -> Thresholds:
    # accepts -inf entries (P at zero stock when the cost integral diverges)
    top = np.max(values)
    big = np.flatnonzero(values == top)[-1]
    keep = np.flatnonzero(values >= top - k)
    return Thresholds(S=float(nodes[big]), s=float(nodes[keep[-1]]))
