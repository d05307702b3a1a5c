"""Minimax dynamic programming on the stock grid.

Stage recursion, with z the escapement left after harvesting:

    C_0 = 0
    C_n(x) = alpha * max_{0 <= z <= x} [ R(x) - R(z) - K [z < x] + min_w C_{n-1}(f(z, w)) ]

so the first season is discounted by alpha^1. The harvest decision at stage n
is governed by

    P_n(z) = -R(z) + min_w C_{n-1}(f(z, w))

(harvest iff some z < x has P_n(z) - K > P_n(x)); with this normalization
C_n = alpha (P_n + R) below s_n and alpha (P_n(S_n) + R - K) above it.

`solve_dense` maximizes over every candidate escapement for every node.
`solve_fast` scans P_n once for S_n, bisects for s_n and rebuilds C_n from
the piecewise form without a per-node maximization.
"""
from __future__ import annotations

import functools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .bioeconomics import dynamics_for, revenue_on_nodes, revenue_rel, shock_grid
from .errors import DomainError, NumericalError
from .kconcave import check_k_concave, default_tolerance, screen_k_concave, thresholds_from_values
from .models import (
    Grid,
    HarvestModel,
    Horizon,
    SampledFunction,
    SolveResult,
    SolverStats,
    ThresholdSchedule,
    Thresholds,
    ValueTable,
)

logger = logging.getLogger(__name__)

# rows of the candidate matrix processed at once by the dense solver
_DENSE_CHUNK = 256


def _is_nondecreasing(values: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(values))))
    return bool(np.all(np.diff(values) >= -1e-12 * scale))


class _Stage:
    """Per-solve constants shared by every stage."""

    def __init__(self, model: HarvestModel, grid: Grid):
        self.model = model
        self.grid = grid
        self.nodes = grid.nodes
        self.top = grid.nodes[-1]
        self.alpha = model.econ.discount_factor
        self.k = model.econ.fixed_cost
        self.dynamics = dynamics_for(model)
        self.shocks = shock_grid(self.dynamics.shock_lo, self.dynamics.shock_hi, model.shock_points)
        self.revenue = revenue_on_nodes(grid, model.econ)

    def shocks_for(self, previous: np.ndarray) -> np.ndarray:
        # f is nondecreasing in w, so a nondecreasing C_{n-1} is minimized at the lowest shock
        if self.model.monotone_shortcut and _is_nondecreasing(previous):
            return self.shocks[:1]
        return self.shocks

    def continuation(self, previous: np.ndarray, z: np.ndarray, shocks: np.ndarray) -> np.ndarray:
        """min over shocks of C_{n-1}(f(z, w)), linear interpolation, clamped at the top node."""
        z = np.asarray(z, dtype=float)
        out = None
        for w in shocks:
            nxt = np.minimum(np.asarray(self.dynamics.recruit(z, w), dtype=float), self.top)
            val = np.interp(nxt, self.nodes, previous)
            out = val if out is None else np.minimum(out, val)
        return out


def p_fn(n: int, z, values: ValueTable, model: HarvestModel, grid: Grid):
    """P_n(z) = -R_rel(z) + min_w C_{n-1}(f(z, w)) for 1 <= n <= N."""
    if not (1 <= n <= values.horizon):
        raise DomainError(f"stage {n} outside 1..{values.horizon}")
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(zs < 0) or np.any(zs > grid.x_max):
        raise DomainError(f"escapement outside [0, {grid.x_max!r}]")
    ctx = _Stage(model, grid)
    previous = values.stage(n - 1)
    cont = ctx.continuation(previous, zs, ctx.shocks_for(previous))
    r = np.empty_like(zs)
    zero = zs == 0
    r[zero] = ctx.revenue[0]
    r[~zero] = revenue_rel(zs[~zero], grid, model.econ)
    out = cont - r
    return float(out[0]) if np.ndim(z) == 0 else out


def _check_finite(stage: int, values: np.ndarray, nodes: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericalError("non-finite value", stage=stage, node=float(nodes[bad[0]]))


def _dense_thresholds(nodes: np.ndarray, policy_idx: np.ndarray, q: np.ndarray, k: float) -> Thresholds:
    idx = np.arange(len(nodes))
    harvest = policy_idx < idx
    s_idx = int(np.flatnonzero(~harvest)[-1])
    above = np.arange(s_idx + 1, len(nodes))
    if above.size:
        S = float(nodes[policy_idx[above[0]]])
    else:
        S = thresholds_from_values(nodes, q, k).S
    return Thresholds(S=S, s=float(nodes[s_idx]))


def solve_dense(model: HarvestModel, grid: Grid, horizon: Horizon) -> SolveResult:
    """Reference solver: full maximization over escapements z <= x at every node."""
    ctx = _Stage(model, grid)
    nodes, n_nodes = ctx.nodes, len(ctx.nodes)
    big_n = horizon.periods
    values = np.zeros((big_n + 1, n_nodes))
    policy = np.tile(np.arange(n_nodes), (big_n + 1, 1))
    p_values = np.full((big_n + 1, n_nodes), np.nan)
    schedule = ThresholdSchedule()
    stats = SolverStats()
    logger.info("dense solve: %d nodes, %d stages, %d shocks", n_nodes, big_n, len(ctx.shocks))
    for n in range(1, big_n + 1):
        started = time.perf_counter()
        shocks = ctx.shocks_for(values[n - 1])
        v = ctx.continuation(values[n - 1], nodes, shocks)
        q = v - ctx.revenue
        p_values[n] = q
        best_idx = np.arange(n_nodes)
        best_q = np.full(n_nodes, -math.inf)
        cols = np.arange(n_nodes)
        for start in range(1, n_nodes, _DENSE_CHUNK):
            rows = np.arange(start, min(start + _DENSE_CHUNK, n_nodes))
            cand = np.where(cols[None, :] < rows[:, None], q[None, :], -math.inf)
            # largest maximizer: argmax over the reversed columns
            rev = n_nodes - 1 - np.argmax(cand[:, ::-1], axis=1)
            best_idx[rows] = rev
            best_q[rows] = cand[np.arange(len(rows)), rev]
        harvest = best_q - ctx.k > q
        # node 0 pairs R = +inf with best_q = -inf; that branch is never selected
        with np.errstate(invalid="ignore"):
            values[n] = ctx.alpha * np.where(harvest, ctx.revenue + best_q - ctx.k, v)
        policy[n] = np.where(harvest, best_idx, np.arange(n_nodes))
        _check_finite(n, values[n], nodes)
        schedule.stages.append(_dense_thresholds(nodes, policy[n], q, ctx.k))
        stats.p_evaluations.append(n_nodes)
        stats.interpolations.append(n_nodes * len(shocks))
        stats.bisection_interpolations.append(0)
        stats.candidate_comparisons.append(n_nodes * (n_nodes - 1) // 2)
        stats.wall_time.append(time.perf_counter() - started)
        logger.debug("dense stage %d: S=%g s=%g (%.3fs)", n, schedule.stages[-1].S,
                     schedule.stages[-1].s, stats.wall_time[-1])
    return SolveResult(
        method="dense",
        values=ValueTable(nodes=nodes, values=values),
        schedule=schedule,
        policy=nodes[policy],
        p_values=p_values,
        stats=stats,
    )


def solve_fast(model: HarvestModel, grid: Grid, horizon: Horizon) -> SolveResult:
    """Structure-exploiting solver: argmax scan for S_n, bisection for s_n."""
    ctx = _Stage(model, grid)
    nodes, n_nodes = ctx.nodes, len(ctx.nodes)
    big_n = horizon.periods
    values = np.zeros((big_n + 1, n_nodes))
    policy = np.tile(nodes, (big_n + 1, 1))
    p_values = np.full((big_n + 1, n_nodes), np.nan)
    schedule = ThresholdSchedule()
    stats = SolverStats()
    logger.info("fast solve: %d nodes, %d stages, %d shocks", n_nodes, big_n, len(ctx.shocks))
    for n in range(1, big_n + 1):
        started = time.perf_counter()
        previous = values[n - 1]
        shocks = ctx.shocks_for(previous)
        v = ctx.continuation(previous, nodes, shocks)
        q = v - ctx.revenue
        p_values[n] = q
        top = np.max(q)
        s_big = int(np.flatnonzero(q == top)[-1])
        target = q[s_big] - ctx.k
        lookups = 0

        def harvest_pays(i: int) -> bool:
            nonlocal lookups
            lookups += 1
            p_i = ctx.continuation(previous, nodes[i:i + 1], shocks)[0] - ctx.revenue[i]
            return bool(target > p_i)

        if not harvest_pays(n_nodes - 1):
            s_idx = n_nodes - 1
        else:
            lo, hi = s_big, n_nodes - 1
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if harvest_pays(mid):
                    hi = mid
                else:
                    lo = mid
            s_idx = lo
        scan = int(np.flatnonzero(q >= target)[-1])
        if scan != s_idx:
            logger.warning("stage %d: harvest predicate not monotone (bisection %g, scan %g); using scan",
                           n, nodes[s_idx], nodes[scan])
            schedule.flagged.append(n)
            s_idx = scan
        values[n, : s_idx + 1] = ctx.alpha * v[: s_idx + 1]
        values[n, s_idx + 1:] = ctx.alpha * (ctx.revenue[s_idx + 1:] + q[s_big] - ctx.k)
        policy[n, s_idx + 1:] = nodes[s_big]
        _check_finite(n, values[n], nodes)
        schedule.stages.append(Thresholds(S=float(nodes[s_big]), s=float(nodes[s_idx])))
        stats.p_evaluations.append(n_nodes + lookups)
        stats.interpolations.append((n_nodes + lookups) * len(shocks))
        stats.bisection_interpolations.append(lookups * len(shocks))
        stats.candidate_comparisons.append(n_nodes)
        stats.wall_time.append(time.perf_counter() - started)
        logger.debug("fast stage %d: S=%g s=%g lookups=%d (%.3fs)", n, nodes[s_big], nodes[s_idx],
                     lookups, stats.wall_time[-1])
    return SolveResult(
        method="fast",
        values=ValueTable(nodes=nodes, values=values),
        schedule=schedule,
        policy=policy,
        p_values=p_values,
        stats=stats,
    )


@functools.lru_cache(maxsize=16)
def cached_solve(model: HarvestModel, grid: Grid, periods: int) -> SolveResult:
    return solve_fast(model, grid, Horizon(periods))


def rolling_horizon_action(x: float, model: HarvestModel, grid: Grid, lookahead: Horizon) -> float:
    """First action of a fresh `lookahead`-period problem started at stock x."""
    if x < 0 or x > grid.x_max * (1 + 1e-12):
        raise DomainError(f"stock {x!r} outside [0, {grid.x_max!r}]")
    rule = cached_solve(model, grid, lookahead.periods).schedule.stage(lookahead.periods)
    return 0.0 if x <= rule.s else x - rule.S


# ---------------------------------------------------------------- diagnostics

@dataclass
class StageCertificate:
    stage: int
    concavity_slack: float
    k_concave: bool
    nondecreasing: bool
    threshold_structured: bool
    piecewise_error: float


@dataclass
class Certificate:
    stages: List[StageCertificate] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(s.k_concave and s.nondecreasing and s.threshold_structured for s in self.stages)


def certify(result: SolveResult, model: HarvestModel, grid: Grid, stride: int = 1,
            tol: Optional[float] = None, exhaustive: bool = False) -> Certificate:
    """Check the structure that makes the threshold schedule optimal, stage by stage.

    - P_n is K-concave on the positive nodes (every `stride`-th node);
    - C_n is nondecreasing;
    - the policy harvests nothing up to s_n and harvests down to S_n above it,
      with one node of slack at the boundary;
    - C_n matches the piecewise form built from P_n, S_n and s_n.
    """
    k = model.econ.fixed_cost
    tol = default_tolerance(k) if tol is None else tol
    nodes = result.values.nodes
    revenue = revenue_on_nodes(grid, model.econ)
    alpha = model.econ.discount_factor
    checker = check_k_concave if exhaustive else screen_k_concave
    cert = Certificate()
    for n in range(1, result.values.horizon + 1):
        p = result.p_values[n]
        keep = np.flatnonzero(np.isfinite(p))[::stride]
        report = checker(SampledFunction(nodes[keep], p[keep]), k, tol)
        c = result.values.stage(n)
        rule = result.schedule.stage(n)
        S_idx = grid.index_of(rule.S)
        z = result.policy[n]
        below = nodes <= rule.s
        structured = bool(np.all(z[below][:-1] == nodes[below][:-1])) and bool(
            np.all(z[~below][1:] == rule.S))
        with np.errstate(invalid="ignore"):
            expected = np.where(below, alpha * (p + revenue), alpha * (p[S_idx] + revenue - k))
        # zero node: P and R are both infinite there, C_n(0) = 0
        expected[~np.isfinite(expected)] = c[~np.isfinite(expected)]
        scale = max(1.0, float(np.max(np.abs(c))))
        err = float(np.max(np.abs(expected - c))) / scale
        cert.stages.append(StageCertificate(
            stage=n,
            concavity_slack=report.worst_slack,
            k_concave=report.is_k_concave,
            nondecreasing=_is_nondecreasing(c),
            threshold_structured=structured,
            piecewise_error=err,
        ))
    return cert


def refinement_study(model: HarvestModel, grids: Sequence[Grid], horizon: Horizon,
                     stocks: Sequence[float]) -> List[float]:
    """Max deviation of C_N at the given stocks between successive grids."""
    finals = []
    for grid in grids:
        result = solve_fast(model, grid, horizon)
        finals.append(np.interp(np.asarray(stocks, dtype=float), result.values.nodes,
                                result.values.stage(horizon.periods)))
    return [float(np.max(np.abs(b - a))) for a, b in zip(finals, finals[1:])]
