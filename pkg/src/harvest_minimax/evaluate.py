"""Policy simulation and worst-case evaluation against adversarial shocks."""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bioeconomics import dynamics_for, harvest_utility, shock_grid
from .errors import DomainError
from .models import ComparisonRow, Grid, HarvestModel, Horizon, ThresholdSchedule, Trajectory, TrajectoryStep
from .solver import cached_solve, rolling_horizon_action

logger = logging.getLogger(__name__)


class Policy(ABC):
    """Harvest rule mapping (stock, year) to a harvest; must accept NumPy arrays."""

    name: str = "policy"

    @abstractmethod
    def action(self, x, year: int, total_years: int):
        ...


@dataclass(frozen=True)
class ThresholdPolicy(Policy):
    schedule: ThresholdSchedule = field(hash=False)
    name: str = "Optimal S-s"

    def action(self, x, year, total_years):
        rule = self.schedule.for_year(year, total_years)
        return np.where(np.asarray(x) > rule.s, np.asarray(x) - rule.S, 0.0)


@dataclass(frozen=True)
class ProportionalPolicy(Policy):
    rate: float
    name: str = "Average CPP"

    def __post_init__(self):
        if not (0.0 <= self.rate <= 1.0):
            raise DomainError(f"harvest rate must lie in [0, 1], got {self.rate!r}")

    def action(self, x, year, total_years):
        return self.rate * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class SequencePolicy(Policy):
    fractions: Tuple[float, ...]
    name: str = "Historical rates"

    def action(self, x, year, total_years):
        if not (1 <= year <= len(self.fractions)):
            raise DomainError(f"year {year} beyond the {len(self.fractions)}-year harvest sequence")
        return self.fractions[year - 1] * np.asarray(x, dtype=float)


@dataclass(frozen=True)
class RollingHorizonPolicy(Policy):
    model: HarvestModel
    grid: Grid
    lookahead: Horizon
    name: str = "Rolling horizon"

    def action(self, x, year, total_years):
        if np.ndim(x) == 0:
            return rolling_horizon_action(float(x), self.model, self.grid, self.lookahead)
        # a fixed lookahead always lands on the same first-stage rule
        rule = cached_solve(self.model, self.grid, self.lookahead.periods).schedule.stage(self.lookahead.periods)
        return np.where(np.asarray(x) > rule.s, np.asarray(x) - rule.S, 0.0)


def apply_policy(policy: Policy, x: float, year_index: int, total_years: int) -> float:
    if x < 0:
        raise DomainError(f"year {year_index}: negative stock {x!r}")
    if not (1 <= year_index <= total_years):
        raise DomainError(f"year {year_index} outside 1..{total_years}")
    h = float(policy.action(x, year_index, total_years))
    if not (0.0 <= h <= x):
        raise DomainError(f"year {year_index}: {policy.name} harvests {h!r} from stock {x!r}")
    return h


@dataclass(frozen=True)
class ShockRule:
    kind: str  # "constant" | "worst_greedy" | "sequence"
    value: float = 1.0
    sequence: Tuple[float, ...] = ()

    @classmethod
    def constant(cls, w: float) -> "ShockRule":
        return cls("constant", value=w)

    @classmethod
    def worst_greedy(cls) -> "ShockRule":
        return cls("worst_greedy")

    @classmethod
    def given(cls, shocks: Sequence[float]) -> "ShockRule":
        return cls("sequence", sequence=tuple(float(w) for w in shocks))

    @classmethod
    def parse(cls, text: str) -> "ShockRule":
        """`worst`, `constant:<w>` or `sequence:<w1>,<w2>,...`."""
        head, _, tail = text.partition(":")
        if head in ("worst", "worst_greedy"):
            return cls.worst_greedy()
        if head == "constant" and tail:
            return cls.constant(float(tail))
        if head == "sequence" and tail:
            return cls.given(float(w) for w in tail.split(","))
        raise DomainError(f"unknown shock rule {text!r}")

    def shock(self, year: int, lo: float) -> float:
        if self.kind == "worst_greedy":
            return lo
        if self.kind == "constant":
            return self.value
        if year > len(self.sequence):
            raise DomainError(f"shock sequence has no entry for year {year}")
        return self.sequence[year - 1]


def simulate(policy: Policy, x1: float, years: Horizon, shock_rule: ShockRule,
             model: HarvestModel, grid: Grid) -> Trajectory:
    """Roll the stock forward under `policy`; year t is discounted by alpha^t."""
    if not (0.0 <= x1 <= grid.x_max):
        raise DomainError(f"initial stock {x1!r} outside [0, {grid.x_max!r}]")
    dynamics = dynamics_for(model)
    alpha = model.econ.discount_factor
    traj = Trajectory(policy=policy.name)
    x = float(x1)
    for t in range(1, years.periods + 1):
        h = apply_policy(policy, x, t, years.periods)
        w = shock_rule.shock(t, dynamics.shock_lo)
        u = float(harvest_utility(x, h, grid, model.econ))
        after = float(dynamics.recruit(x - h, w))
        traj.steps.append(TrajectoryStep(
            year=t, stock_before=x, harvest=h, shock=w, stock_after=after,
            utility=u, discounted_utility=alpha ** t * u,
        ))
        x = after
    return traj


def worst_case_value(policy: Policy, x1: float, years: Horizon, model: HarvestModel, grid: Grid) -> float:
    """Value of a fixed policy when nature picks every shock adversarially.

    Backward recursion on the grid: W_n(x) = alpha (u(x, h) + min_w W_{n-1}(f(x - h, w))).
    """
    if not (0.0 <= x1 <= grid.x_max):
        raise DomainError(f"initial stock {x1!r} outside [0, {grid.x_max!r}]")
    dynamics = dynamics_for(model)
    shocks = shock_grid(dynamics.shock_lo, dynamics.shock_hi, model.shock_points)
    alpha = model.econ.discount_factor
    nodes = grid.nodes
    total = years.periods
    w_prev = np.zeros_like(nodes)
    for n in range(1, total + 1):
        year = total - n + 1
        h = np.asarray(policy.action(nodes, year, total), dtype=float) * np.ones_like(nodes)
        if np.any(h < 0) or np.any(h > nodes):
            raise DomainError(f"year {year}: {policy.name} is not admissible on the grid")
        u = harvest_utility(nodes, h, grid, model.econ)
        z = nodes - h
        cont = None
        for w in shocks:
            nxt = np.minimum(np.asarray(dynamics.recruit(z, w), dtype=float), nodes[-1])
            val = np.interp(nxt, nodes, w_prev)
            cont = val if cont is None else np.minimum(cont, val)
        w_prev = alpha * (u + cont)
    return float(np.interp(x1, nodes, w_prev))


def compare(policies: Sequence[Policy], x1: float, years: Horizon, model: HarvestModel,
            grid: Grid) -> List[ComparisonRow]:
    """Discounted revenue of each policy under the worst-case realization, and its loss.

    The realization holds every shock at shock_lo; the rolling rule re-solves
    from the stock it actually reaches. `revenue` is valued at the start of the
    first season (year t weighted alpha^(t-1)) and losses are taken against the
    best revenue. `worst_case_value` is the adversarial value of the fixed
    policy and `simulated_value` the realization, both weighted alpha^t like C_N.
    """
    alpha = model.econ.discount_factor
    rows = []
    for policy in policies:
        value = worst_case_value(policy, x1, years, model, grid)
        simulated = simulate(policy, x1, years, ShockRule.worst_greedy(), model, grid).total
        logger.info("%s: revenue %.6g, adversarial %.6g, constant worst shock %.6g",
                    policy.name, simulated / alpha, value, simulated)
        rows.append(ComparisonRow(policy=policy.name, revenue=simulated / alpha, loss=0.0,
                                  worst_case_value=value, simulated_value=simulated))
    best = max((r.revenue for r in rows), default=0.0)
    for r in rows:
        r.loss = best - r.revenue
    return rows


def discount_share(trajectory: Trajectory, year: Optional[int] = None) -> float:
    """Share of the total discounted revenue earned in `year` (default: the last)."""
    total = trajectory.total
    if total == 0:
        return 0.0
    step = trajectory.steps[-1] if year is None else trajectory.steps[year - 1]
    return step.discounted_utility / total


def closure_runs(trajectory: Trajectory) -> List[int]:
    """Lengths of zero-harvest runs that end in a harvest."""
    runs, current = [], 0
    for h in trajectory.harvests:
        if h == 0:
            current += 1
        else:
            if current:
                runs.append(current)
            current = 0
    return runs

