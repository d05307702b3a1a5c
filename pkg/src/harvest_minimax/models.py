from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, DomainError


def _positive(field_name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(field_name, f"must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class BioModel:
    # Beverton-Holt reproduction with multiplicative recruitment shocks
    mortality: float
    r0: float
    half_saturation: float  # 10^6 pounds
    shock_lo: float = 1.0
    shock_hi: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.mortality < 1.0):
            raise ConfigError("mortality", f"must lie in [0, 1), got {self.mortality!r}")
        _positive("r0", self.r0)
        _positive("half_saturation", self.half_saturation)
        _positive("shock_lo", self.shock_lo)
        _positive("shock_hi", self.shock_hi)
        if self.shock_lo > self.shock_hi:
            raise ConfigError("shock_lo", f"{self.shock_lo!r} exceeds shock_hi {self.shock_hi!r}")
        if self.shock_lo * self.r0 <= self.mortality:
            raise ConfigError(
                "shock_lo",
                "shock_lo * r0 must exceed mortality (worst-case carrying capacity collapses)",
            )


@dataclass(frozen=True)
class EconModel:
    price: float          # $ per 10^6 pounds
    fixed_cost: float     # $ per harvesting season
    effort_cost: float    # $ per 10^3 skate-soaks
    catchability: float
    elasticity: float
    discount_rate: float

    def __post_init__(self):
        for name in ("price", "fixed_cost", "effort_cost", "catchability", "elasticity", "discount_rate"):
            _positive(name, getattr(self, name))

    @property
    def discount_factor(self) -> float:
        return 1.0 / (1.0 + self.discount_rate)


@dataclass(frozen=True)
class Grid:
    x_max: float
    step: float
    x_ref: Optional[float] = None

    def __post_init__(self):
        _positive("step", self.step)
        _positive("x_max", self.x_max)
        if self.x_max < 2 * self.step:
            raise ConfigError("x_max", f"must be at least two steps ({2 * self.step!r}), got {self.x_max!r}")
        if self.x_ref is None:
            object.__setattr__(self, "x_ref", float(self.step))
        if not (0.0 < self.x_ref <= self.x_max):
            raise ConfigError("x_ref", f"must lie in (0, x_max], got {self.x_ref!r}")

    @property
    def count(self) -> int:
        return int(math.floor(self.x_max / self.step + 1e-9)) + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.count, dtype=float) * self.step

    @property
    def top(self) -> float:
        """Largest node; equals x_max when x_max is a multiple of step."""
        return (self.count - 1) * self.step

    def index_of(self, x: float) -> int:
        """Index of the node nearest to x."""
        i = int(round(x / self.step))
        return min(max(i, 0), self.count - 1)


@dataclass(frozen=True)
class Horizon:
    periods: int

    def __post_init__(self):
        if not isinstance(self.periods, int) or self.periods < 1:
            raise ConfigError("horizon", f"must be a positive integer, got {self.periods!r}")


@dataclass(frozen=True)
class HarvestModel:
    """Bundle of everything a solve needs besides the grid and horizon.

    `reproduction` overrides the Beverton-Holt map built from `bio`; any object
    with vectorized `recruit(escapement, shock)` plus `shock_lo`/`shock_hi`
    attributes works, provided it is nondecreasing in both arguments.
    """

    bio: BioModel
    econ: EconModel
    shock_points: int = 5
    monotone_shortcut: bool = True
    reproduction: Optional[Any] = None

    def __post_init__(self):
        if not isinstance(self.shock_points, int) or self.shock_points < 1:
            raise ConfigError("shock_points", f"must be a positive integer, got {self.shock_points!r}")


# ---------------------------------------------------------------- K-concavity

@dataclass
class SampledFunction:
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.nodes.ndim != 1 or self.nodes.shape != self.values.shape:
            raise DomainError("nodes and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.nodes) <= 0):
            raise DomainError("nodes must be strictly ascending")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("sampled values must be finite")

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass
class ConcavityReport:
    is_k_concave: bool
    worst_slack: float
    k: float
    tolerance: float
    witness: Optional[Tuple[float, float, float]] = None  # (x, y, b)


@dataclass(frozen=True)
class Thresholds:
    S: float  # harvest-down-to level
    s: float  # trigger level

    def __post_init__(self):
        if not (0.0 <= self.S <= self.s):
            raise DomainError(f"thresholds must satisfy 0 <= S <= s, got S={self.S!r}, s={self.s!r}")


@dataclass
class Condition8:
    holds: bool
    tau: float
    bound: float
    anchor: float
    k_interval: Optional[Tuple[float, float]] = None


# ---------------------------------------------------------------- solver

@dataclass
class ValueTable:
    nodes: np.ndarray
    values: np.ndarray  # shape (N + 1, len(nodes)); row n is C_n
    interpolation: str = "linear"

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    def stage(self, n: int) -> np.ndarray:
        if not (0 <= n <= self.horizon):
            raise DomainError(f"stage {n} outside 0..{self.horizon}")
        return self.values[n]

    def at(self, n: int, x: float) -> float:
        return float(np.interp(x, self.nodes, self.stage(n)))


@dataclass
class ThresholdSchedule:
    """(S_n, s_n) pairs; entry n - 1 governs the stage with n periods remaining."""

    stages: List[Thresholds] = field(default_factory=list)
    flagged: List[int] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.stages)

    def stage(self, n: int) -> Thresholds:
        if not (1 <= n <= self.horizon):
            raise DomainError(f"stage {n} outside 1..{self.horizon}")
        return self.stages[n - 1]

    def for_year(self, year: int, total_years: Optional[int] = None) -> Thresholds:
        total = self.horizon if total_years is None else total_years
        if not (1 <= year <= total) or total > self.horizon:
            raise DomainError(f"year {year} beyond a {self.horizon}-period schedule")
        return self.stage(total - year + 1)


@dataclass
class SolverStats:
    p_evaluations: List[int] = field(default_factory=list)
    interpolations: List[int] = field(default_factory=list)
    bisection_interpolations: List[int] = field(default_factory=list)
    candidate_comparisons: List[int] = field(default_factory=list)
    wall_time: List[float] = field(default_factory=list)


@dataclass
class SolveResult:
    method: str
    values: ValueTable
    schedule: ThresholdSchedule
    policy: np.ndarray    # shape (N + 1, nodes); optimal escapement z, row 0 unused
    p_values: np.ndarray  # shape (N + 1, nodes); P_n on nodes, row 0 unused
    stats: SolverStats


# ---------------------------------------------------------------- calibration

@dataclass(frozen=True)
class FisheryRecord:
    year: int
    biomass: float  # 10^6 pounds
    harvest: float  # 10^6 pounds
    effort: float   # 10^3 skate-soaks


@dataclass
class FitResult:
    params: Dict[str, float]
    residuals: np.ndarray
    rmse: float
    converged: bool
    history: List[float] = field(default_factory=list)


# ---------------------------------------------------------------- evaluation

@dataclass
class TrajectoryStep:
    year: int
    stock_before: float
    harvest: float
    shock: float
    stock_after: float
    utility: float
    discounted_utility: float


@dataclass
class Trajectory:
    policy: str
    steps: List[TrajectoryStep] = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(math.fsum(step.discounted_utility for step in self.steps))

    @property
    def harvests(self) -> List[float]:
        return [step.harvest for step in self.steps]


@dataclass
class ComparisonRow:
    policy: str
    revenue: float  # worst-case realization, valued at the start of the first season
    loss: float
    worst_case_value: float
    simulated_value: float
