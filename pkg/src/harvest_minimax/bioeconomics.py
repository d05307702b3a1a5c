"""Population dynamics and harvesting economics of the managed stock.

Stocks are in 10^6 pounds, money in $, effort in 10^3 skate-soaks. Every
function accepts scalars or NumPy arrays and returns a float for scalar input.

Cost integrals are anchored at the grid reference level ``x_ref``: for an
elasticity b >= 1 the integral of the marginal cost from 0 diverges, and only
differences of the revenue function ever enter a harvest decision.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Union

import numpy as np

from .errors import ConfigError, DomainError
from .models import BioModel, EconModel, Grid, HarvestModel

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# relative slack when testing a shock against its support
_SUPPORT_TOL = 1e-12


def _out(value: np.ndarray, *inputs) -> ArrayLike:
    if all(np.ndim(v) == 0 for v in inputs):
        return float(value)
    return value


def _check_shock(w: np.ndarray, lo: float, hi: float) -> None:
    slack = _SUPPORT_TOL * max(1.0, abs(hi))
    if np.any(w < lo - slack) or np.any(w > hi + slack):
        raise DomainError(f"shock outside support [{lo!r}, {hi!r}]")


def recruit(escapement: ArrayLike, shock: ArrayLike, bio: BioModel) -> ArrayLike:
    """Next-season stock (1 - m) s + w r0 s / (1 + s / M)."""
    s = np.asarray(escapement, dtype=float)
    w = np.asarray(shock, dtype=float)
    if np.any(s < 0):
        raise DomainError("escapement must be nonnegative")
    _check_shock(w, bio.shock_lo, bio.shock_hi)
    out = (1.0 - bio.mortality) * s + w * bio.r0 * s / (1.0 + s / bio.half_saturation)
    return _out(out, escapement, shock)


def carrying_capacity(shock: float, bio: BioModel) -> float:
    """Positive fixed point M (w r0 - m) / m of the reproduction map.

    The shock is not restricted to the support so that degenerate regimes can
    be explored; when w r0 <= m there is no positive fixed point and 0 is
    returned with a warning.
    """
    if shock <= 0:
        raise DomainError(f"shock must be positive, got {shock!r}")
    growth = shock * bio.r0
    if growth <= bio.mortality:
        logger.warning("no positive fixed point: w*r0=%r <= mortality=%r", growth, bio.mortality)
        return 0.0
    if bio.mortality == 0.0:
        return math.inf
    return bio.half_saturation * (growth - bio.mortality) / bio.mortality


class Reproduction(Protocol):
    """Stock transition z, w -> f(z, w), nondecreasing in both arguments."""

    shock_lo: float
    shock_hi: float

    def recruit(self, escapement: ArrayLike, shock: ArrayLike) -> ArrayLike:
        ...


@dataclass(frozen=True)
class BevertonHolt:
    """Adapts a BioModel to the reproduction contract the solvers consume."""

    bio: BioModel

    @property
    def shock_lo(self) -> float:
        return self.bio.shock_lo

    @property
    def shock_hi(self) -> float:
        return self.bio.shock_hi

    def recruit(self, escapement: ArrayLike, shock: ArrayLike) -> ArrayLike:
        return recruit(escapement, shock, self.bio)


def dynamics_for(model: HarvestModel) -> Reproduction:
    return model.reproduction if model.reproduction is not None else BevertonHolt(model.bio)


def shock_grid(lo: float, hi: float, points: int) -> np.ndarray:
    """Discretized support: both endpoints plus evenly spaced interior points."""
    if lo == hi or points == 1:
        return np.array([lo], dtype=float)
    return np.linspace(lo, hi, max(points, 2))


def default_grid(bio: BioModel, step: float, x_ref: Optional[float] = None) -> Grid:
    """Grid whose top node is the best-case carrying capacity rounded up to a node."""
    cap = carrying_capacity(bio.shock_hi, bio)
    if not math.isfinite(cap):
        raise ConfigError("x_max", "zero mortality has no carrying capacity; give x_max explicitly")
    x_max = math.ceil(cap / step - 1e-9) * step
    return Grid(x_max=x_max, step=step, x_ref=x_ref)


# ---------------------------------------------------------------- economics

def marginal_cost(stock: ArrayLike, econ: EconModel) -> ArrayLike:
    """Cost c / (q x^b) of harvesting one more unit at stock x."""
    x = np.asarray(stock, dtype=float)
    if np.any(x <= 0):
        raise DomainError("marginal cost diverges at zero stock")
    return _out(econ.effort_cost / (econ.catchability * x ** econ.elasticity), stock)


def effort_between(lower: ArrayLike, upper: ArrayLike, catchability: float, elasticity: float) -> ArrayLike:
    """Closed-form integral of 1 / (q y^b) over [lower, upper] (signed)."""
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if math.isclose(elasticity, 1.0, rel_tol=0.0, abs_tol=1e-12):
            out = (np.log(hi) - np.log(lo)) / catchability
        else:
            e = 1.0 - elasticity
            out = (hi ** e - lo ** e) / (catchability * e)
    return _out(out, lower, upper)


def effort(stock_before: ArrayLike, harvest: ArrayLike, econ: EconModel) -> ArrayLike:
    """Effort needed to bring the stock from x down to x - h."""
    x = np.asarray(stock_before, dtype=float)
    h = np.asarray(harvest, dtype=float)
    if np.any(h < 0):
        raise DomainError("harvest must be nonnegative")
    if np.any(h > x):
        raise DomainError("harvest exceeds stock")
    z = x - h
    if econ.elasticity >= 1.0 and np.any((z <= 0) & (h > 0)):
        raise DomainError("harvesting the stock to zero needs infinite effort when elasticity >= 1")
    out = np.where(h > 0, effort_between(np.where(h > 0, z, 1.0), np.where(h > 0, x, 1.0),
                                         econ.catchability, econ.elasticity), 0.0)
    return _out(out, stock_before, harvest)


def revenue_rel(stock: ArrayLike, grid: Grid, econ: EconModel) -> ArrayLike:
    """R(x) - R(x_ref) with R(x) = p x - c * integral of 1/(q y^b) from 0 to x."""
    x = np.asarray(stock, dtype=float)
    if np.any(x < 0):
        raise DomainError("stock must be nonnegative")
    if econ.elasticity >= 1.0 and np.any(x == 0):
        raise DomainError("revenue is unbounded at zero stock when elasticity >= 1")
    cost = econ.effort_cost * effort_between(grid.x_ref, x, econ.catchability, econ.elasticity)
    return _out(econ.price * (x - grid.x_ref) - cost, stock)


def zero_profit_level(econ: EconModel) -> float:
    """Stock x0 at which the marginal harvesting cost equals the price."""
    return (econ.effort_cost / (econ.catchability * econ.price)) ** (1.0 / econ.elasticity)


def harvest_utility(stock: ArrayLike, harvest: ArrayLike, grid: Grid, econ: EconModel) -> ArrayLike:
    """One season's profit p h - c E(x, h) - K [h > 0]; gauge-free in x_ref."""
    h = np.asarray(harvest, dtype=float)
    e = effort(stock, harvest, econ)
    out = np.where(h > 0, econ.price * h - econ.effort_cost * np.asarray(e) - econ.fixed_cost, 0.0)
    return _out(out, stock, harvest)


def revenue_on_nodes(grid: Grid, econ: EconModel) -> np.ndarray:
    """revenue_rel at every node, +inf at the zero node when it diverges there."""
    nodes = grid.nodes
    out = np.empty_like(nodes)
    if econ.elasticity >= 1.0:
        out[0] = math.inf
        out[1:] = revenue_rel(nodes[1:], grid, econ)
    else:
        out[:] = revenue_rel(nodes, grid, econ)
    return out
