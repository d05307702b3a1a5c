"""Least-squares calibration of the bioeconomic model from fishery time series.

Both fits exploit a linear substructure: for a fixed half-saturation M the
recruitment model is linear in r0, and for a fixed elasticity b the log of the
effort model is linear in log(1/q). The nonlinear parameter is bracketed on a
coarse grid, refined with a bounded scalar search on the profiled objective,
and both parameters are then polished jointly with
`scipy.optimize.least_squares`. Effort residuals are log ratios.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .bioeconomics import effort_between, recruit
from .errors import CalibrationError, DomainError, FileSystemError, ParsingError
from .models import BioModel, EconModel, FisheryRecord, FitResult
from .utils import atomic_write_text, csv_text

logger = logging.getLogger(__name__)

SERIES_HEADER = ["year", "biomass", "harvest", "effort"]


@dataclass(frozen=True)
class FitBounds:
    r0_max: float = 5.0
    half_saturation_min: float = 1.0
    half_saturation_factor: float = 10.0  # upper bound = factor * max biomass
    elasticity_min: float = 1e-3
    elasticity_max: float = 6.0
    bracket_points: int = 241


# ---------------------------------------------------------------- series I/O

def validate_record(rec: FisheryRecord) -> None:
    for name in ("biomass", "harvest", "effort"):
        value = getattr(rec, name)
        if not math.isfinite(value) or value < 0:
            raise DomainError(f"year {rec.year}: {name} must be finite and nonnegative, got {value!r}")
    if rec.harvest > rec.biomass:
        raise DomainError(f"year {rec.year}: harvest {rec.harvest!r} exceeds biomass {rec.biomass!r}")


def load_series(path: str) -> List[FisheryRecord]:
    """Read a `year,biomass,harvest,effort` CSV into validated records in year order."""
    p = Path(path)
    if not p.exists():
        raise FileSystemError(f"File not found: {path}")
    records: List[FisheryRecord] = []
    with p.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = None
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if header is None:
                header = [c.strip().lower() for c in row]
                if header != SERIES_HEADER:
                    raise ParsingError(f"expected header {','.join(SERIES_HEADER)}", line=reader.line_num)
                continue
            if len(row) != len(SERIES_HEADER):
                raise ParsingError(f"expected {len(SERIES_HEADER)} fields, got {len(row)}", line=reader.line_num)
            try:
                rec = FisheryRecord(
                    year=int(row[0]),
                    biomass=float(row[1]),
                    harvest=float(row[2]),
                    effort=float(row[3]),
                )
            except ValueError as e:
                raise ParsingError(f"malformed row: {e}", line=reader.line_num) from e
            validate_record(rec)
            records.append(rec)
    if not records:
        raise ParsingError("no records")
    records.sort(key=lambda r: r.year)
    for a, b in zip(records, records[1:]):
        if a.year == b.year:
            raise DomainError(f"year {a.year}: duplicate record")
    return records


def write_series(path: str, records: Sequence[FisheryRecord]) -> str:
    rows = [[r.year, r.biomass, r.harvest, r.effort] for r in records]
    return atomic_write_text(path, csv_text(SERIES_HEADER, rows))


def _pairs(series: Sequence[FisheryRecord]) -> Tuple[np.ndarray, np.ndarray]:
    """Escapements s_t and next-year biomass x_{t+1} over consecutive years."""
    s, nxt = [], []
    for a, b in zip(series, series[1:]):
        if b.year == a.year + 1:
            s.append(a.biomass - a.harvest)
            nxt.append(b.biomass)
    return np.asarray(s, dtype=float), np.asarray(nxt, dtype=float)


def _running_min(trace: List[float]) -> List[float]:
    return list(np.minimum.accumulate(np.asarray(trace, dtype=float))) if trace else []


def _profile(objective: Callable[[float], float], lo: float, hi: float, points: int,
             log_scale: bool) -> Tuple[float, List[float]]:
    """Coarse bracket on [lo, hi] then bounded Brent refinement between the neighbours."""
    grid = np.geomspace(lo, hi, points) if log_scale else np.linspace(lo, hi, points)
    values = np.array([objective(v) for v in grid])
    i = int(np.nanargmin(values))
    trace = [float(values[i])]
    left, right = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    res = optimize.minimize_scalar(objective, bounds=(left, right), method="bounded",
                                   options={"xatol": 1e-12 * max(1.0, abs(grid[i]))})
    best = float(res.x) if res.fun <= values[i] else float(grid[i])
    trace.append(min(float(res.fun), trace[0]))
    return best, trace


# ---------------------------------------------------------------- recruitment

def fit_recruitment(series: Sequence[FisheryRecord], mortality_fixed: float,
                    bounds: FitBounds = FitBounds()) -> FitResult:
    """OLS fit of (r0, M) in x_{t+1} = (1 - m) s_t + r0 s_t / (1 + s_t / M), m fixed."""
    if not (0.0 <= mortality_fixed < 1.0):
        raise DomainError(f"mortality must lie in [0, 1), got {mortality_fixed!r}")
    s, nxt = _pairs(series)
    if len(s) < 4:
        raise CalibrationError(f"need at least 4 consecutive-year pairs, got {len(s)}")
    if np.ptp(s) <= 1e-12 * max(1.0, float(np.max(np.abs(s)))):
        raise CalibrationError("rank-deficient data: every escapement is identical, (r0, M) not identifiable")
    y = nxt - (1.0 - mortality_fixed) * s

    def r0_given(m_half: float) -> float:
        phi = s / (1.0 + s / m_half)
        return float(phi @ y / (phi @ phi))

    def sse(m_half: float) -> float:
        phi = s / (1.0 + s / m_half)
        r = y - r0_given(m_half) * phi
        return float(r @ r)

    m_lo = bounds.half_saturation_min
    m_hi = bounds.half_saturation_factor * max(r.biomass for r in series)
    m_best, trace = _profile(sse, m_lo, m_hi, bounds.bracket_points, log_scale=True)
    r0_lo = mortality_fixed + 1e-9

    def residuals(theta: np.ndarray) -> np.ndarray:
        r0, m_half = theta
        return y - r0 * s / (1.0 + s / m_half)

    start = np.array([min(max(r0_given(m_best), r0_lo * (1 + 1e-6)), bounds.r0_max * (1 - 1e-9)),
                      min(max(m_best, m_lo * (1 + 1e-9)), m_hi * (1 - 1e-9))])
    polish = optimize.least_squares(residuals, start, bounds=([r0_lo, m_lo], [bounds.r0_max, m_hi]),
                                    x_scale=np.abs(start), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                    max_nfev=2000)
    theta = polish.x if 2 * polish.cost <= trace[-1] else start
    res = residuals(theta)
    trace.append(float(res @ res))
    converged = bool(polish.success)
    logger.info("recruitment fit: r0=%.8g M=%.8g rmse=%.4g (%s)", theta[0], theta[1],
                math.sqrt(float(res @ res) / len(res)), "converged" if converged else "not converged")
    return FitResult(
        params={"r0": float(theta[0]), "half_saturation": float(theta[1]), "mortality": mortality_fixed},
        residuals=res,
        rmse=math.sqrt(float(res @ res) / len(res)),
        converged=converged,
        history=_running_min(trace),
    )


def predict_recruitment(series: Sequence[FisheryRecord], bio: BioModel) -> np.ndarray:
    """One-step-ahead biomass under the unit shock."""
    s, _ = _pairs(series)
    unit = BioModel(bio.mortality, bio.r0, bio.half_saturation)
    return np.asarray(recruit(s, 1.0, unit), dtype=float)


# ---------------------------------------------------------------- effort

def fit_effort(series: Sequence[FisheryRecord], bounds: FitBounds = FitBounds(),
               elasticity: Optional[float] = None) -> FitResult:
    """Least-squares fit of (q, b) in E_t = integral of 1/(q y^b) over [x_t - h_t, x_t].

    Effort errors are multiplicative, so residuals are log ratios of observed to
    modelled effort. For a fixed b, log(1/q) is the mean log ratio; with
    `elasticity` given only that closed form is used.
    """
    used = [r for r in series if r.harvest > 0]
    if not used:
        raise DomainError("every harvest is zero; effort model is not identifiable")
    for r in used:
        if r.effort <= 0:
            raise DomainError(f"year {r.year}: positive harvest with zero effort")
    if len(used) < 4:
        raise CalibrationError(f"need at least 4 records with a positive harvest, got {len(used)}")
    x = np.array([r.biomass for r in used])
    z = x - np.array([r.harvest for r in used])
    log_e = np.log([r.effort for r in used])
    if np.any(z <= 0):
        raise DomainError("records harvesting the whole stock need infinite effort")

    def log_phi(b: float) -> np.ndarray:
        return np.log(np.asarray(effort_between(z, x, 1.0, b), dtype=float))

    def log_inv_q(b: float) -> float:
        return float(np.mean(log_e - log_phi(b)))

    def sse(b: float) -> float:
        r = log_e - log_phi(b) - log_inv_q(b)
        return float(r @ r)

    if elasticity is not None:
        b = float(elasticity)
        trace = [sse(b)]
        theta = np.array([log_inv_q(b), b])
        converged = True
    else:
        b_best, trace = _profile(sse, bounds.elasticity_min, bounds.elasticity_max,
                                 bounds.bracket_points, log_scale=False)

        def residuals(t: np.ndarray) -> np.ndarray:
            return log_e - t[0] - log_phi(t[1])

        start = np.array([log_inv_q(b_best), b_best])
        polish = optimize.least_squares(
            residuals, start,
            bounds=([-np.inf, bounds.elasticity_min], [np.inf, bounds.elasticity_max]),
            x_scale=np.maximum(np.abs(start), 1.0), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
        )
        theta = polish.x if 2 * polish.cost <= trace[-1] else start
        converged = bool(polish.success)
    res = log_e - theta[0] - log_phi(theta[1])
    trace.append(float(res @ res))
    q = math.exp(-theta[0])
    logger.info("effort fit: q=%.8g b=%.8g log rmse=%.4g", q, theta[1], math.sqrt(float(res @ res) / len(res)))
    return FitResult(
        params={"catchability": float(q), "elasticity": float(theta[1])},
        residuals=res,
        rmse=math.sqrt(float(res @ res) / len(res)),
        converged=converged,
        history=_running_min(trace),
    )


# ---------------------------------------------------------------- shocks

def shock_residuals(series: Sequence[FisheryRecord], bio_fitted: BioModel) -> np.ndarray:
    """Implied recruitment shocks w_t of every usable consecutive-year pair."""
    out = []
    for a, b in zip(series, series[1:]):
        if b.year != a.year + 1:
            continue
        s = a.biomass - a.harvest
        if s <= 0:
            logger.warning("year %d: zero escapement, record skipped", a.year)
            continue
        growth = bio_fitted.r0 * s / (1.0 + s / bio_fitted.half_saturation)
        out.append((b.biomass - (1.0 - bio_fitted.mortality) * s) / growth)
    if not out:
        raise CalibrationError("no usable record pairs for the shock support")
    return np.asarray(out, dtype=float)


def estimate_shock_support(series: Sequence[FisheryRecord], bio_fitted: BioModel) -> Tuple[float, float]:
    w = shock_residuals(series, bio_fitted)
    return float(np.min(w)), float(np.max(w))


# ---------------------------------------------------------------- composition

@dataclass
class Calibration:
    bio: BioModel
    econ: EconModel
    recruitment: FitResult
    effort: FitResult


def fit_model(series: Sequence[FisheryRecord], mortality: float, econ_base: EconModel,
              bounds: FitBounds = FitBounds()) -> Calibration:
    """Fit recruitment, effort and the shock support; other economics come from `econ_base`."""
    rec = fit_recruitment(series, mortality, bounds)
    unit = BioModel(mortality, rec.params["r0"], rec.params["half_saturation"])
    lo, hi = estimate_shock_support(series, unit)
    try:
        bio = BioModel(mortality, unit.r0, unit.half_saturation, shock_lo=lo, shock_hi=hi)
    except DomainError as e:
        raise CalibrationError(f"fitted model is degenerate: {e}") from e
    eff = fit_effort(series, bounds)
    econ = EconModel(
        price=econ_base.price,
        fixed_cost=econ_base.fixed_cost,
        effort_cost=econ_base.effort_cost,
        catchability=eff.params["catchability"],
        elasticity=eff.params["elasticity"],
        discount_rate=econ_base.discount_rate,
    )
    return Calibration(bio=bio, econ=econ, recruitment=rec, effort=eff)


# ---------------------------------------------------------------- synthetic data

DEMO_SEED = 1975


def synthetic_series(bio: BioModel, econ: EconModel, years: int = 33, x1: float = 90.989,
                     start_year: int = 1975, rate: float = 0.1277, seed: int = DEMO_SEED,
                     effort_noise: float = 0.0, shocks: Optional[Sequence[float]] = None) -> List[FisheryRecord]:
    """Series generated under a constant harvest rate; never the historical record.

    Shocks are drawn uniformly from the support unless given; `effort_noise`
    is the log-scale standard deviation of a multiplicative error on effort.
    """
    rng = np.random.default_rng(seed)
    if shocks is None:
        shocks = rng.uniform(bio.shock_lo, bio.shock_hi, size=years)
    out: List[FisheryRecord] = []
    x = float(x1)
    for t in range(years):
        h = rate * x
        e = float(effort_between(x - h, x, econ.catchability, econ.elasticity)) if h > 0 else 0.0
        if effort_noise:
            e *= math.exp(effort_noise * rng.standard_normal())
        out.append(FisheryRecord(year=start_year + t, biomass=x, harvest=h, effort=e))
        x = float(recruit(x - h, shocks[t], bio))
    return out
