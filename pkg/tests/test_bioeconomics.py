"""Tests for population dynamics and harvesting economics."""

import logging
import math

import numpy as np
import pytest
from harvest_minimax.bioeconomics import (
    BevertonHolt,
    carrying_capacity,
    default_grid,
    dynamics_for,
    effort,
    effort_between,
    harvest_utility,
    marginal_cost,
    recruit,
    revenue_on_nodes,
    revenue_rel,
    shock_grid,
    zero_profit_level,
)
from harvest_minimax.errors import DomainError
from harvest_minimax.models import BioModel, EconModel, Grid
from scipy import integrate


class TestRecruit:
    """Test the reproduction map."""

    def test_formula(self, sample_bio):
        s = 100.0
        expected = 0.85 * s + 0.543365 * s / (1 + s / 196.3923)
        assert recruit(s, 1.0, sample_bio) == pytest.approx(expected, rel=1e-15)

    def test_zero_escapement_is_extinction(self, sample_bio):
        assert recruit(0.0, 0.89, sample_bio) == 0.0

    def test_vectorized(self, sample_bio):
        out = recruit(np.array([0.0, 50.0, 100.0]), 1.0, sample_bio)
        assert out.shape == (3,)
        assert np.all(np.diff(out) > 0)

    def test_shock_outside_support(self, sample_bio):
        with pytest.raises(DomainError):
            recruit(10.0, 0.5, sample_bio)

    def test_negative_escapement(self, sample_bio):
        with pytest.raises(DomainError):
            recruit(-1.0, 1.0, sample_bio)

    def test_concave_nondecreasing_in_escapement(self, sample_bio):
        s = np.linspace(0.0, 800.0, 401)
        for w in (0.89, 1.0, 1.06):
            out = recruit(s, w, sample_bio)
            assert np.all(np.diff(out) >= 0)
            assert np.all(np.diff(out, 2) <= 1e-12 * out.max())

    def test_nondecreasing_in_shock(self, sample_bio):
        shocks = shock_grid(sample_bio.shock_lo, sample_bio.shock_hi, 18)
        for s in (1.0, 90.0, 400.0):
            assert np.all(np.diff([recruit(s, w, sample_bio) for w in shocks]) >= 0)

    def test_dynamics_default_and_override(self, base_model, toy_model):
        assert isinstance(dynamics_for(base_model), BevertonHolt)
        assert dynamics_for(toy_model).recruit(3.0, 2.0) == 4.0


class TestCarryingCapacity:
    """Test the positive fixed point."""

    def test_fixed_point(self, sample_bio):
        cap = carrying_capacity(1.0, sample_bio)
        assert cap == pytest.approx(196.3923 * (0.543365 - 0.15) / 0.15)
        assert recruit(cap, 1.0, sample_bio) == pytest.approx(cap, rel=1e-12)

    def test_no_positive_fixed_point(self, sample_bio, caplog):
        """Test w r0 <= m gives zero with a warning."""
        with caplog.at_level(logging.WARNING, logger="harvest_minimax"):
            assert carrying_capacity(0.2, sample_bio) == 0.0
        assert "no positive fixed point" in caplog.text

    def test_zero_mortality(self):
        bio = BioModel(mortality=0.0, r0=0.5, half_saturation=100.0)
        assert carrying_capacity(1.0, bio) == math.inf

    def test_nonpositive_shock(self, sample_bio):
        with pytest.raises(DomainError):
            carrying_capacity(0.0, sample_bio)


class TestGrids:
    """Test grid and shock discretization helpers."""

    def test_shock_grid(self):
        np.testing.assert_allclose(shock_grid(0.89, 1.06, 5), np.linspace(0.89, 1.06, 5))
        assert shock_grid(0.89, 1.06, 5)[0] == 0.89
        assert shock_grid(0.89, 1.06, 5)[-1] == 1.06
        np.testing.assert_array_equal(shock_grid(1.0, 1.0, 5), [1.0])
        np.testing.assert_array_equal(shock_grid(0.9, 1.1, 1), [0.9])

    def test_default_grid(self, sample_bio):
        grid = default_grid(sample_bio, 1.0)
        assert grid.x_max == math.ceil(carrying_capacity(1.06, sample_bio))
        assert grid.x_ref == 1.0


class TestEffort:
    """Test the effort model."""

    def test_matches_quadrature(self, base_econ):
        """Test the closed form against numerical integration."""
        expected, _ = integrate.quad(lambda y: 1 / (base_econ.catchability * y ** base_econ.elasticity), 80.0, 100.0)
        assert effort(100.0, 20.0, base_econ) == pytest.approx(expected, rel=1e-10)

    def test_random_pairs_match_quadrature(self, base_econ):
        """Test 100 random (x, h) pairs against numerical integration."""
        rng = np.random.default_rng(3)
        q, b = base_econ.catchability, base_econ.elasticity
        for x in rng.uniform(10.0, 500.0, 100):
            h = rng.uniform(0.01, 0.9) * x
            expected, _ = integrate.quad(lambda y: 1 / (q * y ** b), x - h, x, epsabs=0.0, epsrel=1e-12)
            assert effort(x, h, base_econ) == pytest.approx(expected, rel=1e-8)

    def test_additive_over_consecutive_harvests(self, base_econ):
        """Test E(x, h1 + h2) = E(x, h1) + E(x - h1, h2)."""
        rng = np.random.default_rng(5)
        for x in rng.uniform(10.0, 500.0, 50):
            h1, h2 = rng.uniform(0.01, 0.45, 2) * x
            split = effort(x, h1, base_econ) + effort(x - h1, h2, base_econ)
            assert effort(x, h1 + h2, base_econ) == pytest.approx(split, rel=1e-9)

    def test_unit_elasticity_uses_log(self):
        assert effort_between(1.0, math.e, 2.0, 1.0) == pytest.approx(0.5)
        assert effort_between(1.0, math.e, 2.0, 1.0 + 1e-9) == pytest.approx(0.5, rel=1e-6)

    def test_zero_harvest_is_free(self, base_econ):
        assert effort(100.0, 0.0, base_econ) == 0.0
        assert harvest_utility(100.0, 0.0, Grid(x_max=200.0, step=1.0), base_econ) == 0.0

    def test_harvest_above_stock(self, base_econ):
        with pytest.raises(DomainError):
            effort(10.0, 11.0, base_econ)

    def test_full_harvest_diverges(self, base_econ):
        with pytest.raises(DomainError):
            effort(10.0, 10.0, base_econ)

    def test_marginal_cost_at_zero(self, base_econ):
        with pytest.raises(DomainError):
            marginal_cost(0.0, base_econ)

    def test_zero_profit_level(self, base_econ):
        x0 = zero_profit_level(base_econ)
        assert marginal_cost(x0, base_econ) == pytest.approx(base_econ.price)


class TestRevenue:
    """Test the anchored revenue function."""

    def test_zero_at_reference(self, base_econ):
        grid = Grid(x_max=600.0, step=0.25, x_ref=10.0)
        assert revenue_rel(10.0, grid, base_econ) == 0.0

    def test_utility_is_revenue_difference(self, base_econ):
        """Test p h - c E - K = R(x) - R(x - h) - K for two anchors."""
        for x_ref in (0.25, 50.0):
            grid = Grid(x_max=600.0, step=0.25, x_ref=x_ref)
            diff = revenue_rel(200.0, grid, base_econ) - revenue_rel(150.0, grid, base_econ)
            assert harvest_utility(200.0, 50.0, grid, base_econ) == pytest.approx(
                diff - base_econ.fixed_cost, rel=1e-10)

    def test_nondecreasing_and_convex_above_zero_profit_level(self, base_econ, base_bio):
        """Test R is nondecreasing and convex on [x0, x_max]."""
        grid = default_grid(base_bio, 0.25)
        x0 = zero_profit_level(base_econ)
        assert x0 < grid.x_max
        v = revenue_rel(np.linspace(x0, grid.x_max, 400), grid, base_econ)
        scale = np.abs(v).max()
        assert np.all(np.diff(v) >= -1e-12 * scale)
        assert np.all(np.diff(v, 2) >= -1e-9 * scale)

    def test_zero_stock(self, base_econ):
        """Test R(0) is unbounded only when the elasticity is at least one."""
        grid = Grid(x_max=10.0, step=1.0)
        with pytest.raises(DomainError):
            revenue_rel(0.0, grid, base_econ)
        assert revenue_on_nodes(grid, base_econ)[0] == math.inf
        econ = EconModel(price=10.0, fixed_cost=1.0, effort_cost=1.0, catchability=1.0, elasticity=0.5,
                         discount_rate=0.1)
        assert revenue_rel(0.0, grid, econ) == pytest.approx(-(10.0 - 2.0))
        assert math.isfinite(revenue_on_nodes(grid, econ)[0])
