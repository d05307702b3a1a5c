"""Tests for K-concavity checks, the tau condition and threshold extraction."""

import logging

import numpy as np
import pytest
from harvest_minimax.bioeconomics import marginal_cost
from harvest_minimax.errors import DomainError
from harvest_minimax.kconcave import (
    check_k_concave,
    condition8_holds,
    condition8_verdict,
    extract_thresholds,
    screen_k_concave,
    tau,
    tau_from_marginal,
)
from harvest_minimax.models import Grid, SampledFunction

NODES = np.linspace(0.0, 10.0, 41)


def drop(j: float) -> SampledFunction:
    """Zero up to 5, then -j."""
    return SampledFunction(NODES, np.where(NODES > 5.0, -j, 0.0))


def parabola() -> SampledFunction:
    return SampledFunction(NODES, -(NODES - 4.0) ** 2)


def concave_with_drops(rng: np.random.Generator, total: float) -> np.ndarray:
    """Random concave parabola minus three steps summing to `total`; total-concave."""
    a, c = rng.uniform(0.1, 1.0), rng.uniform(0.0, 10.0)
    cuts = rng.uniform(0.0, 10.0, 3)
    sizes = rng.dirichlet(np.ones(3)) * total
    steps = sum(size * (NODES > cut) for cut, size in zip(cuts, sizes))
    return -a * (NODES - c) ** 2 - steps


class TestCheck:
    """Test the exhaustive check."""

    def test_concave_is_zero_concave(self):
        report = check_k_concave(parabola(), 0.0)
        assert report.is_k_concave
        assert report.witness is None

    def test_convex_fails_with_witness(self):
        """Test the witness triple actually violates the inequality."""
        f = SampledFunction(NODES, NODES ** 2)
        report = check_k_concave(f, 1.0)
        assert not report.is_k_concave
        x, y, b = report.witness
        g = lambda t: t ** 2  # noqa: E731
        assert g(x) - g(y) - (x - y) * (g(y + b) - g(y)) / b > 1.0

    @pytest.mark.parametrize("k", [1.0, 1e6])
    def test_drop_of_half_k_passes(self, k):
        assert check_k_concave(drop(k / 2), k).is_k_concave

    @pytest.mark.parametrize("k", [1.0, 1e6])
    def test_drop_of_twice_k_fails(self, k):
        report = check_k_concave(drop(2 * k), k)
        assert not report.is_k_concave
        assert report.worst_slack == pytest.approx(k)

    def test_monotone_in_k(self):
        """Test a K-concave function stays K'-concave for K' >= K."""
        f = drop(3.0)
        verdicts = [check_k_concave(f, k).is_k_concave for k in (0.0, 1.0, 2.9, 3.0, 4.0, 100.0)]
        assert verdicts == [False, False, False, True, True, True]

    def test_sum_of_k_concave_functions(self):
        """Test f1 K1-concave and f2 K2-concave gives f1 + f2 (K1 + K2)-concave."""
        f = SampledFunction(NODES, drop(2.0).values + parabola().values)
        assert check_k_concave(f, 2.0).is_k_concave

    def test_minimum_of_k_concave_functions(self):
        """Test min(f1, f2) is max(K1, K2)-concave."""
        rng = np.random.default_rng(13)
        for _ in range(20):
            k1, k2 = rng.uniform(0.0, 5.0, 2)
            f = SampledFunction(NODES, np.minimum(concave_with_drops(rng, k1), concave_with_drops(rng, k2)))
            assert check_k_concave(f, max(k1, k2)).is_k_concave

    @pytest.mark.parametrize("inner", [np.sqrt, np.log1p])
    def test_composition_with_concave_map(self, inner):
        """Test psi(beta(x)) keeps the K of a nondecreasing K-concave psi."""
        t = inner(NODES)
        span = float(t[-1] - t[0])
        eps = 0.5 / span
        k = eps * span ** 2

        def psi(u):
            return u + eps * (u - t[0] - span / 2) ** 2

        outer = SampledFunction(np.linspace(t[0], t[-1], 41), psi(np.linspace(t[0], t[-1], 41)))
        assert np.all(np.diff(outer.values) >= 0)
        assert check_k_concave(outer, k).is_k_concave
        assert not check_k_concave(outer, 0.0).is_k_concave
        assert check_k_concave(SampledFunction(NODES, psi(t)), k).is_k_concave

    def test_scaling(self):
        """Test a f is aK-concave when f is K-concave."""
        f = SampledFunction(NODES, 7.0 * drop(1.0).values)
        assert check_k_concave(f, 7.0).is_k_concave
        assert not check_k_concave(f, 6.9).is_k_concave

    def test_tolerance(self):
        """Test violations within tolerance are accepted."""
        assert check_k_concave(drop(1.0 + 1e-9), 1.0).is_k_concave
        assert not check_k_concave(drop(1.0 + 1e-3), 1.0).is_k_concave

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            check_k_concave(parabola(), -1.0)
        with pytest.raises(DomainError):
            check_k_concave(SampledFunction([0.0, 1.0], [0.0, 1.0]), 1.0)


class TestScreen:
    """Test the quadratic screening variant."""

    def test_agrees_with_exhaustive_check(self):
        """Test verdicts and worst slack match on random functions."""
        rng = np.random.default_rng(7)
        for _ in range(25):
            x = np.sort(rng.uniform(0, 10, 30))
            v = -x ** 2 + rng.normal(0, rng.choice([0.01, 1.0, 10.0]), 30)
            f = SampledFunction(x, v)
            k = float(rng.uniform(0, 20))
            full, fast = check_k_concave(f, k), screen_k_concave(f, k)
            assert full.is_k_concave == fast.is_k_concave
            assert fast.worst_slack == pytest.approx(full.worst_slack, rel=1e-9, abs=1e-9)


class TestTau:
    """Test the tau quantity and its condition."""

    def test_linear_marginal_is_triangle(self):
        """Test tau equals the signed triangle between g and its right value."""
        assert tau_from_marginal(lambda x: 1.0 - x, 0.0, 1.0) == pytest.approx(0.5)
        assert tau_from_marginal(lambda x: 2.0 * x, 0.0, 1.0) == pytest.approx(-1.0)

    def test_closed_form_matches_quadrature(self, base_econ):
        grid = Grid(x_max=560.0, step=0.25, x_ref=50.0)
        expected = tau_from_marginal(lambda y: marginal_cost(y, base_econ), grid.x_ref, grid.x_max)
        assert tau(base_econ, grid) == pytest.approx(expected, rel=1e-8)

    def test_boundary_is_strict(self):
        """Test tau == bound fails and anything below holds."""
        alpha = 1 / 1.05
        bound = 5e6 * (1 - alpha) / alpha
        assert not condition8_verdict(bound, 5e6, alpha).holds
        below = condition8_verdict(bound * (1 - 1e-9), 5e6, alpha)
        assert below.holds
        lo, hi = below.k_interval
        assert lo < hi == 5e6

    def test_base_case_fails(self, base_econ, base_config, caplog):
        """Test the base case violates the condition by a wide margin."""
        with caplog.at_level(logging.WARNING, logger="harvest_minimax"):
            report = condition8_holds(base_econ, base_config.grid())
        assert not report.holds
        assert report.bound == pytest.approx(2.5e5)
        assert report.tau > 1e6 * report.bound
        assert report.k_interval is None
        assert "condition (8) fails" in caplog.text


class TestThresholds:
    """Test (S, s) extraction from P."""

    def test_extract(self):
        p = SampledFunction(np.arange(6.0), [0.0, 5.0, 10.0, 8.0, 6.0, 2.0])
        rule = extract_thresholds(p, 3.0)
        assert rule.S == 2.0
        assert rule.s == 3.0

    def test_largest_maximizer(self):
        p = SampledFunction(np.arange(5.0), [0.0, 10.0, 10.0, 9.0, 0.0])
        rule = extract_thresholds(p, 0.5)
        assert rule.S == 2.0
        assert rule.s == 2.0

    @pytest.mark.parametrize("shift", [-50.0, 7.0, 1000.0])
    def test_invariant_under_constant_shift(self, shift):
        values = np.array([0.0, 5.0, 10.0, 8.0, 6.0, 2.0])
        base = extract_thresholds(SampledFunction(np.arange(6.0), values), 3.0)
        assert extract_thresholds(SampledFunction(np.arange(6.0), values + shift), 3.0) == base

    def test_increasing_p_never_harvests(self):
        """Test a strictly increasing P puts both thresholds at the top node."""
        rule = extract_thresholds(SampledFunction(NODES, NODES ** 1.5), 0.5)
        assert rule.S == rule.s == NODES[-1]

    def test_no_gain_from_harvesting_below_s(self):
        """Test P(x) - K <= P(y) whenever x <= y <= s on K-concave samples."""
        rng = np.random.default_rng(21)
        for _ in range(20):
            k = float(rng.uniform(0.5, 5.0))
            p = SampledFunction(NODES, concave_with_drops(rng, k))
            assert check_k_concave(p, k).is_k_concave
            rule = extract_thresholds(p, k)
            v = p.values[NODES <= rule.s]
            gaps = v[:, None] - k - v[None, :]
            assert np.all(np.triu(gaps) <= 1e-9 * k)
