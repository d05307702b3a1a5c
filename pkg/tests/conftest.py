"""Pytest configuration and fixtures."""

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
from harvest_minimax.config import table1
from harvest_minimax.models import BioModel, EconModel, Grid, HarvestModel


@dataclass(frozen=True)
class StepReproduction:
    """Toy transition f(z, w) = min(cap, z + w); lands on integer nodes."""

    cap: float = 4.0
    shock_lo: float = 1.0
    shock_hi: float = 2.0

    def recruit(self, escapement, shock):
        out = np.minimum(self.cap, np.asarray(escapement, dtype=float) + np.asarray(shock, dtype=float))
        return float(out) if np.ndim(out) == 0 else out


@pytest.fixture
def temp_dir():
    """Create a temporary directory for written artifacts."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def base_config():
    """The base-case model configuration."""
    return table1()


@pytest.fixture
def base_bio(base_config):
    return base_config.model.bio


@pytest.fixture
def base_econ(base_config):
    return base_config.model.econ


@pytest.fixture
def base_model(base_config):
    return base_config.model


@pytest.fixture
def coarse_grid(base_bio):
    """Base-case grid at a 2.0 step (about 260 nodes)."""
    from harvest_minimax.bioeconomics import default_grid

    return default_grid(base_bio, 2.0)


@pytest.fixture
def toy_econ():
    return EconModel(price=10.0, fixed_cost=3.0, effort_cost=1.0, catchability=1.0,
                     elasticity=0.5, discount_rate=0.1)


@pytest.fixture
def toy_model(base_bio, toy_econ):
    """Five-node instance with two shocks; every transition lands on a node."""
    return HarvestModel(bio=base_bio, econ=toy_econ, shock_points=2, reproduction=StepReproduction())


@pytest.fixture
def toy_grid():
    return Grid(x_max=4.0, step=1.0, x_ref=1.0)


@pytest.fixture
def sample_bio():
    return BioModel(mortality=0.15, r0=0.543365, half_saturation=196.3923, shock_lo=0.89, shock_hi=1.06)


@pytest.fixture
def samples_csv(temp_dir):
    """x,value samples of -x^2 on 21 nodes."""
    path = temp_dir / "samples.csv"
    xs = np.linspace(-2.0, 2.0, 21)
    lines = ["x,value"] + [f"{float(x)!r},{float(-x * x)!r}" for x in xs]
    path.write_text("\n".join(lines) + "\n")
    return path
