from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from quadsim.config import get_settings
from quadsim.harness import NoiseConfig, Scenario, Trajectory, build_design
from quadsim.model import QuadrotorParams
from quadsim.sensors import DropoutConfig

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def params():
    return QuadrotorParams()


@pytest.fixture(scope="session")
def scenario():
    return Scenario()


@pytest.fixture(scope="session")
def design(scenario):
    return build_design(scenario)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def clean_settings(monkeypatch):
    """Entorno sin variables QUADSIM_* y caché de ajustes limpia."""
    for var in ("QUADSIM_SCENARIO", "QUADSIM_LOG_LEVEL", "QUADSIM_N_JOBS", "QUADSIM_OUTPUT_DIR"):
        monkeypatch.delenv(var, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def noiseless_scenario(**overrides):
    """Sensores perfectos, sin ruido de proceso y con disponibilidad completa."""
    base = Scenario(
        noise=NoiseConfig(process_w=np.zeros((12, 12)), uwb_range_std=0.0, yolo_range_std=0.0, imu_var=0.0),
        dropout=DropoutConfig(p_uwb=1.0, p_yolo=1.0, p_imu=1.0),
        trajectory=Trajectory(np.array([[0.0, 0.0], [1.0, 0.0]]), speed=0.0, altitude=1.0),
        duration=5.0,
    )
    return replace(base, **overrides)
