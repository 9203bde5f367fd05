import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from enforcekit import bundled_path, load_catalog, load_model
from enforcekit.sim import models_by_name

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def android():
    return load_catalog()


@pytest.fixture(scope="session")
def demo_catalog():
    return load_catalog(bundled_path("catalog.fig1.json"))


@pytest.fixture(scope="session")
def corpus_models():
    return models_by_name()


@pytest.fixture(scope="session")
def camera_model():
    return load_model(bundled_path("models", "CameraReleaseOnPause.json"))


@pytest.fixture(scope="session")
def buffer_model():
    return load_model(bundled_path("fig1", "OpsBuffer.json"))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
