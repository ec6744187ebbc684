import pytest

from edgeflow.engine import Engine, EngineConfig
from edgeflow.kernels import builtin_registry
from edgeflow.templates import fig2_dpg, vehicle_endpoint_template, vehicle_server_template


@pytest.fixture
def registry():
    return builtin_registry()


@pytest.fixture
def fig2():
    return fig2_dpg()


@pytest.fixture
def fig2_engine(fig2, registry):
    return Engine(fig2, registry, EngineConfig())


@pytest.fixture
def fast_endpoint():
    return vehicle_endpoint_template(100.0)


@pytest.fixture
def fast_server():
    return vehicle_server_template(150.0)
