import numpy as np
import pytest

from edocr.net_model import EnergyModel, Network, NetworkConfig


def set_residuals(network, residuals):
    """Force a residual-energy state (test helper; bypasses the counters)."""
    for node, r in zip(network.sensors, residuals):
        node.residual_energy = float(r)
        node.alive = r > 0


def random_state(seed, n=50, m=7, dead_fraction=0.1, coverage=250.0):
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig(node_count=n, cluster_count=m, coverage_range=coverage,
                        ch_link_range=2 * coverage, seed=seed)
    net = Network.deploy(cfg, EnergyModel(), rng)
    res = rng.uniform(0.01, 1.0, n)
    res[rng.random(n) < dead_fraction] = 0.0
    set_residuals(net, res)
    return net, rng


@pytest.fixture
def small_config():
    return NetworkConfig(field_width=100.0, field_height=100.0, node_count=6, cluster_count=2,
                         initial_energy=1000.0, sink_position=(50.0, 50.0), coverage_range=40.0,
                         ch_link_range=80.0, simulation_time=10.0, packet_size=4,
                         control_packet_size=4, link_rate=4.0, seed=3)


ACCEPTANCE: list[str] = []


def record_criterion(label, ok, detail=""):
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
