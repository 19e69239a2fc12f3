import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edocr.cli_io import (
    CSV_COLUMNS, Scenario, default_scenario, dump_scenario, emit_metrics_csv, emit_trace,
    load_scenario, parse_scenario, parse_seeds, run_cli,
)
from edocr.clustering import HeadStrategy
from edocr.net_model import ConfigError, EnergyModel, NetworkConfig
from edocr.sim_engine import MetricsFrame, TrafficProfile, run


def test_empty_file_gives_table3_defaults(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text("")
    sc = load_scenario(p)
    net = sc.network
    assert (net.node_count, net.cluster_count) == (50, 7)
    assert (net.field_width, net.field_height) == (1300.0, 1000.0)
    assert net.initial_energy == 1.0 and net.packet_size == 64
    assert net.sink_position == (1004.5, 619.613)
    assert net.simulation_time == 2000.0
    assert sc == default_scenario()


def test_zero_clusters_rejected():
    with pytest.raises(ConfigError, match="cluster_count ≥ 1"):
        parse_scenario("cluster_count = 0\n")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown keys: bogus"):
        parse_scenario("bogus = 1\n")


def test_parse_error_has_position():
    with pytest.raises(ConfigError, match=r"line 2, column"):
        parse_scenario("node_count = 10\ncluster_count = = 3\n")


def test_type_errors():
    with pytest.raises(ConfigError, match="node_count"):
        parse_scenario('node_count = "ten"\n')
    with pytest.raises(ConfigError, match="strategy"):
        parse_scenario('strategy = "leach"\n')
    with pytest.raises(ConfigError, match="tables"):
        parse_scenario("[net]\nnode_count = 3\n")


def test_overrides_applied():
    sc = parse_scenario('node_count = 20\ncluster_count = 4\nstrategy = "max_residual"\ncoverage_range = 3\n')
    assert sc.network.node_count == 20 and sc.network.coverage_range == 3.0
    assert sc.strategy is HeadStrategy.MAX_RESIDUAL


scenarios = st.builds(
    lambda n, m_frac, cov, seed, rate, strat, coeff, ri, sx, sy: Scenario(
        network=NetworkConfig(node_count=n, cluster_count=max(1, int(n * m_frac)), coverage_range=cov,
                              ch_link_range=2 * cov, seed=seed, sink_position=(sx, sy)),
        energy=EnergyModel(coeff, coeff / 3, coeff * 2, 0.0),
        strategy=strat,
        traffic=TrafficProfile(rate),
        reporting_interval=ri,
    ),
    st.integers(1, 200), st.floats(0, 1), st.floats(0.1, 1e4), st.integers(0, 2**64 - 1),
    st.floats(0, 100), st.sampled_from(list(HeadStrategy)), st.floats(0, 10), st.integers(1, 50),
    st.floats(0, 1300), st.floats(0, 1000),
)


@settings(max_examples=100)
@given(scenarios)
def test_scenario_round_trip(sc):
    assert parse_scenario(dump_scenario(sc)) == sc


def test_emit_empty_csv(tmp_path):
    p = tmp_path / "m.csv"
    emit_metrics_csv([], p)
    assert p.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_emit_na_cells(tmp_path):
    p = tmp_path / "m.csv"
    emit_metrics_csv([MetricsFrame(0, 1.0, 1.0, None, None, 0.0, False),
                      MetricsFrame(1, 0.98, 0.5, 0.82, 0.18, 4.3, True)], p)
    lines = p.read_text().splitlines()
    assert lines[1] == "0,1.000000,1.000000,NA,NA,0.000000,0"
    assert lines[2] == "1,0.980000,0.500000,0.820000,0.180000,4.300000,1"


def test_trace_lines(tmp_path, small_config):
    r = run(small_config, "edocr", TrafficProfile(1.0, packet_size=4), EnergyModel())
    p = tmp_path / "t.tsv"
    emit_trace(r.trace, p)
    lines = p.read_text().splitlines()
    assert len(lines) == len(r.trace)
    first = lines[0].split("\t")
    assert first[:3] == ["0", "0", "Deploy"]
    assert all(len(l.split("\t")) >= 3 for l in lines)


def test_parse_seeds():
    assert parse_seeds("7") == [7]
    assert parse_seeds("1..3") == [1, 2, 3]
    assert parse_seeds("1,4..5") == [1, 4, 5]
    with pytest.raises(ValueError):
        parse_seeds("5..1")


def _short(tmp_path, **extra):
    extra.setdefault("simulation_time", 60.0)
    body = "".join(f"{k} = {v}\n" for k, v in extra.items())
    p = tmp_path / "short.toml"
    p.write_text(body)
    return p


def test_cli_single_run_is_byte_stable(tmp_path):
    sc = _short(tmp_path)
    assert run_cli(["-s", str(sc), "--seed", "3", "-o", str(tmp_path / "a")]) == 0
    assert run_cli(["-s", str(sc), "--seed", "3", "-o", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "metrics_edocr_seed3.csv").read_bytes()
    b = (tmp_path / "b" / "metrics_edocr_seed3.csv").read_bytes()
    assert a == b and a.endswith(b"\n")
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seeds"] == [3]
    assert "metrics_edocr_seed3.csv" in manifest["artifacts"]


def test_cli_sweep_file_count(tmp_path):
    sc = _short(tmp_path, simulation_time=20.0)
    out = tmp_path / "sweep"
    rc = run_cli(["-s", str(sc), "--seed", "1..20", "--strategy", "edocr", "--strategy", "max_residual",
                  "-o", str(out), "-j", "4", "--reporting-interval", "10"])
    assert rc == 0
    assert len(list(out.glob("metrics_*.csv"))) == 40
    rows = (out / "comparison.csv").read_text().splitlines()
    assert len(rows) == 41


def test_cli_trace_flag(tmp_path):
    sc = _short(tmp_path, simulation_time=5.0)
    assert run_cli(["-s", str(sc), "-o", str(tmp_path / "t"), "--trace"]) == 0
    assert (tmp_path / "t" / "trace_edocr_seed1.tsv").exists()


def test_cli_missing_scenario(tmp_path, capsys):
    rc = run_cli(["-s", str(tmp_path / "nope.toml"), "-o", str(tmp_path / "x")])
    assert rc != 0
    assert "not found" in capsys.readouterr().err


def test_cli_bad_scenario(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("cluster_count = 0\n")
    assert run_cli(["-s", str(p)]) != 0
    assert "cluster_count" in capsys.readouterr().err
