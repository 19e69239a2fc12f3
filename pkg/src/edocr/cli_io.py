"""Scenario files, metrics/trace writers and the ``edocr-sim`` command line.

Scenario files are flat TOML: one ``key = value`` per line, no tables.
Omitted keys take the defaults of :func:`default_scenario`; unknown keys are
rejected.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import tomli

from . import __version__
from .clustering import HeadStrategy
from .net_model import ConfigError, EnergyModel, NetworkConfig
from .sim_engine import MetricsFrame, RunResult, SimEvent, TrafficProfile, run

log = logging.getLogger("edocr")

CSV_COLUMNS = ("tick", "alive_fraction", "residual_fraction", "pdr", "drop_ratio", "throughput", "partitioned")

# Calibrated so a default run drains roughly half the network's energy in 2000 s.
DEFAULT_ENERGY = EnergyModel(tx_packet_coeff=2e-4, tx_time_coeff=0.05, rx_packet_coeff=2e-4, rx_time_coeff=0.05)
# 50 random nodes on 1300 x 1000 m: 3 m coverage leaves every head isolated.
# 700 m head links connect ~99% of random 7-head overlays; coverage keeps the 2x ratio.
DEFAULT_NETWORK = NetworkConfig(coverage_range=350.0, ch_link_range=700.0)


@dataclass(frozen=True)
class Scenario:
    network: NetworkConfig = DEFAULT_NETWORK
    energy: EnergyModel = DEFAULT_ENERGY
    strategy: HeadStrategy = HeadStrategy.EDOCR
    traffic: TrafficProfile = field(default_factory=TrafficProfile)
    reporting_interval: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if self.reporting_interval < 1:
            raise ConfigError("reporting_interval ≥ 1")
        if self.traffic.packet_size != self.network.packet_size:
            raise ConfigError("traffic packet_size == network packet_size")
        if self.traffic.source_selection == "fixed":
            bad = [s for s in self.traffic.fixed_sources if not 0 <= s < self.network.node_count]
            if bad:
                raise ConfigError(f"fixed_sources within 0..node_count-1 (got {bad})")


def default_scenario() -> Scenario:
    return Scenario()


_NETWORK_KEYS = [f.name for f in dataclasses.fields(NetworkConfig)]
_ENERGY_KEYS = [f.name for f in dataclasses.fields(EnergyModel)]
_TRAFFIC_KEYS = ["events_per_tick", "source_selection", "fixed_sources"]
_SCENARIO_KEYS = ["strategy", "reporting_interval", "output_dir"]
ALL_KEYS = _NETWORK_KEYS + _ENERGY_KEYS + _TRAFFIC_KEYS + _SCENARIO_KEYS


def _field_types() -> dict[str, Any]:
    types: dict[str, Any] = {}
    for cls, keys in ((NetworkConfig, _NETWORK_KEYS), (EnergyModel, _ENERGY_KEYS)):
        defaults = cls()
        for k in keys:
            types[k] = type(getattr(defaults, k))
    types.update(events_per_tick=float, source_selection=str, fixed_sources=tuple,
                 strategy=str, reporting_interval=int, output_dir=str)
    return types


_TYPES = _field_types()


def _coerce(key: str, value: Any) -> Any:
    want = _TYPES[key]
    if want is bool or isinstance(value, bool):
        raise ConfigError(f"{key}: unexpected boolean")
    if want is float:
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if want is int:
        if not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if want is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if key == "sink_position":
        if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value)):
            raise ConfigError("sink_position: expected [x, y]")
        return (float(value[0]), float(value[1]))
    if key == "fixed_sources":
        if not (isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)):
            raise ConfigError("fixed_sources: expected a list of node ids")
        return tuple(value)
    raise ConfigError(f"{key}: unsupported value {value!r}")


def scenario_from_mapping(data: dict[str, Any]) -> Scenario:
    unknown = sorted(set(data) - set(ALL_KEYS))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    values = {k: _coerce(k, v) for k, v in data.items()}
    base = default_scenario()
    net = dataclasses.replace(base.network, **{k: values[k] for k in _NETWORK_KEYS if k in values})
    energy = dataclasses.replace(base.energy, **{k: values[k] for k in _ENERGY_KEYS if k in values})
    traffic = TrafficProfile(
        events_per_tick=values.get("events_per_tick", base.traffic.events_per_tick),
        source_selection=values.get("source_selection", base.traffic.source_selection),
        fixed_sources=values.get("fixed_sources", base.traffic.fixed_sources),
        packet_size=net.packet_size,
    )
    try:
        strategy = HeadStrategy(values.get("strategy", base.strategy.value))
    except ValueError:
        raise ConfigError(f"strategy in {{{', '.join(s.value for s in HeadStrategy)}}}") from None
    return Scenario(net, energy, strategy, traffic,
                    values.get("reporting_interval", base.reporting_interval),
                    values.get("output_dir", base.output_dir))


def parse_scenario(text: str) -> Scenario:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        # message carries "(at line L, column C)"
        raise ConfigError(f"parse error: {exc}") from None
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"tables are not allowed: {', '.join(nested)}")
    return scenario_from_mapping(data)


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def _fmt(value: Any) -> str:
    if isinstance(value, HeadStrategy):
        return json.dumps(value.value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigError(f"non-finite value {value!r}")
        return repr(value)
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def scenario_to_mapping(scenario: Scenario) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for k in _NETWORK_KEYS:
        out[k] = getattr(scenario.network, k)
    for k in _ENERGY_KEYS:
        out[k] = getattr(scenario.energy, k)
    out["events_per_tick"] = scenario.traffic.events_per_tick
    out["source_selection"] = scenario.traffic.source_selection
    out["fixed_sources"] = scenario.traffic.fixed_sources
    out["strategy"] = scenario.strategy
    out["reporting_interval"] = scenario.reporting_interval
    out["output_dir"] = scenario.output_dir
    return out


def dump_scenario(scenario: Scenario) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in scenario_to_mapping(scenario).items())


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(dump_scenario(scenario), encoding="utf-8")


def scenario_hash(scenario: Scenario) -> str:
    return hashlib.sha256(dump_scenario(scenario).encode()).hexdigest()


# -- output -----------------------------------------------------------------


def _num(value: float | None) -> str:
    return "NA" if value is None else f"{value:.6f}"


def emit_metrics_csv(frames: Sequence[MetricsFrame], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for f in frames:
            writer.writerow([
                f.tick, _num(f.alive_fraction), _num(f.residual_fraction), _num(f.pdr),
                _num(f.drop_ratio), _num(f.throughput), int(f.partitioned),
            ])


def format_event(event: SimEvent) -> str:
    parts = [str(event.tick), str(event.seq), event.kind.value]
    for k, v in event.payload.items():
        if isinstance(v, float):
            v = repr(v)
        parts.append(f"{k}={'' if v is None else v}")
    return "\t".join(parts)


def emit_trace(trace: Sequence[SimEvent], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in trace:
            fh.write(format_event(e) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


SUMMARY_COLUMNS = ("strategy", "seed", "ticks_run", "first_death_tick", "first_partition_tick",
                   "final_alive_fraction", "final_residual_fraction", "sent", "delivered", "dropped",
                   "pdr", "drop_ratio", "throughput")


def _summary_cell(value: Any) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def run_one(scenario: Scenario, strategy: HeadStrategy, seed: int, out_dir: Path, trace: bool) -> dict[str, Any]:
    config = dataclasses.replace(scenario.network, seed=seed)
    result: RunResult = run(config, strategy, scenario.traffic, scenario.energy,
                            scenario.reporting_interval, record_trace=trace)
    stem = f"{strategy.value}_seed{seed}"
    metrics = out_dir / f"metrics_{stem}.csv"
    emit_metrics_csv(result.frames, metrics)
    artifacts = [metrics.name]
    if trace:
        trace_path = out_dir / f"trace_{stem}.tsv"
        emit_trace(result.trace, trace_path)
        artifacts.append(trace_path.name)
    return {"summary": result.summary, "artifacts": artifacts}


def _run_job(args):
    return run_one(*args)


def parse_seeds(text: str) -> list[int]:
    """``"7"``, ``"1..20"`` or ``"1,4,9"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError(f"empty seed range {part!r}")
            seeds.extend(range(lo_i, hi_i + 1))
        else:
            seeds.append(int(part))
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edocr-sim", description="Run EDOCR wireless sensor network simulations.")
    p.add_argument("-s", "--scenario", help="scenario file (flat TOML); built-in defaults when omitted")
    p.add_argument("--seed", default=None, help="seed, range A..B, or comma list (default: scenario seed)")
    p.add_argument("--strategy", action="append", choices=[s.value for s in HeadStrategy],
                   help="head election strategy; repeat for a comparison sweep")
    p.add_argument("-o", "--out", help="output directory (default: scenario output_dir)")
    p.add_argument("--reporting-interval", type=int, help="ticks between metric samples")
    p.add_argument("--trace", dest="trace", action="store_true", help="write per-run event traces")
    p.add_argument("--no-trace", dest="trace", action="store_false")
    p.set_defaults(trace=False)
    p.add_argument("-j", "--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--dump-scenario", action="store_true", help="print the effective scenario and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        scenario = load_scenario(args.scenario) if args.scenario else default_scenario()
        if args.reporting_interval is not None:
            scenario = dataclasses.replace(scenario, reporting_interval=args.reporting_interval)
        seeds = parse_seeds(args.seed) if args.seed is not None else [scenario.network.seed]
        for s in seeds:
            dataclasses.replace(scenario.network, seed=s)
    except FileNotFoundError as exc:
        print(f"edocr-sim: scenario file not found: {exc.filename}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"edocr-sim: {exc}", file=sys.stderr)
        return 2

    if args.dump_scenario:
        sys.stdout.write(dump_scenario(scenario))
        return 0

    strategies = [HeadStrategy(s) for s in (args.strategy or [scenario.strategy.value])]
    strategies = list(dict.fromkeys(strategies))
    out_dir = Path(args.out or scenario.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(scenario, strat, seed, out_dir, args.trace) for strat in strategies for seed in seeds]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]

    artifacts = [a for r in results for a in r["artifacts"]]
    if len(results) > 1:
        summary_path = out_dir / "comparison.csv"
        with open(summary_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SUMMARY_COLUMNS)
            for r in results:
                writer.writerow([_summary_cell(r["summary"][c]) for c in SUMMARY_COLUMNS])
        artifacts.append(summary_path.name)

    scenario_path = out_dir / "scenario.toml"
    scenario_path.write_text(dump_scenario(scenario), encoding="utf-8")
    artifacts.append(scenario_path.name)
    manifest = {
        "tool": "edocr-sim",
        "tool_version": __version__,
        "scenario_hash": scenario_hash(scenario),
        "seeds": seeds,
        "strategies": [s.value for s in strategies],
        "trace": args.trace,
        "artifacts": {name: _sha256(out_dir / name) for name in artifacts},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for r in results:
        s = r["summary"]
        log.info("%s seed %s: pdr=%s throughput=%.3f", s["strategy"], s["seed"], s["pdr"], s["throughput"])
    return 0


def main() -> None:
    sys.exit(run_cli())
