"""Scenario configuration: nested dataclasses, YAML IO and validation.

A blank document yields the default scenario.  Validation collects every
problem with its dotted field path instead of stopping at the first one.
"""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

ATTACK_KINDS = ("none", "CJA", "RJA", "DRL-JA", "FNN")
MITIGATION_KINDS = ("none", "suspend", "decoy-DRL", "decoy-FNN")
AGENT_MODES = ("table", "lstm")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class TopologyCfg:
    n_gnbs: int = 3
    isd_m: float = 500.0
    cell_radius_m: float = 125.0
    min_distance_m: float = 35.0
    n_embb: int = 25
    n_urllc: int = 10
    target_gnb: int = 0
    neighbour_activity: float = 0.3


@dataclass
class GridCfg:
    subcarriers: int = 12
    rbgs: int = 13
    bandwidth_mhz: float = 20.0
    subcarrier_spacing_khz: float = 15.0


@dataclass
class RadioCfg:
    carrier_ghz: float = 30.0
    max_tx_power_dbm: float = 40.0
    antenna_gain_db: float = 15.0
    noise_figure_db: float = 5.0
    penetration_loss_db: float = 5.0
    shadowing_std_db: float = 8.0
    noise_dbm_hz: float = -174.0
    decode_threshold_db: float = 0.0
    max_spectral_eff: float = 6.0


@dataclass
class TrafficCfg:
    embb_load_mbps: float = 2.0
    urllc_load_mbps: float = 2.0
    embb_packet_bytes: int = 100
    urllc_packet_bytes: int = 50
    urllc_cbr_fraction: float = 0.2
    queue_cap: int = 100


@dataclass
class HarqCfg:
    rtt_tti: int = 4
    max_retx: int = 1


@dataclass
class ComputeCfg:
    cpu_hz: float = 1e9
    cycles_per_bit: float = 200.0
    cloud_delay_ms: float = 8.0


@dataclass
class ObjectiveCfg:
    w_embb: float = 1.0
    w_urllc: float = 1.0
    d_target_ms: float = 1.0
    kpi_window: int = 10


@dataclass
class AgentCfg:
    mode: str = "lstm"
    hidden: int = 20
    replay: int = 60
    minibatch: int = 20
    train_interval: int = 60
    copy_interval: int = 120
    alpha: float = 0.5
    gamma: float = 0.9
    epsilon: float = 0.1
    lr: float = 0.01
    clip: float = 1.0
    init_scale: float = 0.1
    q_max: int = 100


@dataclass
class AttackCfg:
    kind: str = "none"
    distance_m: float = 100.0
    max_power_dbm: float = 50.0
    x_r_dbm: float = -52.0
    energy_budget_mj: float = 100000.0
    omega1: float = 0.8
    omega2: float = 0.2
    gamma: float = 0.9
    epsilon: float = 0.1
    width: int = 4
    sense_ttis: int = 20
    rja_scope: str = "grid"
    hidden: int = 20
    layers: int = 1
    seq_len: int = 2
    lr: float = 3e-3
    optimizer: str = "adam"
    replay: int = 2000
    batch: int = 32
    train_every: int = 2
    copy_every: int = 200
    warmup: int = 64
    reward_norm: str = "ratio"
    fnn_history: int = 10
    fnn_hidden: int = 50
    fnn_lr: float = 0.5
    fnn_init: float = 1.0
    slot_us: float = 9.0
    sample_us: float = 1.0
    idle_us: float = 4.0


@dataclass
class MitigationCfg:
    kind: str = "none"
    chi: float = 0.5
    gamma: float = 0.9
    epsilon: float = 0.1
    width: int = 4
    hidden: int = 20
    lr: float = 3e-3
    replay: int = 2000
    batch: int = 32
    train_every: int = 2
    copy_every: int = 200
    warmup: int = 64
    guard_band: float = 0.05
    repo_runs: int = 10
    repo_keep: int = 5
    fnn_history: int = 4
    fnn_hidden: int = 60
    fnn_init: float = 4.0
    fnn_lr: float = 0.1


@dataclass
class HorizonCfg:
    expert: int = 3000
    learner: int = 3000
    kpi_skip: int = 1000


@dataclass
class ScenarioConfig:
    seed: int = 0
    tti_us: float = 142.9
    initial_queues: list = field(default_factory=lambda: [0, 0])
    horizon: HorizonCfg = field(default_factory=HorizonCfg)
    topology: TopologyCfg = field(default_factory=TopologyCfg)
    grid: GridCfg = field(default_factory=GridCfg)
    radio: RadioCfg = field(default_factory=RadioCfg)
    traffic: TrafficCfg = field(default_factory=TrafficCfg)
    harq: HarqCfg = field(default_factory=HarqCfg)
    compute: ComputeCfg = field(default_factory=ComputeCfg)
    objective: ObjectiveCfg = field(default_factory=ObjectiveCfg)
    agent: AgentCfg = field(default_factory=AgentCfg)
    attack: AttackCfg = field(default_factory=AttackCfg)
    mitigation: MitigationCfg = field(default_factory=MitigationCfg)

    @property
    def tti_s(self) -> float:
        return self.tti_us * 1e-6

    @property
    def tti_ms(self) -> float:
        return self.tti_us * 1e-3

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, overrides: dict | None = None, **flat) -> "ScenarioConfig":
        d = deep_merge(self.to_dict(), overrides or {})
        for k, v in flat.items():
            set_path(d, k, v)
        return from_dict(d)

    @classmethod
    def from_dict(cls, d: dict | None) -> "ScenarioConfig":
        return from_dict(d)


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def _coerce(value, typ, path, errors):
    if typ is bool:
        if isinstance(value, bool):
            return value
    elif typ is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif typ is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif typ is str:
        if isinstance(value, str):
            return value
    elif typ is list:
        if isinstance(value, (list, tuple)):
            return list(value)
    else:
        return value
    errors.append(f"{path}: expected {typ.__name__}, got {value!r}")
    return None


def _build(cls, data, path, errors):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        errors.append(f"{path or '<root>'}: expected a mapping")
        return cls()
    hints = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for k, v in data.items():
        p = f"{path}.{k}" if path else k
        if k not in hints:
            errors.append(f"{p}: unknown field")
            continue
        f = hints[k]
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        if dataclasses.is_dataclass(default):
            kwargs[k] = _build(type(default), v, p, errors)
        else:
            typ = {"int": int, "float": float, "str": str, "list": list, "bool": bool}.get(
                f.type if isinstance(f.type, str) else getattr(f.type, "__name__", ""), None)
            c = _coerce(v, typ, p, errors)
            if c is not None:
                kwargs[k] = c
    return cls(**kwargs)


def from_dict(d: dict | None) -> ScenarioConfig:
    errors: list[str] = []
    cfg = _build(ScenarioConfig, d, "", errors)
    errors += validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def _check(errors, cond, path, msg):
    if not cond:
        errors.append(f"{path}: {msg}")


def validate_config(cfg: ScenarioConfig) -> list[str]:
    """Schema-level value checks plus cross-field checks."""
    e: list[str] = []
    t, g, r, tr = cfg.topology, cfg.grid, cfg.radio, cfg.traffic
    _check(e, cfg.tti_us > 0, "tti_us", "must be > 0")
    _check(e, len(cfg.initial_queues) == 2 and all(isinstance(q, int) and q >= 0 for q in cfg.initial_queues),
           "initial_queues", "must be two non-negative integers")
    h = cfg.horizon
    _check(e, h.expert >= 0, "horizon.expert", "must be >= 0")
    _check(e, h.learner >= 0, "horizon.learner", "must be >= 0")
    _check(e, h.expert + h.learner > 0, "horizon", "total horizon must be > 0")
    _check(e, 0 <= h.kpi_skip, "horizon.kpi_skip", "must be >= 0")
    _check(e, 1 <= t.n_gnbs <= 7, "topology.n_gnbs", "must lie in 1..7")
    _check(e, t.isd_m > 0, "topology.isd_m", "must be > 0")
    _check(e, 0 < t.min_distance_m < t.cell_radius_m, "topology.min_distance_m",
           "must be positive and below cell_radius_m")
    _check(e, t.cell_radius_m * 2 <= t.isd_m or t.n_gnbs == 1, "topology.cell_radius_m",
           "cells overlap (radius > isd/2)")
    _check(e, t.n_embb >= 0, "topology.n_embb", "must be >= 0")
    _check(e, t.n_urllc >= 0, "topology.n_urllc", "must be >= 0")
    _check(e, t.n_embb + t.n_urllc > 0, "topology", "needs at least one UE")
    _check(e, 0 <= t.target_gnb < max(t.n_gnbs, 1), "topology.target_gnb", "must index an existing gNB")
    _check(e, 0.0 <= t.neighbour_activity <= 1.0, "topology.neighbour_activity", "must lie in [0, 1]")
    _check(e, g.subcarriers >= 1, "grid.subcarriers", "must be >= 1")
    _check(e, g.rbgs >= 1, "grid.rbgs", "must be >= 1")
    _check(e, g.bandwidth_mhz > 0, "grid.bandwidth_mhz", "must be > 0")
    _check(e, g.subcarrier_spacing_khz > 0, "grid.subcarrier_spacing_khz", "must be > 0")
    if g.rbgs >= 1 and g.subcarriers >= 1 and g.subcarrier_spacing_khz > 0:
        _check(e, g.rbgs * g.subcarriers * g.subcarrier_spacing_khz / 1000 <= g.bandwidth_mhz + 1e-9,
               "grid.rbgs", "RB groups exceed the carrier bandwidth")
    _check(e, r.max_tx_power_dbm <= 40.0 + 1e-9, "radio.max_tx_power_dbm", "must be <= 40 dBm")
    _check(e, r.shadowing_std_db >= 0, "radio.shadowing_std_db", "must be >= 0")
    _check(e, r.max_spectral_eff > 0, "radio.max_spectral_eff", "must be > 0")
    _check(e, tr.embb_load_mbps >= 0, "traffic.embb_load_mbps", "must be >= 0")
    _check(e, tr.urllc_load_mbps >= 0, "traffic.urllc_load_mbps", "must be >= 0")
    _check(e, tr.embb_packet_bytes > 0, "traffic.embb_packet_bytes", "must be > 0")
    _check(e, tr.urllc_packet_bytes > 0, "traffic.urllc_packet_bytes", "must be > 0")
    _check(e, 0 <= tr.urllc_cbr_fraction <= 1, "traffic.urllc_cbr_fraction", "must lie in [0, 1]")
    _check(e, tr.queue_cap >= 1, "traffic.queue_cap", "must be >= 1")
    _check(e, cfg.harq.rtt_tti >= 1, "harq.rtt_tti", "must be >= 1")
    _check(e, cfg.harq.max_retx >= 0, "harq.max_retx", "must be >= 0")
    _check(e, cfg.compute.cpu_hz > 0, "compute.cpu_hz", "must be > 0")
    _check(e, cfg.compute.cycles_per_bit > 0, "compute.cycles_per_bit", "must be > 0")
    _check(e, cfg.compute.cloud_delay_ms >= 0, "compute.cloud_delay_ms", "must be >= 0")
    o = cfg.objective
    _check(e, o.w_embb >= 0, "objective.w_embb", "must be >= 0")
    _check(e, o.w_urllc >= 0, "objective.w_urllc", "must be >= 0")
    _check(e, o.kpi_window >= 1, "objective.kpi_window", "must be >= 1")
    a = cfg.agent
    _check(e, a.mode in AGENT_MODES, "agent.mode", f"{a.mode!r} not in {list(AGENT_MODES)}")
    _check(e, 10 <= a.hidden <= 40, "agent.hidden", "must lie in [10, 40]")
    _check(e, 0 <= a.alpha <= 1, "agent.alpha", "must lie in [0, 1]")
    _check(e, 0 <= a.gamma < 1, "agent.gamma", "must lie in [0, 1)")
    _check(e, 0 <= a.epsilon <= 1, "agent.epsilon", "must lie in [0, 1]")
    _check(e, 1 <= a.minibatch <= a.replay, "agent.minibatch", "must lie in [1, replay]")
    _check(e, a.train_interval >= 1, "agent.train_interval", "must be >= 1")
    _check(e, a.copy_interval >= 1, "agent.copy_interval", "must be >= 1")
    _check(e, a.q_max >= 1, "agent.q_max", "must be >= 1")
    at = cfg.attack
    _check(e, at.kind in ATTACK_KINDS, "attack.kind", f"{at.kind!r} not in {list(ATTACK_KINDS)}")
    _check(e, at.distance_m > 0, "attack.distance_m", "must be > 0")
    _check(e, at.energy_budget_mj >= 0, "attack.energy_budget_mj", "must be >= 0")
    _check(e, at.omega1 >= 0, "attack.omega1", "must be >= 0")
    _check(e, at.omega2 >= 0, "attack.omega2", "must be >= 0")
    _check(e, 0 <= at.gamma < 1, "attack.gamma", "must lie in [0, 1)")
    _check(e, 0 <= at.epsilon <= 1, "attack.epsilon", "must lie in [0, 1]")
    _check(e, 1 <= at.width <= g.rbgs, "attack.width", "must lie in [1, grid.rbgs]")
    _check(e, at.sense_ttis >= 1, "attack.sense_ttis", "must be >= 1")
    _check(e, at.rja_scope in ("grid", "window"), "attack.rja_scope", f"{at.rja_scope!r} not in ['grid', 'window']")
    _check(e, at.hidden >= 1, "attack.hidden", "must be >= 1")
    _check(e, at.layers >= 1, "attack.layers", "must be >= 1")
    _check(e, at.seq_len >= 1, "attack.seq_len", "must be >= 1")
    _check(e, at.optimizer in ("sgd", "adam"), "attack.optimizer", "must be 'sgd' or 'adam'")
    _check(e, at.reward_norm in ("ratio", "minmax"), "attack.reward_norm", "must be 'ratio' or 'minmax'")
    _check(e, 1 <= at.batch <= at.replay, "attack.batch", "must lie in [1, replay]")
    _check(e, at.fnn_history >= 1, "attack.fnn_history", "must be >= 1")
    _check(e, at.slot_us > 0 and at.sample_us > 0, "attack.slot_us", "slot and sample length must be > 0")
    _check(e, at.slot_us <= cfg.tti_us, "attack.slot_us", "sensing slot longer than the TTI")
    m = cfg.mitigation
    _check(e, m.kind in MITIGATION_KINDS, "mitigation.kind", f"{m.kind!r} not in {list(MITIGATION_KINDS)}")
    _check(e, 0 <= m.chi <= 1, "mitigation.chi", "must lie in [0, 1]")
    _check(e, 0 <= m.gamma < 1, "mitigation.gamma", "must lie in [0, 1)")
    _check(e, 0 <= m.epsilon <= 1, "mitigation.epsilon", "must lie in [0, 1]")
    _check(e, 1 <= m.width <= g.rbgs, "mitigation.width", "must lie in [1, grid.rbgs]")
    _check(e, m.guard_band >= 0, "mitigation.guard_band", "must be >= 0")
    _check(e, m.repo_runs >= 10, "mitigation.repo_runs", "must be >= 10")
    _check(e, 1 <= m.repo_keep <= m.repo_runs, "mitigation.repo_keep", "must lie in [1, repo_runs]")
    _check(e, 1 <= m.batch <= m.replay, "mitigation.batch", "must lie in [1, replay]")
    return e


def load_config(path) -> ScenarioConfig:
    return from_dict(read_yaml(path))


def read_yaml(path) -> dict:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<file>: not valid YAML ({exc})"]) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(["<root>: expected a mapping"])
    return data


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
