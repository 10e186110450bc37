"""KPIs, convergence detection, eCDFs and degradation/recovery tables."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

THROUGHPUT = "throughput"
LATENCY = "latency"
KINDS = (THROUGHPUT, LATENCY)

# Fields that may differ between a run and its baseline.
VARYING = ("attack", "mitigation", "seed")


class MetricsError(ValueError):
    pass


# --- eCDF ----------------------------------------------------------------------

@dataclass(frozen=True)
class ECDF:
    x: np.ndarray      # sorted samples
    f: np.ndarray      # fraction of samples <= x[i]

    def __call__(self, v):
        idx = np.searchsorted(self.x, v, side="right")
        return idx / self.x.size

    def points(self) -> list[tuple[float, float]]:
        """Distinct step points (value, cumulative fraction)."""
        return [(float(v), float(self(v))) for v in np.unique(self.x)]

    def quantile(self, q: float) -> float:
        if not 0.0 < q <= 1.0:
            raise MetricsError("quantile must lie in (0, 1]")
        return float(self.x[max(int(math.ceil(q * self.x.size)) - 1, 0)])


def ecdf(samples) -> ECDF:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise MetricsError("eCDF needs at least one sample")
    if not np.all(np.isfinite(x)):
        raise MetricsError("eCDF samples must be finite")
    return ECDF(x, np.arange(1, x.size + 1) / x.size)


# --- percentages ----------------------------------------------------------------

def base_key(config: Mapping) -> str:
    """Hash of a config with the attack, mitigation and seed fields removed."""
    import hashlib
    d = {k: v for k, v in dict(config).items() if k not in VARYING}
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def check_comparable(a: Mapping | None, b: Mapping | None) -> None:
    if a is None or b is None:
        return
    if base_key(a) != base_key(b):
        diff = sorted(k for k in set(a) | set(b) if k not in VARYING and a.get(k) != b.get(k))
        raise MetricsError(f"runs differ outside attack/mitigation: {diff}")


def _kind(kind: str) -> str:
    if kind not in KINDS:
        raise MetricsError(f"kind must be one of {list(KINDS)}, got {kind!r}")
    return kind


def degradation(current: float, baseline: float, kind: str, *, current_config=None,
                baseline_config=None) -> float:
    """Percent loss against the baseline (throughput drop or latency rise)."""
    _kind(kind)
    check_comparable(current_config, baseline_config)
    if baseline <= 0:
        raise MetricsError("baseline KPI must be positive")
    if kind == THROUGHPUT:
        return (baseline - current) / baseline * 100.0
    return (current - baseline) / baseline * 100.0


def recovery(mitigated: float, attacked: float, kind: str, *, mitigated_config=None,
             attacked_config=None) -> float:
    """Percent improvement of the mitigated run over the attacked one."""
    _kind(kind)
    check_comparable(mitigated_config, attacked_config)
    if attacked <= 0:
        raise MetricsError("attacked KPI must be positive")
    if kind == THROUGHPUT:
        return (mitigated - attacked) / attacked * 100.0
    return (attacked - mitigated) / attacked * 100.0


# --- convergence -----------------------------------------------------------------

def ema(series, window: int = 100) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    a = 2.0 / (window + 1.0)
    out = np.empty_like(x)
    acc = x[0] if x.size else 0.0
    for i, v in enumerate(x):
        acc = a * v + (1 - a) * acc
        out[i] = acc
    return out


def convergence_point(series, window: int = 100, tol: float = 1e-3, hold: int = 200) -> int | None:
    """First TTI that starts a run of ``hold`` TTIs with |EMA slope| < tol.

    The slope at t is (ema[t] - ema[t - window]) / window.  Returns None when
    the rule never holds.
    """
    x = np.asarray(series, dtype=float)
    if x.size <= window:
        raise MetricsError("series must be longer than the EMA window")
    e = ema(x, window)
    slope = np.abs(e[window:] - e[:-window]) / window
    ok = slope < tol
    run = 0
    for i, flag in enumerate(ok):
        run = run + 1 if flag else 0
        if run >= hold:
            return int(i - hold + 1 + window)
    return None


def running_mean(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    return np.cumsum(x) / np.arange(1, x.size + 1)


def reward_convergence(rewards, window: int = 100, tol: float = 1e-3, hold: int = 200) -> int | None:
    """Convergence TTI of the average-reward curve (running mean of the per-TTI reward)."""
    return convergence_point(running_mean(rewards), window, tol, hold)


# --- per-run KPIs -------------------------------------------------------------------

@dataclass
class KpiSummary:
    config_hash: str
    base_key: str
    seed: int
    attack: str
    mitigation: str
    phase: str
    throughput_mbps: float           # mean eMBB goodput of the cell
    throughput_per_ue_mbps: float
    latency_mean_ms: float
    latency_p50_ms: float
    latency_p95_ms: float
    latency_samples: int
    drop_rate: float
    convergence_tti: int | None
    hits_per_tti: float
    energy_spent_mj: float

    def to_dict(self) -> dict:
        return asdict(self)


PHASES = {"expert": 0, "learner": 1}


def kpis(record, phase: str = "learner", skip: int | None = None) -> KpiSummary:
    """KPIs of one phase, averaged over the segment after ``skip`` TTIs."""
    if phase not in PHASES:
        raise MetricsError(f"phase must be one of {list(PHASES)}")
    cfg = record.meta["config"]
    skip = cfg["horizon"]["kpi_skip"] if skip is None else skip
    p = PHASES[phase]
    full = record.phase_slice(p)
    sl = record.phase_slice(p, skip)
    c = record.columns
    n = sl.stop - sl.start
    if n <= 0:
        raise MetricsError(f"{phase} phase has no TTIs after skipping {skip}")
    lat = [x for row in record.latencies[sl] for x in row]
    delivered = int(np.sum(c["delivered"][sl]))
    dropped = int(np.sum(c["dropped"][sl]))
    n_embb = len(record.summary.get("embb_ue_mbps", {})) or 1
    thr = float(np.mean(c["embb_mbps"][sl]))
    rewards = c["reward"][full]
    conv = reward_convergence(rewards) if rewards.size > 100 else None
    return KpiSummary(
        config_hash=record.config_hash, base_key=base_key(cfg), seed=int(record.meta["seed"]),
        attack=record.meta["attack"], mitigation=record.meta["mitigation"], phase=phase,
        throughput_mbps=thr, throughput_per_ue_mbps=thr / n_embb,
        latency_mean_ms=float(np.mean(lat)) if lat else float("nan"),
        latency_p50_ms=ecdf(lat).quantile(0.5) if lat else float("nan"),
        latency_p95_ms=ecdf(lat).quantile(0.95) if lat else float("nan"),
        latency_samples=len(lat),
        drop_rate=dropped / (delivered + dropped) if delivered + dropped else 0.0,
        convergence_tti=conv,
        hits_per_tti=float(np.mean(c["hits"][sl])),
        energy_spent_mj=float(np.max(c["energy_spent_mj"][full])) if full.stop > full.start else 0.0,
    )


@dataclass
class Aggregate:
    n: int
    mean: float
    std: float

    def to_dict(self):
        return {"n": self.n, "mean": self.mean, "std": self.std}


def aggregate(values: Sequence[float]) -> Aggregate:
    v = np.asarray([x for x in values if x is not None and not math.isnan(x)], dtype=float)
    if v.size == 0:
        return Aggregate(0, float("nan"), float("nan"))
    return Aggregate(int(v.size), float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0)


def seed_means(summaries: Sequence[KpiSummary]) -> dict:
    """Mean and std over seeds of every numeric KPI."""
    if not summaries:
        raise MetricsError("no summaries to aggregate")
    keys = {s.base_key for s in summaries}
    if len(keys) != 1:
        raise MetricsError("summaries come from different base configs")
    out = {}
    for f in ("throughput_mbps", "throughput_per_ue_mbps", "latency_mean_ms", "latency_p50_ms",
              "latency_p95_ms", "drop_rate", "hits_per_tti", "energy_spent_mj"):
        out[f] = aggregate([getattr(s, f) for s in summaries]).to_dict()
    conv = [s.convergence_tti for s in summaries]
    out["convergence_tti"] = aggregate([c for c in conv if c is not None]).to_dict()
    out["not_converged"] = sum(c is None for c in conv)
    return out


KPI_FIELD = {THROUGHPUT: "throughput_mbps", LATENCY: "latency_mean_ms"}


def _mean(summaries, kind) -> float:
    return aggregate([getattr(s, KPI_FIELD[kind]) for s in summaries]).mean


def paired_percent(fn, runs: Sequence[KpiSummary], refs: Sequence[KpiSummary], kind: str) -> float:
    """Percentage computed on seed-means of both groups."""
    if not runs or not refs:
        raise MetricsError("both groups need at least one run")
    if {r.base_key for r in runs} | {r.base_key for r in refs} != {runs[0].base_key}:
        raise MetricsError("runs differ outside attack/mitigation")
    return fn(_mean(runs, kind), _mean(refs, kind), kind)


# --- comparison tables ---------------------------------------------------------------

ATTACKER_ROWS = ("FNN", "DRL-JA")
MITIGATION_COLS = {"FNN": "decoy-FNN", "DRL": "decoy-DRL"}


def comparison_table(groups: Mapping[tuple[str, str], Sequence[KpiSummary]],
                     attackers: Sequence[str] = ATTACKER_ROWS,
                     mitigations: Mapping[str, str] = MITIGATION_COLS) -> dict:
    """Attacker-NN x mitigation-NN matrices.

    ``groups`` maps (attack, mitigation) to the KPI summaries of every seed;
    the no-attack baseline is ("none", "none").  Returns three tables:
    attacker degradation, throughput recovery and latency recovery.  A cell
    whose runs are missing is None.
    """
    base = groups.get(("none", "none"))

    def cell(fn, a, m, ref, kind):
        runs = groups.get((a, m))
        if not runs or not ref:
            return None
        return round(paired_percent(fn, runs, ref, kind), 6)

    deg = {a: {k: cell(degradation, a, "none", base, k) for k in KINDS} for a in attackers}
    rec = {}
    for kind in KINDS:
        rec[kind] = {a: {label: cell(recovery, a, m, groups.get((a, "none")), kind)
                         for label, m in mitigations.items()} for a in attackers}
    return {
        "attacker_degradation": deg,
        "throughput_recovery": rec[THROUGHPUT],
        "latency_recovery": rec[LATENCY],
    }


def table_document(name: str, table: dict, config_hashes: Sequence[str]) -> str:
    doc = {"table": name, "config_hashes": sorted(set(config_hashes)), "cells": table}
    return json.dumps(doc, sort_keys=True, indent=1)


def ecdf_lines(name: str, samples, config_hash: str) -> list[str]:
    e = ecdf(samples)
    return [json.dumps({"series": name, "config_hash": config_hash, "x": x, "F": f}, sort_keys=True)
            for x, f in e.points()]
