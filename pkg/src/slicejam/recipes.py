"""Figure and table recipes: which scenarios they need and what they export."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import metrics as M

ATTACKS = ("none", "CJA", "RJA", "DRL-JA")
HIDDEN = (10, 20, 30, 40)
LAYERS = (1, 2, 3)
URLLC_UES = (10, 20, 30)
DEFENCES = ("none", "suspend", "decoy-DRL")


def scenario_name(attack: str, mitigation: str = "none", tag: str = "") -> str:
    name = f"{attack}+{mitigation}"
    return f"{name}@{tag}" if tag else name


def scenario(attack: str, mitigation: str = "none", tag: str = "", extra: dict | None = None):
    over = {"attack": {"kind": attack}, "mitigation": {"kind": mitigation}}
    for sect, vals in (extra or {}).items():
        over.setdefault(sect, {}).update(vals)
    return scenario_name(attack, mitigation, tag), over


@dataclass(frozen=True)
class Recipe:
    name: str
    description: str
    scenarios: Callable[[], list]
    export: Callable[[dict, Path], list]


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith("\n") else text + "\n")
    return path


def _lines(path: Path, rows: list[dict]) -> Path:
    return _write(path, "\n".join(json.dumps(r, sort_keys=True) for r in rows))


def _summaries(records, phase):
    return [M.kpis(r, phase) for r in records]


def _hashes(records) -> list[str]:
    return sorted({r.config_hash for r in records})


# --- fig4: convergence --------------------------------------------------------------

def _fig4_scen():
    return [scenario(a) for a in ATTACKS]


def _fig4_export(runs: dict, out: Path) -> list:
    rows = []
    for a in ATTACKS:
        recs = runs.get(scenario_name(a), [])
        for r in recs:
            for phase, p in M.PHASES.items():
                rew = r.columns["reward"][r.phase_slice(p)]
                if rew.size <= 100:
                    continue
                avg = M.running_mean(rew)
                e = M.ema(avg)
                conv = M.reward_convergence(rew)
                for i in range(0, rew.size, 10):
                    rows.append({"attack": a, "seed": r.meta["seed"], "phase": phase, "tti": i,
                                 "avg_reward": float(avg[i]), "avg_reward_ema": float(e[i]), "convergence_tti": conv,
                                 "config_hash": r.config_hash})
    return [_lines(out / "fig4_convergence.jsonl", rows)]


# --- fig5: latency eCDF -------------------------------------------------------------

def _fig5_export(runs: dict, out: Path) -> list:
    rows = []
    for a in ATTACKS:
        recs = runs.get(scenario_name(a), [])
        for phase, p in M.PHASES.items():
            lat = []
            for r in recs:
                sl = r.phase_slice(p, r.meta["config"]["horizon"]["kpi_skip"])
                lat += [x for row in r.latencies[sl] for x in row]
            if not lat:
                continue
            for x, f in M.ecdf(lat).points():
                rows.append({"attack": a, "phase": phase, "latency_ms": x, "F": f,
                             "config_hashes": _hashes(recs)})
    return [_lines(out / "fig5_ecdf.jsonl", rows)]


# --- fig6..fig9: KPI sweeps ----------------------------------------------------------

def _ue_scen():
    out = [scenario("none", tag=f"urllc{n}", extra={"topology": {"n_urllc": n}}) for n in URLLC_UES]
    for n in URLLC_UES:
        for m in DEFENCES:
            out.append(scenario("DRL-JA", m, tag=f"urllc{n}", extra={"topology": {"n_urllc": n}}))
    return out


def _capacity_scen():
    out = [scenario("none")]
    for m in DEFENCES:
        for h in HIDDEN:
            out.append(scenario("DRL-JA", m, tag=f"h{h}", extra={"attack": {"hidden": h}}))
        for layers in LAYERS:
            out.append(scenario("DRL-JA", m, tag=f"l{layers}", extra={"attack": {"layers": layers}}))
    return out


def _sweep_rows(runs, phase, axis, values, tag_fmt):
    rows = []
    for m in DEFENCES:
        for v in values:
            recs = runs.get(scenario_name("DRL-JA", m, tag_fmt(v)), [])
            if not recs:
                rows.append({"axis": axis, "value": v, "mitigation": m, "phase": phase, "absent": True})
                continue
            agg = M.seed_means(_summaries(recs, phase))
            rows.append({"axis": axis, "value": v, "mitigation": m, "phase": phase,
                         "throughput_mbps": agg["throughput_mbps"], "latency_ms": agg["latency_mean_ms"],
                         "config_hashes": _hashes(recs)})
    return rows


def _ue_export(phase):
    def export(runs, out):
        rows = []
        for n in URLLC_UES:
            recs = runs.get(scenario_name("none", tag=f"urllc{n}"), [])
            if recs:
                agg = M.seed_means(_summaries(recs, phase))
                rows.append({"axis": "n_urllc", "value": n, "mitigation": "no-attack", "phase": phase,
                             "throughput_mbps": agg["throughput_mbps"], "latency_ms": agg["latency_mean_ms"],
                             "config_hashes": _hashes(recs)})
        rows += _sweep_rows(runs, phase, "n_urllc", URLLC_UES, lambda n: f"urllc{n}")
        return [_lines(out / f"{'fig6' if phase == 'expert' else 'fig8'}_ues.jsonl", rows)]
    return export


def _capacity_export(phase):
    def export(runs, out):
        rows = _sweep_rows(runs, phase, "hidden_units", HIDDEN, lambda h: f"h{h}")
        rows += _sweep_rows(runs, phase, "hidden_layers", LAYERS, lambda n: f"l{n}")
        name = "fig7" if phase == "expert" else "fig9"
        return [_lines(out / f"{name}_capacity.jsonl", rows)]
    return export


# --- tables -----------------------------------------------------------------------

def _table_scen():
    out = [scenario("none")]
    for a in ("FNN", "DRL-JA"):
        for m in ("none", "decoy-FNN", "decoy-DRL"):
            out.append(scenario(a, m))
    return out


def _groups(runs: dict) -> dict:
    groups = {}
    for a in ("none", "FNN", "DRL-JA"):
        for m in ("none", "decoy-FNN", "decoy-DRL"):
            recs = runs.get(scenario_name(a, m))
            if recs:
                groups[(a, m)] = _summaries(recs, "learner")
    return groups


def _table_export(which: str):
    def export(runs, out):
        table = M.comparison_table(_groups(runs))
        part = {"table5": "attacker_degradation", "table6": "throughput_recovery",
                "table7": "latency_recovery"}[which]
        hashes = [h for recs in runs.values() for h in _hashes(recs)]
        return [_write(out / f"{which}.json", M.table_document(which, table[part], hashes))]
    return export


RECIPES: dict[str, Recipe] = {
    "fig4": Recipe("fig4", "reward convergence of expert and learner per attack", _fig4_scen, _fig4_export),
    "fig5": Recipe("fig5", "uRLLC latency eCDF per attack and phase", _fig4_scen, _fig5_export),
    "fig6": Recipe("fig6", "expert KPIs vs uRLLC UE count under DRL-JA", _ue_scen, _ue_export("expert")),
    "fig7": Recipe("fig7", "expert KPIs vs DRL-JA hidden units and layers", _capacity_scen,
                   _capacity_export("expert")),
    "fig8": Recipe("fig8", "learner KPIs vs uRLLC UE count under DRL-JA", _ue_scen, _ue_export("learner")),
    "fig9": Recipe("fig9", "learner KPIs vs DRL-JA hidden units and layers", _capacity_scen,
                   _capacity_export("learner")),
    "table5": Recipe("table5", "attacker NN degradation matrix", _table_scen, _table_export("table5")),
    "table6": Recipe("table6", "attacker x mitigation NN throughput recovery", _table_scen,
                     _table_export("table6")),
    "table7": Recipe("table7", "attacker x mitigation NN latency recovery", _table_scen,
                     _table_export("table7")),
}
