"""Command line: validate configs, run manifests, build reports, list recipes.

Manifest layout (YAML)::

    output: results/headline        # overridden by SLICEJAM_OUT, then by --out
    seeds: [0, 1, 2]
    base: {horizon: {learner: 3000}}   # overrides applied to every scenario
    base_config: other.yaml         # optional file merged under ``base``
    scenarios:
      - name: drl
        overrides: {attack: {kind: DRL-JA}}
    recipes: [table6]               # recipe scenarios are added automatically

Output layout::

    runs/<scenario>__s<seed>/run.json     run metadata and summary
    runs/<scenario>__s<seed>/ttis.jsonl   one JSON object per TTI
    kpis/<scenario>.json                  per-seed KPIs and seed means
    recipes/<recipe outputs>
    status.json                           per-run completion status
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import __version__
from . import metrics as M
from .config import ConfigError, ScenarioConfig, deep_merge, from_dict, read_yaml
from .engine import RunRecord, run_batch
from .recipes import RECIPES, scenario_name

ENV_OUT = "SLICEJAM_OUT"

# Headline checks: (label, target, lo, hi)
HEADLINE = {
    "throughput_degradation": ("DRL-JA throughput degradation", 50, 35, 65),
    "latency_increase": ("DRL-JA latency increase", 60, 45, 75),
    "throughput_recovery": ("decoy-DRL throughput recovery", 80, 65, 95),
    "latency_recovery": ("decoy-DRL latency recovery", 70, 55, 85),
}


def default_config_path() -> Path:
    return Path(str(resources.files("slicejam") / "data" / "default.yaml"))


# --- manifest -------------------------------------------------------------------------

@dataclass
class Manifest:
    seeds: list[int]
    base: dict
    scenarios: dict[str, dict]
    recipes: list[str] = field(default_factory=list)
    output: str | None = None

    def configs(self, seed_offset: int = 0) -> list[tuple[str, int, ScenarioConfig]]:
        out = []
        for name, over in self.scenarios.items():
            merged = deep_merge(self.base, over)
            for s in self.seeds:
                seed = int(s) + seed_offset
                out.append((name, seed, from_dict(deep_merge(merged, {"seed": seed}))))
        return out


def _manifest_errors(doc: dict, path: Path) -> tuple[list[str], Manifest | None]:
    errs: list[str] = []
    allowed = {"output", "seeds", "base", "base_config", "scenarios", "recipes"}
    for k in sorted(set(doc) - allowed):
        errs.append(f"{k}: unknown manifest field (allowed: {sorted(allowed)})")
    seeds = doc.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        errs.append("seeds: must be a non-empty list of integers")
        seeds = [0]
    base = {}
    if "base_config" in doc:
        try:
            base = read_yaml(path.parent / doc["base_config"])
        except (OSError, ConfigError) as exc:
            errs.append(f"base_config: {exc}")
    if not isinstance(doc.get("base", {}), dict):
        errs.append("base: must be a mapping")
    else:
        base = deep_merge(base, doc.get("base") or {})
    recipes = doc.get("recipes") or []
    for r in recipes:
        if r not in RECIPES:
            errs.append(f"recipes: {r!r} not in {sorted(RECIPES)}")
    scen: dict[str, dict] = {}
    for i, s in enumerate(doc.get("scenarios") or []):
        if not isinstance(s, dict) or "name" not in s:
            errs.append(f"scenarios[{i}]: needs a name")
            continue
        if s["name"] in scen:
            errs.append(f"scenarios[{i}].name: duplicate scenario {s['name']!r}")
            continue
        scen[s["name"]] = s.get("overrides") or {}
    for r in recipes:
        if r in RECIPES:
            for name, over in RECIPES[r].scenarios():
                scen.setdefault(name, over)
    if not scen:
        errs.append("scenarios: manifest defines no scenarios and no recipes")
    m = Manifest([int(s) for s in seeds], base, scen, list(recipes), doc.get("output"))
    for name, over in scen.items():
        try:
            from_dict(deep_merge(base, over))
        except ConfigError as exc:
            errs += [f"scenarios.{name}.{e}" for e in exc.errors]
    return errs, (None if errs else m)


def load_manifest(path) -> Manifest:
    path = Path(path)
    errs, m = _manifest_errors(read_yaml(path), path)
    if errs:
        raise ConfigError(errs)
    return m


def validate_file(path) -> list[str]:
    """Errors for a scenario config or a manifest; empty when valid."""
    path = Path(path)
    try:
        doc = read_yaml(path)
    except OSError as exc:
        return [f"<file>: cannot read ({exc})"]
    except ConfigError as exc:
        return list(exc.errors)
    if "scenarios" in doc or "recipes" in doc:
        return _manifest_errors(doc, path)[0]
    try:
        from_dict(doc)
    except ConfigError as exc:
        return list(exc.errors)
    return []


# --- run ------------------------------------------------------------------------------

def output_root(cli_out: str | None, manifest: Manifest | None = None) -> Path:
    root = cli_out or os.environ.get(ENV_OUT) or (manifest.output if manifest else None)
    if not root:
        raise ConfigError(["output: no output directory (use --out, SLICEJAM_OUT or manifest 'output')"])
    return Path(root)


def _dump(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def kpi_document(name: str, records: list[RunRecord]) -> dict:
    doc = {"scenario": name, "config_hashes": sorted(r.config_hash for r in records), "phases": {}}
    for phase in M.PHASES:
        sums = [M.kpis(r, phase) for r in records]
        doc["phases"][phase] = {"runs": [s.to_dict() for s in sums], "seed_means": M.seed_means(sums)}
    return doc


def run_manifest(manifest: Manifest, out: Path, parallel: int = 1, seed_offset: int = 0,
                 log=print) -> int:
    jobs = manifest.configs(seed_offset)
    results = run_batch([cfg for _, _, cfg in jobs], parallel=parallel)
    by_scen: dict[str, list[RunRecord]] = {}
    status = []
    for (name, seed, cfg), res in zip(jobs, results):
        entry = {"scenario": name, "seed": seed, "config_hash": cfg.config_hash(), "status": res.status}
        if res.status == "ok":
            res.record.meta["scenario"] = name
            res.record.save(out / "runs" / f"{name}__s{seed}")
            by_scen.setdefault(name, []).append(res.record)
        else:
            entry["error"] = res.error.splitlines()[0]
            log(f"run {name} seed {seed} failed: {entry['error']}")
        status.append(entry)
    for name, recs in by_scen.items():
        _dump(out / "kpis" / f"{name}.json", kpi_document(name, recs))
    for r in manifest.recipes:
        for p in RECIPES[r].export(by_scen, out / "recipes"):
            log(f"wrote {p}")
    failed = sum(s["status"] != "ok" for s in status)
    _dump(out / "status.json", {"runs": status, "failed": failed, "version": __version__})
    log(f"{len(status) - failed}/{len(status)} runs completed into {out}")
    return 0 if failed == 0 else 1


# --- report ---------------------------------------------------------------------------

class ReportError(RuntimeError):
    pass


def load_results(root) -> tuple[dict[str, list[RunRecord]], list[str]]:
    """Runs grouped by scenario, plus hash-consistency problems."""
    root = Path(root)
    dirs = sorted(p for p in (root / "runs").glob("*") if (p / "run.json").exists())
    if not dirs:
        raise ReportError(f"{root}: no completed runs found")
    runs: dict[str, list[RunRecord]] = {}
    problems = []
    for d in dirs:
        rec = RunRecord.load(d)
        if from_dict(rec.meta["config"]).config_hash() != rec.config_hash:
            problems.append(f"{d.name}: stored config hash does not match its config")
            continue
        runs.setdefault(rec.meta.get("scenario", d.name.split("__s")[0]), []).append(rec)
    for name, recs in runs.items():
        kp = root / "kpis" / f"{name}.json"
        if kp.exists():
            stored = json.loads(kp.read_text()).get("config_hashes", [])
            if sorted(stored) != sorted(r.config_hash for r in recs):
                problems.append(f"{name}: KPI file hashes differ from run records")
    return runs, problems


def headline_checks(runs: dict[str, list[RunRecord]]) -> dict:
    """The four headline percentages with pass/fail, or the missing scenarios."""
    need = {k: scenario_name(*k) for k in (("none", "none"), ("DRL-JA", "none"), ("DRL-JA", "decoy-DRL"))}
    missing = [n for n in need.values() if n not in runs]
    if missing:
        return {"missing": missing}
    s = {k: [M.kpis(r, "learner") for r in runs[n]] for k, n in need.items()}
    base, att, mit = s[("none", "none")], s[("DRL-JA", "none")], s[("DRL-JA", "decoy-DRL")]
    vals = {
        "throughput_degradation": M.paired_percent(M.degradation, att, base, M.THROUGHPUT),
        "latency_increase": M.paired_percent(M.degradation, att, base, M.LATENCY),
        "throughput_recovery": M.paired_percent(M.recovery, mit, att, M.THROUGHPUT),
        "latency_recovery": M.paired_percent(M.recovery, mit, att, M.LATENCY),
    }
    out = {}
    for k, v in vals.items():
        label, target, lo, hi = HEADLINE[k]
        out[k] = {"label": label, "value": round(v, 3), "target": target, "range": [lo, hi],
                  "pass": bool(lo <= v <= hi)}
    return out


def render_report(root) -> str:
    runs, problems = load_results(root)
    lines = ["# slicejam results", ""]
    if problems:
        lines += ["## Hash problems", ""] + [f"- {p}" for p in problems] + [""]
    lines += ["## Scenarios (learner phase, seed mean ± std)", "",
              "| scenario | seeds | eMBB Mbps | uRLLC latency ms | drop rate | hits/TTI |",
              "|---|---|---|---|---|---|"]
    for name in sorted(runs):
        agg = M.seed_means([M.kpis(r, "learner") for r in runs[name]])

        def f(k):
            return f"{agg[k]['mean']:.3f} ± {agg[k]['std']:.3f}"
        lines.append(f"| {name} | {len(runs[name])} | {f('throughput_mbps')} | {f('latency_mean_ms')} "
                     f"| {f('drop_rate')} | {f('hits_per_tti')} |")
    lines += ["", "## Headline checks", ""]
    checks = headline_checks(runs)
    if "missing" in checks:
        lines.append("Baseline runs missing, checks skipped: " + ", ".join(checks["missing"]))
    else:
        for c in checks.values():
            lo, hi = c["range"]
            verdict = "PASS" if c["pass"] else "FAIL"
            lines.append(f"- {verdict} {c['label']}: {c['value']:.1f}% (target {c['target']}%, "
                         f"accept {lo}-{hi}%)")
    return "\n".join(lines) + "\n"


# --- entry point ----------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slicejam", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)
    v = sub.add_parser("validate", help="check a scenario config or manifest")
    v.add_argument("path", nargs="?", help="file to check (default: shipped config)")
    v.add_argument("--manifest", help="manifest to check")
    r = sub.add_parser("run", help="run every scenario of a manifest")
    r.add_argument("--manifest", required=True, help="YAML manifest")
    r.add_argument("--out", help=f"output directory (beats ${ENV_OUT} and the manifest)")
    r.add_argument("--parallel", type=int, default=1, help="worker processes")
    r.add_argument("--seed-offset", type=int, default=0, help="added to every manifest seed")
    rep = sub.add_parser("report", help="summarise a results directory")
    rep.add_argument("results", nargs="?", help="results directory")
    rep.add_argument("--out", help="same as the positional argument")
    sub.add_parser("list-recipes", help="show the figure and table recipes")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "validate":
            path = args.manifest or args.path or default_config_path()
            errs = validate_file(path)
            for e in errs:
                print(e, file=sys.stderr)
            print(f"{path}: {'ok' if not errs else f'{len(errs)} error(s)'}")
            return 0 if not errs else 2
        if args.cmd == "run":
            if args.parallel < 1:
                raise ConfigError(["--parallel: must be >= 1"])
            m = load_manifest(args.manifest)
            return run_manifest(m, output_root(args.out, m), args.parallel, args.seed_offset)
        if args.cmd == "report":
            root = output_root(args.results or args.out)
            text = render_report(root)
            (root / "report.md").write_text(text)
            print(text, end="")
            return 0
        if args.cmd == "list-recipes":
            for name, r in RECIPES.items():
                print(f"{name:8s} {r.description} ({len(r.scenarios())} scenarios)")
            return 0
    except ConfigError as exc:
        for e in exc.errors:
            print(e, file=sys.stderr)
        return 2
    except (ReportError, OSError) as exc:
        print(exc, file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
