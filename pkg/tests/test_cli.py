import json
from pathlib import Path

import pytest
import yaml

from slicejam import cli

SHORT = {"horizon": {"expert": 150, "learner": 150, "kpi_skip": 50}}


def manifest(tmp_path, **doc):
    doc.setdefault("seeds", [0, 1])
    doc.setdefault("base", SHORT)
    path = tmp_path / "m.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


def tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


HEADLINE_SCEN = [
    {"name": "none+none", "overrides": {}},
    {"name": "DRL-JA+none", "overrides": {"attack": {"kind": "DRL-JA"}}},
    {"name": "DRL-JA+decoy-DRL", "overrides": {"attack": {"kind": "DRL-JA"}, "mitigation": {"kind": "decoy-DRL"}}},
]


class TestValidate:
    def test_default_ok(self, capsys):
        assert cli.main(["validate"]) == 0
        assert "ok" in capsys.readouterr().out

    def test_shipped_config_matches_package_default(self):
        root = Path(__file__).resolve().parents[1]
        assert yaml.safe_load((root / "configs" / "default.yaml").read_text()) == \
            yaml.safe_load(cli.default_config_path().read_text())

    def test_zero_rbgs_names_field(self, tmp_path, capsys):
        p = tmp_path / "c.yaml"
        p.write_text("grid: {rbgs: 0}\n")
        assert cli.main(["validate", str(p)]) == 2
        assert "grid.rbgs" in capsys.readouterr().err

    def test_bad_attack_lists_allowed(self, tmp_path, capsys):
        p = tmp_path / "c.yaml"
        p.write_text("attack: {kind: DRLJA}\n")
        assert cli.main(["validate", str(p)]) == 2
        err = capsys.readouterr().err
        assert "attack.kind" in err and "DRL-JA" in err and "CJA" in err

    def test_manifest_errors(self, tmp_path, capsys):
        p = manifest(tmp_path, scenarios=[{"name": "a", "overrides": {"grid": {"rbgs": 0}}},
                                          {"name": "a", "overrides": {}}],
                     recipes=["fig99"])
        assert cli.main(["validate", "--manifest", str(p)]) == 2
        err = capsys.readouterr().err
        assert "scenarios.a.grid.rbgs" in err and "fig99" in err and "duplicate" in err.lower()

    def test_missing_file(self, tmp_path):
        assert cli.main(["validate", str(tmp_path / "nope.yaml")]) == 2


class TestRunAndReport:
    def test_run_deterministic_and_parallel(self, tmp_path):
        m = manifest(tmp_path, scenarios=HEADLINE_SCEN[:2])
        assert cli.main(["run", "--manifest", str(m), "--out", str(tmp_path / "a")]) == 0
        assert cli.main(["run", "--manifest", str(m), "--out", str(tmp_path / "b"), "--parallel", "2"]) == 0
        a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
        assert a == b
        assert "runs/DRL-JA+none__s1/ttis.jsonl" in a and "kpis/none+none.json" in a
        status = json.loads(a["status.json"])
        assert status["failed"] == 0 and [r["status"] for r in status["runs"]] == ["ok"] * 4

    def test_env_out(self, tmp_path, monkeypatch):
        m = manifest(tmp_path, seeds=[0], scenarios=HEADLINE_SCEN[:1], output=str(tmp_path / "manifest_out"))
        monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env_out"))
        assert cli.main(["run", "--manifest", str(m)]) == 0
        assert (tmp_path / "env_out" / "status.json").exists()
        assert not (tmp_path / "manifest_out").exists()
        assert cli.main(["run", "--manifest", str(m), "--out", str(tmp_path / "flag_out")]) == 0
        assert (tmp_path / "flag_out" / "status.json").exists()

    def test_report(self, tmp_path, capsys):
        m = manifest(tmp_path, seeds=[0], scenarios=HEADLINE_SCEN)
        out = tmp_path / "r"
        assert cli.main(["run", "--manifest", str(m), "--out", str(out)]) == 0
        assert cli.main(["report", str(out)]) == 0
        first = (out / "report.md").read_text()
        assert "DRL-JA throughput degradation" in first and ("PASS" in first or "FAIL" in first)
        assert cli.main(["report", str(out)]) == 0
        assert (out / "report.md").read_text() == first

    def test_report_partial_lists_missing(self, tmp_path):
        m = manifest(tmp_path, seeds=[0], scenarios=HEADLINE_SCEN[:1])
        out = tmp_path / "r"
        cli.main(["run", "--manifest", str(m), "--out", str(out)])
        text = cli.render_report(out)
        assert "DRL-JA+none" in text and "missing" in text.lower()

    def test_report_empty_dir(self, tmp_path, capsys):
        assert cli.main(["report", str(tmp_path)]) == 2
        assert cli.main(["report", str(tmp_path / "absent")]) == 2

    def test_report_detects_tampering(self, tmp_path):
        m = manifest(tmp_path, seeds=[0], scenarios=HEADLINE_SCEN[:1])
        out = tmp_path / "r"
        cli.main(["run", "--manifest", str(m), "--out", str(out)])
        run_json = out / "runs" / "none+none__s0" / "run.json"
        doc = json.loads(run_json.read_text())
        doc["meta"]["config"]["grid"]["rbgs"] = 12
        run_json.write_text(json.dumps(doc))
        _, problems = cli.load_results(out)
        assert problems

    def test_recipe_outputs(self, tmp_path):
        m = manifest(tmp_path, seeds=[0], recipes=["fig5"])
        out = tmp_path / "r"
        assert cli.main(["run", "--manifest", str(m), "--out", str(out)]) == 0
        lines = (out / "recipes" / "fig5_ecdf.jsonl").read_text().splitlines()
        rows = [json.loads(x) for x in lines]
        assert rows and all(0.0 <= r["F"] <= 1.0 for r in rows)

    def test_bad_parallel(self, tmp_path):
        m = manifest(tmp_path, seeds=[0], scenarios=HEADLINE_SCEN[:1])
        assert cli.main(["run", "--manifest", str(m), "--out", str(tmp_path / "x"), "--parallel", "0"]) == 2


def test_list_recipes(capsys):
    assert cli.main(["list-recipes"]) == 0
    out = capsys.readouterr().out
    for name in ("fig4", "fig5", "table6", "table7"):
        assert name in out
