import numpy as np
import pytest

from slicejam import engine as E
from slicejam.config import ConfigError, ScenarioConfig


def short(attack="none", mitigation="none", seed=0, expert=200, learner=200, skip=50, **sect):
    over = {"attack": {"kind": attack}, "mitigation": {"kind": mitigation},
            "horizon": {"expert": expert, "learner": learner, "kpi_skip": skip}}
    for k, v in sect.items():
        over.setdefault(k, {}).update(v)
    return ScenarioConfig().replace(over, seed=seed)


def dump(rec):
    return rec.to_json() + "\n".join(rec.tti_lines())


class TestRunScenario:
    def test_no_attack_sets_empty(self):
        rec = E.run_scenario(short())
        assert not rec.columns["jammed"].any() and not rec.columns["decoys"].any()
        assert rec.columns["energy_spent_mj"].max() == 0.0

    def test_same_seed_identical(self):
        assert dump(E.run_scenario(short("DRL-JA", "decoy-DRL"))) == dump(E.run_scenario(short("DRL-JA", "decoy-DRL")))

    def test_seeds_differ(self):
        assert dump(E.run_scenario(short(seed=1))) != dump(E.run_scenario(short(seed=2)))

    def test_record_length_and_phases(self):
        rec = E.run_scenario(short(expert=150, learner=250))
        assert len(rec) == 400
        assert rec.boundaries == [0, 150, 400]
        assert set(rec.columns["phase"][:150]) == {0} and set(rec.columns["phase"][150:]) == {1}
        assert np.array_equal(rec.columns["t"], np.arange(400))

    def test_cja_constant_jammed_set(self):
        rec = E.run_scenario(short("CJA", expert=300, learner=300))
        sense = rec.meta["config"]["attack"]["sense_ttis"]
        for p in (0, 1):
            sl = rec.phase_slice(p, sense)
            live = rec.columns["jammed"][sl]
            assert live[0] != 0 and np.all(live == live[0])

    def test_conservation(self):
        for attack in ("none", "DRL-JA", "RJA"):
            s = E.run_scenario(short(attack, seed=3)).summary
            for key in (E.EMBB, E.URLLC):
                assert s["arrived"][key] == s["delivered"][key] + s["dropped"][key] + s["queued"][key]

    def test_empty_expert_phase_zero_transfer(self):
        rec = E.run_scenario(short(expert=0, learner=200))
        assert rec.boundaries == [0, 0, 200] and len(rec) == 200
        cfg = short(expert=0)
        world = E.World(cfg, E.make_streams(0))
        expert = E.build_agent(cfg, world, np.random.default_rng(0))
        # an expert that never stepped hands over Q^T = 0
        assert not expert.q.table.any() and not expert.q.visited.any()

    def test_invalid_config_lists_fields(self):
        with pytest.raises(ConfigError) as ei:
            E.run_scenario({"grid": {"rbgs": 0}, "attack": {"kind": "DRLJA"}})
        text = "; ".join(ei.value.errors)
        assert "grid.rbgs" in text and "attack.kind" in text

    def test_schema_roundtrip(self, tmp_path):
        rec = E.run_scenario(short("DRL-JA"))
        back = E.RunRecord.load(rec.save(tmp_path / "r"))
        assert dump(back) == dump(rec)
        assert back.config_hash == rec.config_hash

    def test_schema_version_checked(self, tmp_path):
        rec = E.run_scenario(short())
        d = rec.save(tmp_path / "r")
        (d / "run.json").write_text((d / "run.json").read_text().replace('"schema_version": 1', '"schema_version": 99'))
        with pytest.raises(ValueError):
            E.RunRecord.load(d)


class TestBatch:
    def test_parallel_matches_serial(self):
        cfgs = E.seed_sweep(short("DRL-JA", "decoy-DRL", expert=100, learner=100, skip=10), range(10))
        serial = E.run_batch(cfgs, parallel=1)
        par = E.run_batch(cfgs, parallel=3)
        assert [r.status for r in serial] == ["ok"] * 10
        assert [dump(a.record) for a in serial] == [dump(b.record) for b in par]

    def test_identical_seeds(self):
        cfgs = E.seed_sweep(short(expert=100, learner=100, skip=10), [4, 4])
        a, b = E.run_batch(cfgs)
        assert dump(a.record) == dump(b.record)

    def test_bad_run_isolated(self):
        good = short(expert=100, learner=100, skip=10)
        res = E.run_batch([good.to_dict(), {"attack": {"kind": "DRLJA"}}, good.to_dict()])
        assert [r.status for r in res] == ["ok", "error", "ok"]
        assert "attack.kind" in res[1].error
        assert dump(res[0].record) == dump(res[2].record)

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            E.run_batch([])


class Spy:
    """Wraps a party and logs what it sees."""

    def __init__(self, inner, log):
        self.inner, self.log = inner, log

    def __getattr__(self, k):
        return getattr(self.inner, k)


class SpyDefender(Spy):
    def act(self, state):
        plan = self.inner.act(state)
        self.log.append(("defender", state.jammed.copy(), state.allocated.copy(), plan.rbs.copy()))
        return plan


class SpyJammer(Spy):
    def act(self, obs):
        action = self.inner.act(obs)
        self.log.append(("jammer", obs.sensing.busy.copy(), action.jammed.copy()))
        return action


class TestTtiOrdering:
    def test_observation_lag_and_sensing(self):
        cfg = short("DRL-JA", "decoy-DRL")
        streams = E.make_streams(cfg.seed)
        world = E.World(cfg, streams)
        log = []
        jammer = SpyJammer(E.build_jammer(cfg, world), log)
        defender = SpyDefender(E.build_defender(cfg, world), log)
        agent = E.build_agent(cfg, world, streams["agent"])
        ctx = E.PhaseCtx(0, False)
        rows = [E.run_tti(world, agent, jammer, defender, ctx) for _ in range(300)]
        assert [e[0] for e in log] == ["defender", "jammer"] * 300
        prev_jam = np.zeros(13, bool)
        for t, row in enumerate(rows):
            _, seen_jam, alloc, decoys = log[2 * t]
            _, busy, jammed = log[2 * t + 1]
            assert np.array_equal(seen_jam, prev_jam)
            assert row["alloc"] == E._bits(alloc) and row["decoys"] == E._bits(decoys)
            # the jammer senses this TTI's transmissions, decoys included
            assert np.array_equal(busy, alloc | decoys)
            assert row["jammed"] == E._bits(jammed)
            prev_jam = jammed

    def test_decoys_never_on_allocated_fuzzed(self):
        rng = np.random.default_rng(0)
        for seed in range(4):
            cfg = short(rng.choice(["DRL-JA", "CJA", "FNN"]), rng.choice(["decoy-DRL", "decoy-FNN"]),
                        seed=seed, expert=150, learner=150,
                        traffic={"embb_load_mbps": float(rng.uniform(0.5, 6)),
                                 "urllc_load_mbps": float(rng.uniform(0.5, 6))})
            rec = E.run_scenario(cfg)
            assert not np.any(rec.columns["alloc"] & rec.columns["decoys"])


def test_streams_independent():
    a = E.make_streams(5)
    b = E.make_streams(5)
    assert a["traffic"].random() == b["traffic"].random()
    assert E.make_streams(5)["traffic"].random() != E.make_streams(5)["agent"].random()
    salted = E.make_streams(5, salt=3)
    assert salted["topology"].random() == E.make_streams(5)["topology"].random()
    assert salted["traffic"].random() != E.make_streams(5)["traffic"].random()
