"""TTI-stepped simulation loop.

One run = an expert phase (cloud processing, radio-only actions) followed by
a learner phase (edge compute, warm-started from a snapshot of the expert's Q
table).  Inside a TTI the order is fixed: arrivals, allocation, decoys,
sensing and jamming, transmission, rewards, record.
"""
from __future__ import annotations

import json
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .attacks import (JammerContext, JammerObservation, JammerOutcome, JammerAction, make_jammer,
                      sense_tti, t_max, detection_threshold)
from .config import ScenarioConfig, deep_merge, from_dict
from .dtrl import ActionSpace, QApproximator, SlicingAgent, TransferMap, agent_step
from .mitigation import (DecoyPlan, KnowledgeRepository, build_knowledge_repo, decoy_power_total,
                         defender_state, make_defender, mitigation_reward, suspend_learning_step)
from .netmodel import (EMBB, URLLC, Allocation, DelayBreakdown, Packet, RBGrid, TrafficQueue,
                       TrafficSource, bits_per_rb, build_channel, build_topology, check_constraints,
                       db_to_linear, dbm_to_mw, gain_from_losses, objective_reward, ObjectiveWeights,
                       path_loss, total_delay)

SCHEMA_VERSION = 1

STREAMS = {"topology": 1, "channel": 2, "jamlink": 3, "traffic": 4, "scheduler": 5,
           "neighbours": 6, "agent": 7, "attacker": 8, "defender": 9}
# Streams that describe the deployment stay fixed when monitoring runs vary the salt.
_FIXED = ("topology", "channel", "jamlink")

ATTACK_KIND = {"none": "none", "CJA": "cja", "RJA": "rja", "DRL-JA": "drlja", "FNN": "fnn"}


def make_streams(seed: int, salt: int = 0) -> dict[str, np.random.Generator]:
    out = {}
    for name, sid in STREAMS.items():
        key = [seed, sid] if name in _FIXED or salt == 0 else [seed, sid, salt]
        out[name] = np.random.default_rng(np.random.SeedSequence(key))
    return out


class World:
    """Deployment, channel, queues and counters of the served cell."""

    def __init__(self, cfg: ScenarioConfig, streams: dict):
        self.cfg = cfg
        self.streams = streams
        t = cfg.topology
        self.grid = RBGrid(cfg.grid.subcarriers, cfg.grid.rbgs, cfg.grid.bandwidth_mhz,
                           cfg.grid.subcarrier_spacing_khz)
        self.topo = build_topology(streams["topology"], n_gnbs=t.n_gnbs, isd_m=t.isd_m,
                                   cell_radius_m=t.cell_radius_m, min_distance_m=t.min_distance_m,
                                   n_embb=t.n_embb, n_urllc=t.n_urllc, n_rbs=cfg.grid.rbgs,
                                   max_power_dbm=cfg.radio.max_tx_power_dbm, compute_hz=cfg.compute.cpu_hz)
        r = cfg.radio
        self.channel = build_channel(self.topo, self.grid, streams["channel"],
                                     shadowing_std_db=r.shadowing_std_db,
                                     penetration_loss_db=r.penetration_loss_db,
                                     antenna_gain_db=r.antenna_gain_db, noise_figure_db=r.noise_figure_db,
                                     noise_dbm_hz=r.noise_dbm_hz)
        self.j0 = t.target_gnb
        self.R = cfg.grid.rbgs
        self.G = self.topo.n_gnbs
        self.U = self.topo.n_ues
        self.p = self.channel.rb_power_mw
        self.noise = self.channel.noise_mw
        self.serving = {EMBB: self.topo.ues_of(self.j0, EMBB), URLLC: self.topo.ues_of(self.j0, URLLC)}
        self.nb = self.topo.others(self.j0)
        self.nb_ues = [self.topo.ues_of(j) for j in self.nb]
        g = self.channel.gain
        # received power from every neighbour at every UE, (n_nb, U)
        self.nb_rx = np.array([self.p[j] * g[j] for j in self.nb]).reshape(len(self.nb), self.U)
        self.sig = self.p[self.j0] * g[self.j0]
        rho = t.neighbour_activity
        nominal = self.sig / (self.noise + rho * self.nb_rx.sum(axis=0))
        self.bits = np.maximum(bits_per_rb(nominal, self.grid.rb_bandwidth_mhz, cfg.tti_s,
                                           r.max_spectral_eff), 1).astype(int)
        self.nominal_sinr = nominal
        # jammer geometry: fixed position, LOS to the target gNB
        a = cfg.attack
        th = streams["jamlink"].uniform(0.0, 2 * math.pi)
        gp = self.topo.gnbs[self.j0].position
        self.jam_pos = (gp[0] + a.distance_m * math.cos(th), gp[1] + a.distance_m * math.sin(th))
        d = np.array([max(math.hypot(u.position[0] - self.jam_pos[0], u.position[1] - self.jam_pos[1]), 1.0)
                      for u in self.topo.ues]) / 1000.0
        shadow = streams["jamlink"].normal(0.0, r.shadowing_std_db, size=self.U)
        self.jam_gain = gain_from_losses(path_loss(d), shadow, r.penetration_loss_db) * db_to_linear(r.antenna_gain_db)
        self.gnb_to_jammer = float(gain_from_losses(path_loss(a.distance_m / 1000.0)) * db_to_linear(r.antenna_gain_db))
        self.e_theta = detection_threshold(t_max(self.grid.rb_bandwidth_mhz), a.x_r_dbm)
        self.decode_thr = float(db_to_linear(r.decode_threshold_db))
        tr = cfg.traffic
        bits = {EMBB: tr.embb_packet_bytes * 8, URLLC: tr.urllc_packet_bytes * 8}
        rates = {EMBB: tr.embb_load_mbps, URLLC: tr.urllc_load_mbps}
        self.queue = TrafficQueue(bits, rates, tr.queue_cap)
        self.source = TrafficSource(self.serving, rates, bits, cfg.tti_s, tr.urllc_cbr_fraction)
        self._seed_queue(cfg.initial_queues)
        self.t = 0
        self.counts = {k: {EMBB: 0, URLLC: 0} for k in ("arrived", "delivered", "dropped")}
        self.embb_bits_ue = np.zeros(self.U)
        self.last_jam = np.zeros(self.R, dtype=bool)
        self.win_bits: list[float] = []
        self.win_lat: list[list[float]] = []
        self.d_prev = 0.0

    def _seed_queue(self, init) -> None:
        rng = self.streams["traffic"]
        for sl, n in zip((EMBB, URLLC), init):
            if n and self.serving[sl].size:
                for u in rng.choice(self.serving[sl], size=n):
                    self.queue.push(Packet(sl, int(u), self.queue.packet_bits[sl], 0))

    # -- scheduling -------------------------------------------------------------

    def _schedule(self, sl: str, lo: int, hi: int, owner: np.ndarray, assign: list) -> None:
        n = hi - lo
        q = self.queue.fifo[sl]
        if n <= 0 or not q:
            return
        pos = lo + self.streams["scheduler"].permutation(n)
        k = 0
        t = self.t
        for pkt in q:
            if k >= n:
                break
            if pkt.hold_until > t:
                continue
            b = int(self.bits[pkt.ue])
            take = min(-(-int(pkt.remaining) // b), n - k)
            rbs = pos[k:k + take]
            k += take
            owner[rbs] = pkt.ue
            assign.append((pkt, rbs))

    def allocation(self, owner: np.ndarray, nb_active: np.ndarray, nb_owner: list, compute) -> Allocation:
        x = np.zeros((self.G, self.U, self.R), dtype=bool)
        rbs = np.flatnonzero(owner >= 0)
        x[self.j0, owner[rbs], rbs] = True
        for k, j in enumerate(self.nb):
            rr = np.flatnonzero(nb_active[k])
            x[j, nb_owner[k], rr] = True
        c = np.zeros((self.G, 2))
        c[self.j0] = compute
        return Allocation(x, c)


@dataclass
class PhaseCtx:
    phase: int
    mec: bool
    repo: KnowledgeRepository | None = None
    guard_band: float = 0.05


def run_tti(world: World, agent: SlicingAgent, attacker, defender, ctx: PhaseCtx) -> dict:
    """Advance ``world`` by one TTI and return its record row."""
    cfg = world.cfg
    t = world.t
    R = world.R
    tti_ms = cfg.tti_ms
    # (1) arrivals
    for pkt in world.source.arrivals(t, world.streams["traffic"]):
        if world.queue.push(pkt):
            world.counts["arrived"][pkt.slice] += 1
    # (2) allocation from the agent's current split
    act = agent.current()
    r_e, r_u = int(act[0]), int(act[1])
    compute = (act[2], act[3]) if len(act) == 4 else (0.0, 0.0)
    owner = np.full(R, -1)
    assign: list = []
    world._schedule(URLLC, 0, r_u, owner, assign)
    world._schedule(EMBB, r_u, r_u + r_e, owner, assign)
    rng_nb = world.streams["neighbours"]
    nb_active = rng_nb.random((len(world.nb), R)) < cfg.topology.neighbour_activity
    nb_owner = [rng_nb.choice(world.nb_ues[k], size=int(nb_active[k].sum()))
                for k in range(len(world.nb))]
    alloc = world.allocation(owner, nb_active, nb_owner, compute)
    report = check_constraints(alloc, world.topo)
    if report:
        raise RuntimeError(f"TTI {t}: infeasible allocation: {report}")
    allocated = owner >= 0
    rbs = np.flatnonzero(allocated)
    ues = owner[rbs]
    # (3) decoys
    dstate = defender_state(allocated, world.last_jam)
    plan = defender.act(dstate) if defender.kind.startswith("decoy") else DecoyPlan.empty(R)
    if np.any(plan.rbs & allocated):
        raise RuntimeError(f"TTI {t}: decoy placed on an allocated RB")
    # legit SINR per RB of the target cell
    interf = (nb_active[:, rbs] * world.nb_rx[:, ues]).sum(axis=0) if rbs.size else np.zeros(0)
    sig = world.sig[ues]
    legit = np.zeros(R)
    legit[rbs] = sig / (world.noise + interf)
    # (4) sensing and jamming
    if attacker.kind != "none":
        rx = np.where(allocated, world.p[world.j0], plan.powers_mw) * world.gnb_to_jammer
        a = cfg.attack
        sensing = sense_tti(rx, world.e_theta, attacker.rng, noise_mw=world.noise, tti_us=cfg.tti_us,
                            slot_us=a.slot_us, dt_us=a.sample_us, idle_us=a.idle_us)
        jam = attacker.act(JammerObservation(t, sensing, legit))
    else:
        jam = JammerAction.empty(R)
    # (5) transmission
    jam_rx = jam.powers_mw[rbs] * world.jam_gain[ues] if rbs.size else np.zeros(0)
    after = np.zeros(R)
    after[rbs] = sig / (world.noise + interf + jam_rx)
    failed = np.zeros(R, dtype=bool)
    failed[rbs] = after[rbs] < world.decode_thr
    done, gone = [], []
    embb_bits = 0.0
    lat = []
    max_retx = cfg.harq.max_retx
    rtt = cfg.harq.rtt_tti
    for pkt, prb in assign:
        if pkt.first_tx < 0:
            pkt.first_tx = t
        if not failed[prb].any():
            pkt.remaining -= len(prb) * int(world.bits[pkt.ue])
            pkt.pending_retx = False
            pkt.fails = 0
            if pkt.remaining <= 0:
                done.append(pkt)
            continue
        pkt.fails += 1
        if pkt.fails > max_retx:
            gone.append(pkt)
            continue
        pkt.pending_retx = True
        pkt.retx += 1
        pkt.hold_until = t + rtt
    for pkt in done:
        world.counts["delivered"][pkt.slice] += 1
        if pkt.slice == EMBB:
            embb_bits += pkt.bits
            world.embb_bits_ue[pkt.ue] += pkt.bits
        else:
            d_rtx = pkt.retx * rtt * tti_ms
            d_que = (pkt.first_tx - pkt.arrival) * tti_ms
            d_tx = max((t - pkt.first_tx + 1) * tti_ms - d_rtx, 0.0)
            if ctx.mec:
                edge = pkt.bits * cfg.compute.cycles_per_bit / compute[1] * 1e3
                parts = DelayBreakdown(d_tx, d_rtx, d_que, d_edge=edge, eta=1)
            else:
                parts = DelayBreakdown(d_tx, d_rtx, d_que, d_cloud=cfg.compute.cloud_delay_ms, eta=0)
            lat.append(total_delay(parts))
    for pkt in gone:
        world.counts["dropped"][pkt.slice] += 1
    world.queue.remove(done + gone)
    # (6) rewards
    kw = cfg.objective.kpi_window
    world.win_bits.append(embb_bits)
    world.win_lat.append(lat)
    if len(world.win_bits) > kw:
        world.win_bits.pop(0)
        world.win_lat.pop(0)
    b_avg = sum(world.win_bits) / (len(world.win_bits) * cfg.tti_s) / 1e6
    recent = [x for l in world.win_lat for x in l]
    if recent:
        d_avg = sum(recent) / len(recent)
    elif world.queue.fifo[URLLC]:
        hol = world.queue.fifo[URLLC][0]
        proc = (hol.bits * cfg.compute.cycles_per_bit / compute[1] * 1e3) if ctx.mec else cfg.compute.cloud_delay_ms
        d_avg = (t - hol.arrival + 1) * tti_ms + proc
    else:
        d_avg = world.d_prev
    world.d_prev = d_avg
    o = cfg.objective
    reward = objective_reward(b_avg, d_avg, ObjectiveWeights(o.w_embb, o.w_urllc, o.d_target_ms))
    if attacker.kind != "none":
        attacker.feedback(JammerOutcome(allocated, legit, after))
    r_m = mitigation_reward(after[rbs]) if rbs.size else 0.0
    if defender.kind.startswith("decoy"):
        defender.feedback(r_m, jam.jammed)
    flagged = False
    power_obs = float(np.mean(sig + interf + jam_rx + world.noise)) if rbs.size else 0.0
    if ctx.repo is not None and rbs.size:
        flagged = suspend_learning_step(ctx.repo, (power_obs, r_m), agent, ctx.guard_band).flagged
    world.last_jam = jam.jammed.copy()
    action_idx = agent.action
    agent_step(agent, world.queue, reward, learn=not flagged)
    world.t += 1
    hits = int((jam.jammed & allocated).sum())
    return {
        "t": t, "phase": ctx.phase, "action": int(action_idx), "reward": float(reward),
        "embb_mbps": embb_bits / cfg.tti_s / 1e6, "urllc_lat": lat,
        "q_embb": world.queue.q_embb, "q_urllc": world.queue.q_urllc,
        "alloc": _bits(allocated), "jammed": _bits(jam.jammed), "decoys": _bits(plan.rbs),
        "jam_mw": jam.total_power, "energy_mj": jam.energy_mj,
        "energy_spent_mj": attacker.ctx.spent, "energy_left_mj": attacker.ctx.remaining,
        "decoy_mw": decoy_power_total(plan), "sinr": r_m, "power_mw": power_obs,
        "hits": hits, "jam_misses": int(jam.jammed.sum()) - hits, "failed": int(failed.sum()),
        "flagged": bool(flagged), "delivered": len(done), "dropped": len(gone),
    }


def _bits(mask: np.ndarray) -> int:
    return int(sum(1 << int(i) for i in np.flatnonzero(mask)))


def unpack_bits(v: int, n: int) -> np.ndarray:
    return np.array([(int(v) >> i) & 1 for i in range(n)], dtype=bool)


# --- records -------------------------------------------------------------------

SCALAR_COLUMNS = ("t", "phase", "action", "reward", "embb_mbps", "q_embb", "q_urllc", "alloc",
                  "jammed", "decoys", "jam_mw", "energy_mj", "energy_spent_mj", "energy_left_mj",
                  "decoy_mw", "sinr", "power_mw", "hits", "jam_misses", "failed", "flagged",
                  "delivered", "dropped")


@dataclass
class RunRecord:
    meta: dict
    columns: dict
    latencies: list
    summary: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.columns["t"])

    @property
    def config_hash(self) -> str:
        return self.meta["config_hash"]

    @property
    def boundaries(self) -> list[int]:
        return self.meta["phase_boundaries"]

    def phase_slice(self, phase: int, skip: int = 0) -> slice:
        b = self.boundaries
        return slice(min(b[phase] + skip, b[phase + 1]), b[phase + 1])

    def document(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "meta": self.meta, "summary": self.summary}

    def to_json(self) -> str:
        return json.dumps(self.document(), sort_keys=True, indent=1)

    def tti_lines(self) -> Iterable[str]:
        cols = self.columns
        for i in range(len(self)):
            row = {k: _py(cols[k][i]) for k in SCALAR_COLUMNS}
            row["urllc_lat"] = self.latencies[i]
            yield json.dumps(row, sort_keys=True)

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "run.json").write_text(self.to_json() + "\n")
        with open(d / "ttis.jsonl", "w") as fh:
            for line in self.tti_lines():
                fh.write(line + "\n")
        return d

    @classmethod
    def load(cls, directory) -> "RunRecord":
        d = Path(directory)
        doc = json.loads((d / "run.json").read_text())
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"{d}: unsupported schema version {doc.get('schema_version')}")
        cols = {k: [] for k in SCALAR_COLUMNS}
        lats = []
        with open(d / "ttis.jsonl") as fh:
            for line in fh:
                row = json.loads(line)
                for k in SCALAR_COLUMNS:
                    cols[k].append(row[k])
                lats.append(row["urllc_lat"])
        return cls(doc["meta"], {k: np.array(v) for k, v in cols.items()}, lats, doc["summary"])


def _py(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# --- phases and runs ---------------------------------------------------------------

def build_agent(cfg: ScenarioConfig, world: World, rng: np.random.Generator,
                transfer: TransferMap | None = None) -> SlicingAgent:
    a = cfg.agent
    if transfer is None:
        space = ActionSpace.expert(world.R)
    else:
        space = transfer.learner_space
    approx = QApproximator(len(space), a.mode, q_max=a.q_max, hidden=a.hidden,
                           replay_capacity=a.replay, minibatch=a.minibatch,
                           train_interval=a.train_interval, copy_interval=a.copy_interval,
                           alpha=a.alpha, gamma=a.gamma, epsilon=a.epsilon, lr=a.lr, clip=a.clip,
                           init_scale=a.init_scale, rng=rng)
    agent = SlicingAgent(space, approx, rng, transfer)
    agent.reset(world.queue.state())
    return agent


def build_jammer(cfg: ScenarioConfig, world: World):
    a = cfg.attack
    kind = ATTACK_KIND[a.kind]
    ctx = JammerContext(target_gnb=world.j0, e_theta=world.e_theta, x_r=a.x_r_dbm,
                        energy_budget=a.energy_budget_mj, omega1=a.omega1, omega2=a.omega2,
                        gamma_j=a.gamma)
    common = dict(max_power_dbm=a.max_power_dbm)
    if kind == "cja":
        extra = dict(width=a.width, sense_ttis=a.sense_ttis)
    elif kind == "rja":
        extra = dict(width=a.width, sense_ttis=a.sense_ttis, scope=a.rja_scope)
    elif kind == "drlja":
        extra = dict(width=a.width, hidden=a.hidden, layers=a.layers, seq_len=a.seq_len,
                     epsilon=a.epsilon, lr=a.lr, optimizer=a.optimizer, replay=a.replay,
                     batch=a.batch, train_every=a.train_every, copy_every=a.copy_every,
                     warmup=a.warmup, reward_norm=a.reward_norm)
    elif kind == "fnn":
        extra = dict(history=a.fnn_history, hidden=a.fnn_hidden, lr=a.fnn_lr, init_range=a.fnn_init)
    else:
        extra = {}
    return make_jammer(kind, ctx, world.R, cfg.tti_s, world.streams["attacker"], **common, **extra)


def build_defender(cfg: ScenarioConfig, world: World):
    m = cfg.mitigation
    power = float(world.p[world.j0])
    if m.kind == "decoy-DRL":
        extra = dict(chi=m.chi, gamma=m.gamma, epsilon=m.epsilon, hidden=m.hidden, lr=m.lr,
                     replay=m.replay, batch=m.batch, train_every=m.train_every,
                     copy_every=m.copy_every, warmup=m.warmup, width=m.width)
    elif m.kind == "decoy-FNN":
        extra = dict(history=m.fnn_history, hidden=m.fnn_hidden, init_range=m.fnn_init,
                     lr=m.fnn_lr, width=m.width)
    else:
        extra = dict(width=m.width)
    return make_defender(m.kind, world.R, power, world.streams["defender"], **extra)


_REPO_CACHE: dict = {}


def monitor_config(cfg: ScenarioConfig) -> ScenarioConfig:
    return cfg.replace({"attack": {"kind": "none"}, "mitigation": {"kind": "none"}})


def knowledge_repo(cfg: ScenarioConfig) -> KnowledgeRepository:
    """No-attack baseline of (received power, SINR) for the run's deployment.

    Monitoring runs share the deployment of ``cfg`` and differ only in traffic,
    scheduling and learning randomness.
    """
    base = monitor_config(cfg)
    key = (base.config_hash(), cfg.mitigation.repo_runs, cfg.mitigation.repo_keep)
    if key in _REPO_CACHE:
        return _REPO_CACHE[key]

    def runner(salt: int):
        rec = _simulate(base, salt=salt)
        sl = rec.phase_slice(1, base.horizon.kpi_skip) if base.horizon.learner else slice(None)
        mask = np.asarray(rec.columns["alloc"][sl]) > 0
        p = np.asarray(rec.columns["power_mw"][sl])[mask]
        s = np.asarray(rec.columns["sinr"][sl])[mask]
        r = np.asarray(rec.columns["reward"][sl])
        return float(p.mean()), float(s.mean()), float(r.mean())

    repo = build_knowledge_repo(runner, range(1, cfg.mitigation.repo_runs + 1), cfg.mitigation.repo_keep)
    _REPO_CACHE[key] = repo
    return repo


def _simulate(cfg: ScenarioConfig, salt: int = 0, repo: KnowledgeRepository | None = None) -> RunRecord:
    streams = make_streams(cfg.seed, salt)
    world = World(cfg, streams)
    jammer = build_jammer(cfg, world)
    defender = build_defender(cfg, world)
    rows: list[dict] = []
    h = cfg.horizon
    expert = build_agent(cfg, world, streams["agent"])
    ctx = PhaseCtx(0, False, repo, cfg.mitigation.guard_band)
    for _ in range(h.expert):
        rows.append(run_tti(world, expert, jammer, defender, ctx))
    learner_space = ActionSpace.learner(world.R, cfg.compute.cpu_hz)
    transfer = TransferMap(expert.q.table, expert.q.visited, expert.space, learner_space, cfg.agent.q_max)
    learner = build_agent(cfg, world, streams["agent"], transfer)
    jammer.new_phase()
    ctx = PhaseCtx(1, True, repo, cfg.mitigation.guard_band)
    for _ in range(h.learner):
        rows.append(run_tti(world, learner, jammer, defender, ctx))
    if not np.array_equal(transfer.expert_table, expert.q.table):
        raise RuntimeError("expert snapshot changed during the learner phase")
    cols = {k: np.array([r[k] for r in rows]) if rows else np.array([]) for k in SCALAR_COLUMNS}
    lats = [r["urllc_lat"] for r in rows]
    meta = {
        "config_hash": cfg.config_hash(), "seed": cfg.seed, "salt": salt,
        "phase_boundaries": [0, h.expert, h.expert + h.learner],
        "attack": cfg.attack.kind, "mitigation": cfg.mitigation.kind,
        "config": cfg.to_dict(), "version": __version__,
    }
    queued = {EMBB: world.queue.q_embb, URLLC: world.queue.q_urllc}
    summary = {
        "arrived": world.counts["arrived"], "delivered": world.counts["delivered"],
        "dropped": world.counts["dropped"], "queued": queued, "blocked": dict(world.queue.blocked),
        "embb_ue_mbps": {str(int(u)): float(world.embb_bits_ue[u] / max(len(rows), 1) / cfg.tti_s / 1e6)
                         for u in world.serving[EMBB]},
        "jam_position_m": list(world.jam_pos),
        "repository": None if repo is None else {"power_mw": repo.power_mw, "sinr": repo.sinr},
    }
    return RunRecord(meta, cols, lats, summary)


def run_scenario(config: ScenarioConfig | dict) -> RunRecord:
    """Expert phase, snapshot, learner phase; one record covering both."""
    cfg = config if isinstance(config, ScenarioConfig) else from_dict(config)
    repo = knowledge_repo(cfg) if cfg.mitigation.kind == "suspend" else None
    return _simulate(cfg, 0, repo)


@dataclass
class BatchResult:
    index: int
    status: str
    record: RunRecord | None = None
    error: str | None = None


def _run_one(args) -> BatchResult:
    i, cfg = args
    try:
        return BatchResult(i, "ok", run_scenario(cfg))
    except Exception as exc:  # one bad run must not sink the batch
        return BatchResult(i, "error", None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")


def seed_sweep(cfg: ScenarioConfig, seeds: Sequence[int]) -> list[ScenarioConfig]:
    return [cfg.replace(seed=int(s)) for s in seeds]


def run_batch(configs: Sequence, parallel: int = 1) -> list[BatchResult]:
    """Independent replications; output order and content do not depend on ``parallel``."""
    configs = list(configs)
    if not configs:
        raise ValueError("run_batch needs at least one config")
    jobs = list(enumerate(configs))
    if parallel <= 1 or len(jobs) == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_run_one, jobs))
