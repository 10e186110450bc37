"""Radio, traffic and delay model for a small cluster of sliced gNBs.

Everything here is a plain function of its inputs (randomness always comes in
through an explicit ``numpy.random.Generator``), so independent replications
can share the module freely.  SINR math is linear; dB only shows up at the
configuration boundary.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EMBB = "eMBB"
URLLC = "uRLLC"
SLICES = (EMBB, URLLC)


# --- unit helpers ----------------------------------------------------------

def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_mw(dbm):
    return db_to_linear(dbm)


def mw_to_dbm(mw):
    return linear_to_db(mw)


# --- topology --------------------------------------------------------------

@dataclass(frozen=True)
class GNB:
    id: int
    position: tuple[float, float]
    n_rbs: int = 13
    rb_power_dbm: float = 40.0 - 10.0 * math.log10(13)
    compute_hz: float = 1e9


@dataclass(frozen=True)
class UE:
    id: int
    position: tuple[float, float]
    slice: str
    gnb: int


@dataclass
class Topology:
    """Sites and users.  Validated on construction."""

    gnbs: list[GNB]
    ues: list[UE]
    isd_m: float = 500.0
    max_power_dbm: float = 40.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        ids = {g.id for g in self.gnbs}
        if len(ids) != len(self.gnbs):
            raise ValueError("duplicate gNB id")
        if [g.id for g in self.gnbs] != list(range(len(self.gnbs))):
            raise ValueError("gNB ids must be 0..n-1 in order")
        if [u.id for u in self.ues] != list(range(len(self.ues))):
            raise ValueError("UE ids must be 0..n-1 in order")
        for u in self.ues:
            if u.gnb not in ids:
                raise ValueError(f"UE {u.id} references unknown gNB {u.gnb}")
            if u.slice not in SLICES:
                raise ValueError(f"UE {u.id} has unknown slice {u.slice!r}")
        for g in self.gnbs:
            if g.rb_power_dbm > self.max_power_dbm + 1e-9:
                raise ValueError(f"gNB {g.id} per-RB power exceeds {self.max_power_dbm} dBm")
            if g.n_rbs <= 0 or g.compute_hz <= 0:
                raise ValueError(f"gNB {g.id} needs positive RBs and compute")
        if len(self.gnbs) > 1:
            pos = np.array([g.position for g in self.gnbs])
            d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
            np.fill_diagonal(d, np.inf)
            nearest = d.min(axis=1)
            if not np.allclose(nearest, self.isd_m, rtol=1e-6):
                raise ValueError("inter-site distance does not match isd_m")

    @property
    def n_gnbs(self) -> int:
        return len(self.gnbs)

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    def others(self, j: int) -> list[int]:
        """J_{-j}: every gNB except j."""
        return [g.id for g in self.gnbs if g.id != j]

    def ues_of(self, gnb: int, slice_: str | None = None) -> np.ndarray:
        return np.array([u.id for u in self.ues
                         if u.gnb == gnb and (slice_ is None or u.slice == slice_)], dtype=int)

    def distance_km(self, gnb: int, ue: int) -> float:
        g = self.gnbs[gnb].position
        u = self.ues[ue].position
        return math.hypot(g[0] - u[0], g[1] - u[1]) / 1000.0


def site_positions(n_gnbs: int, isd_m: float) -> list[tuple[float, float]]:
    """Site 0 at the origin, the rest on the first hexagonal ring."""
    if not 1 <= n_gnbs <= 7:
        raise ValueError("between 1 and 7 gNBs supported")
    pos = [(0.0, 0.0)]
    for k in range(n_gnbs - 1):
        a = math.radians(60.0 * k)
        pos.append((isd_m * math.cos(a), isd_m * math.sin(a)))
    return pos


def build_topology(rng: np.random.Generator, *, n_gnbs: int = 3, isd_m: float = 500.0,
                   cell_radius_m: float = 125.0, min_distance_m: float = 35.0,
                   n_embb: int = 25, n_urllc: int = 10, n_rbs: int = 13,
                   max_power_dbm: float = 40.0, compute_hz: float = 1e9) -> Topology:
    """Drop UEs uniformly (by area) in an annulus around every site.

    The total transmit power is split evenly over the RBs.
    """
    rb_power = max_power_dbm - 10.0 * math.log10(n_rbs)
    gnbs = [GNB(j, p, n_rbs, rb_power, compute_hz)
            for j, p in enumerate(site_positions(n_gnbs, isd_m))]
    ues: list[UE] = []
    for g in gnbs:
        for sl, count in ((EMBB, n_embb), (URLLC, n_urllc)):
            r = np.sqrt(rng.uniform(min_distance_m ** 2, cell_radius_m ** 2, size=count))
            th = rng.uniform(0.0, 2 * math.pi, size=count)
            for rr, tt in zip(r, th):
                ues.append(UE(len(ues), (g.position[0] + rr * math.cos(tt),
                                         g.position[1] + rr * math.sin(tt)), sl, g.id))
    return Topology(gnbs, ues, isd_m, max_power_dbm)


@dataclass(frozen=True)
class RBGrid:
    subcarriers: int = 12
    rbgs: int = 13
    bandwidth_mhz: float = 20.0
    subcarrier_spacing_khz: float = 15.0

    def __post_init__(self):
        if self.subcarriers <= 0:
            raise ValueError("subcarriers must be positive")
        if self.rbgs <= 0:
            raise ValueError("rbgs must be positive")
        if self.subcarrier_spacing_khz <= 0 or self.bandwidth_mhz <= 0:
            raise ValueError("bandwidths must be positive")
        if self.rbgs * self.rb_bandwidth_mhz > self.bandwidth_mhz + 1e-9:
            raise ValueError("RB groups do not fit in the carrier bandwidth")

    @property
    def rb_bandwidth_mhz(self) -> float:
        """b_q, one RB's bandwidth."""
        return self.subcarriers * self.subcarrier_spacing_khz / 1000.0

    @property
    def n_cells(self) -> int:
        return self.subcarriers * self.rbgs

    def cell_index(self, subcarrier: int, rb: int) -> int:
        if not (0 <= subcarrier < self.subcarriers and 0 <= rb < self.rbgs):
            raise IndexError("cell outside the grid")
        return rb * self.subcarriers + subcarrier


# --- channel ---------------------------------------------------------------

def path_loss(distance_km):
    """Macro path loss in dB: 128.1 + 37.6 log10(d)."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be positive")
    pl = 128.1 + 37.6 * np.log10(d)
    return float(pl) if pl.ndim == 0 else pl


def gain_from_losses(path_loss_db, shadowing_db=0.0, penetration_loss_db=0.0):
    return db_to_linear(-(np.asarray(path_loss_db) + shadowing_db + penetration_loss_db))


def channel_gain(topology: Topology, link: tuple[int, int], rb: int,
                 rng: np.random.Generator | None = None, *,
                 shadowing_std_db: float = 8.0, penetration_loss_db: float = 5.0,
                 shadowing_db: float | None = None) -> float:
    """Linear gain of one (gNB, UE) link on one RB.

    Shadowing is drawn from ``rng`` unless ``shadowing_db`` is supplied.  There
    is no frequency selectivity so ``rb`` only gets bounds-checked.
    """
    j, u = link
    if not (0 <= j < topology.n_gnbs) or not (0 <= u < topology.n_ues):
        raise KeyError(f"unknown link {link}")
    if not 0 <= rb < topology.gnbs[j].n_rbs:
        raise IndexError(f"RB {rb} outside gNB {j}")
    if shadowing_db is None:
        if rng is None:
            raise ValueError("need rng or explicit shadowing")
        shadowing_db = float(rng.normal(0.0, shadowing_std_db))
    pl = path_loss(max(topology.distance_km(j, u), 1e-3))
    return float(gain_from_losses(pl, shadowing_db, penetration_loss_db))


@dataclass
class ChannelState:
    """Link gains and the noise floor.

    ``gain[j, u]`` is the linear gain from gNB j to UE u including antenna
    gain; it is flat across RBs.  ``rb_power_mw[j]`` is p_{j,r}.
    """

    gain: np.ndarray
    rb_power_mw: np.ndarray
    noise_density_mw_hz: float
    rb_bandwidth_hz: float
    shadowing_db: np.ndarray | None = None
    noise_figure_db: float = 5.0
    penetration_loss_db: float = 5.0

    def __post_init__(self):
        self.gain = np.asarray(self.gain, dtype=float)
        self.rb_power_mw = np.asarray(self.rb_power_mw, dtype=float)
        if np.any(self.gain < 0):
            raise ValueError("gains must be non-negative")
        if not self.noise_density_mw_hz > 0 or not self.rb_bandwidth_hz > 0:
            raise ValueError("noise density and RB bandwidth must be positive")

    @property
    def noise_mw(self) -> float:
        return self.noise_density_mw_hz * self.rb_bandwidth_hz

    def q(self, j: int, u: int, r: int | None = None) -> float:
        return float(self.gain[j, u])


def build_channel(topology: Topology, grid: RBGrid, rng: np.random.Generator, *,
                  shadowing_std_db: float = 8.0, penetration_loss_db: float = 5.0,
                  antenna_gain_db: float = 15.0, noise_figure_db: float = 5.0,
                  noise_dbm_hz: float = -174.0) -> ChannelState:
    G, U = topology.n_gnbs, topology.n_ues
    shadow = rng.normal(0.0, shadowing_std_db, size=(G, U))
    d = np.empty((G, U))
    for j in range(G):
        for u in range(U):
            d[j, u] = max(topology.distance_km(j, u), 1e-3)
    g = gain_from_losses(path_loss(d), shadow, penetration_loss_db) * db_to_linear(antenna_gain_db)
    n0 = float(dbm_to_mw(noise_dbm_hz + noise_figure_db))
    p = dbm_to_mw([gn.rb_power_dbm for gn in topology.gnbs])
    return ChannelState(g, p, n0, grid.rb_bandwidth_mhz * 1e6, shadow,
                        noise_figure_db, penetration_loss_db)


# --- allocation and SINR ---------------------------------------------------

@dataclass
class Allocation:
    """x[j, u, r] plus the (eMBB, uRLLC) compute split of every gNB in Hz."""

    x: np.ndarray
    compute: np.ndarray

    @classmethod
    def empty(cls, n_gnbs: int, n_ues: int, n_rbs: int) -> "Allocation":
        return cls(np.zeros((n_gnbs, n_ues, n_rbs), dtype=bool), np.zeros((n_gnbs, 2)))

    def used(self, j: int) -> np.ndarray:
        return self.x[j].any(axis=0)

    def rbs_of(self, j: int, u: int) -> np.ndarray:
        return np.flatnonzero(self.x[j, u])

    def owner(self, j: int) -> np.ndarray:
        """UE on each RB of gNB j, -1 when vacant (first UE if the map is infeasible)."""
        xj = self.x[j]
        own = xj.argmax(axis=0)
        own[~xj.any(axis=0)] = -1
        return own


def check_constraints(alloc: Allocation, topology: Topology) -> list[str]:
    """Feasibility report; empty when every constraint holds."""
    report = []
    x = np.asarray(alloc.x, dtype=bool)
    per_rb = x.sum(axis=1)  # (G, R)
    for j, g in enumerate(topology.gnbs):
        for r in np.flatnonzero(per_rb[j] > 1):
            report.append(f"rb-exclusive: gNB {j} RB {r} assigned to {per_rb[j, r]} UEs")
        n_alloc = int((per_rb[j] > 0).sum())
        if n_alloc > g.n_rbs or per_rb[j, g.n_rbs:].any():
            report.append(f"rb-budget: gNB {j} allocates {n_alloc} RBs, has {g.n_rbs}")
        c = np.asarray(alloc.compute[j], dtype=float)
        if np.any(c < 0) or c.sum() > g.compute_hz * (1 + 1e-12):
            report.append(f"compute-budget: gNB {j} compute {c.sum():.6g} exceeds {g.compute_hz:.6g}")
    return report


def _interference(channel: ChannelState, x: np.ndarray, j: int, u: int) -> np.ndarray:
    """Per-RB interference at UE u from every gNB other than j."""
    active = x.any(axis=1)  # (G, R)
    contrib = (channel.rb_power_mw * channel.gain[:, u])[:, None] * active
    return contrib.sum(axis=0) - contrib[j]


def per_rb_sinr(channel: ChannelState, alloc: Allocation, ue: int, gnb: int | None = None,
                jam_mw=0.0) -> np.ndarray:
    """Linear SINR on every RB (zero where the UE holds nothing)."""
    jam = np.asarray(jam_mw, dtype=float)
    if np.any(jam < 0):
        raise ValueError("jam power must be non-negative")
    j = gnb if gnb is not None else _serving(alloc, ue)
    if j is None:
        return np.zeros(alloc.x.shape[2])
    mine = alloc.x[j, ue]
    sig = channel.rb_power_mw[j] * channel.gain[j, ue]
    den = channel.noise_mw + _interference(channel, alloc.x, j, ue) + jam
    return np.where(mine, sig / den, 0.0)


def _serving(alloc: Allocation, ue: int) -> int | None:
    js = np.flatnonzero(alloc.x[:, ue, :].any(axis=1))
    return int(js[0]) if js.size else None


def sinr(channel: ChannelState, alloc: Allocation, ue: int, gnb: int | None = None) -> float:
    """Legitimate SINR of a UE summed over its RBs."""
    return float(per_rb_sinr(channel, alloc, ue, gnb).sum())


def sinr_jammed(channel: ChannelState, alloc: Allocation, ue: int, jam_power,
                gnb: int | None = None) -> float:
    """Same as :func:`sinr` with received jamming power (mW, scalar or per RB) added below."""
    return float(per_rb_sinr(channel, alloc, ue, gnb, jam_power).sum())


def shannon_mbps(sinr_lin, rb_bandwidth_mhz: float):
    return rb_bandwidth_mhz * np.log2(1.0 + np.asarray(sinr_lin, dtype=float))


def throughput(channel: ChannelState, alloc: Allocation, ue: int, jam_power=0.0,
               gnb: int | None = None) -> float:
    """Shannon rate (Mbps) summed over the UE's RBs."""
    s = per_rb_sinr(channel, alloc, ue, gnb, jam_power)
    held = s > 0
    return float(shannon_mbps(s[held], channel.rb_bandwidth_hz / 1e6).sum())


# --- delay and objective ---------------------------------------------------

@dataclass(frozen=True)
class DelayBreakdown:
    d_tx: float = 0.0
    d_rtx: float = 0.0
    d_que: float = 0.0
    d_edge: float = 0.0
    d_cloud: float = 0.0
    eta: int = 1

    def __post_init__(self):
        if min(self.d_tx, self.d_rtx, self.d_que, self.d_edge, self.d_cloud) < 0:
            raise ValueError("delay components must be non-negative")
        if self.eta not in (0, 1):
            raise ValueError("eta must be 0 or 1")


def total_delay(parts: DelayBreakdown) -> float:
    """Latency in ms; edge and cloud terms are mutually exclusive via eta."""
    base = parts.d_tx + parts.d_rtx + parts.d_que
    return base + (parts.d_edge if parts.eta == 1 else parts.d_cloud)


@dataclass(frozen=True)
class ObjectiveWeights:
    w_embb: float = 1.0
    w_urllc: float = 1.0
    d_target: float = 1.0

    def __post_init__(self):
        if self.w_embb < 0 or self.w_urllc < 0:
            raise ValueError("weights must be non-negative")


def objective_reward(b_avg: float, d_avg: float, weights: ObjectiveWeights = ObjectiveWeights()) -> float:
    return weights.w_embb * b_avg + weights.w_urllc * (weights.d_target - d_avg)


# --- traffic ---------------------------------------------------------------

def generate_traffic(rate_mbps: float, packet_bits: int, tti_s: float, rng: np.random.Generator,
                     cbr_fraction: float = 0.0, cbr_credit: float = 0.0) -> tuple[int, float]:
    """Packets arriving in one TTI for one slice.

    A ``cbr_fraction`` of the load arrives at a constant rate (tracked through
    ``cbr_credit``, returned updated); the rest is Poisson.
    """
    if rate_mbps < 0 or packet_bits <= 0 or tti_s <= 0:
        raise ValueError("bad traffic parameters")
    if not 0.0 <= cbr_fraction <= 1.0:
        raise ValueError("cbr_fraction must lie in [0, 1]")
    lam = rate_mbps * 1e6 * tti_s / packet_bits
    n = 0
    if cbr_fraction < 1.0:
        n += int(rng.poisson(lam * (1.0 - cbr_fraction)))
    if cbr_fraction > 0.0:
        cbr_credit += lam * cbr_fraction
        k = math.floor(cbr_credit + 1e-9)
        cbr_credit -= k
        n += k
    return n, cbr_credit


@dataclass(slots=True)
class Packet:
    slice: str
    ue: int
    bits: int
    arrival: int
    remaining: float = 0.0
    first_tx: int = -1
    retx: int = 0
    pending_retx: bool = False
    hold_until: int = 0
    fails: int = 0  # consecutive failed attempts

    def __post_init__(self):
        if self.remaining == 0.0:
            self.remaining = float(self.bits)


@dataclass
class TrafficQueue:
    """Per-slice FIFO of pending requests."""

    packet_bits: dict = field(default_factory=lambda: {EMBB: 800, URLLC: 400})
    rates_mbps: dict = field(default_factory=lambda: {EMBB: 2.0, URLLC: 2.0})
    capacity: int = 100
    fifo: dict = field(default_factory=lambda: {EMBB: deque(), URLLC: deque()})
    blocked: dict = field(default_factory=lambda: {EMBB: 0, URLLC: 0})

    @property
    def q_embb(self) -> int:
        return len(self.fifo[EMBB])

    @property
    def q_urllc(self) -> int:
        return len(self.fifo[URLLC])

    def state(self) -> tuple[int, int]:
        return self.q_embb, self.q_urllc

    def push(self, pkt: Packet) -> bool:
        if pkt.bits != self.packet_bits[pkt.slice]:
            raise ValueError("packet size is fixed per slice")
        q = self.fifo[pkt.slice]
        if len(q) >= self.capacity:
            self.blocked[pkt.slice] += 1
            return False
        q.append(pkt)
        return True

    def remove(self, pkts: Iterable[Packet]) -> None:
        gone = {id(p) for p in pkts}
        if not gone:
            return
        for sl in SLICES:
            q = self.fifo[sl]
            if any(id(p) in gone for p in q):
                self.fifo[sl] = deque(p for p in q if id(p) not in gone)

    def clear(self) -> None:
        for sl in SLICES:
            self.fifo[sl].clear()
            self.blocked[sl] = 0


class TrafficSource:
    """Arrival process for the served cell: Poisson eMBB, CBR+Poisson uRLLC."""

    def __init__(self, ues_by_slice: dict, rates_mbps: dict, packet_bits: dict,
                 tti_s: float, urllc_cbr_fraction: float = 0.2):
        self.ues = {k: np.asarray(v, dtype=int) for k, v in ues_by_slice.items()}
        self.rates = dict(rates_mbps)
        self.bits = dict(packet_bits)
        self.tti_s = tti_s
        self.cbr = {EMBB: 0.0, URLLC: urllc_cbr_fraction}
        self.credit = {EMBB: 0.0, URLLC: 0.0}

    def arrivals(self, t: int, rng: np.random.Generator) -> list[Packet]:
        out = []
        for sl in SLICES:
            if self.ues[sl].size == 0:
                continue
            n, self.credit[sl] = generate_traffic(self.rates[sl], self.bits[sl], self.tti_s, rng,
                                                  self.cbr[sl], self.credit[sl])
            if n:
                for u in rng.choice(self.ues[sl], size=n):
                    out.append(Packet(sl, int(u), self.bits[sl], t))
        return out


def bits_per_rb(sinr_lin, rb_bandwidth_mhz: float, tti_s: float, max_se: float = 8.0) -> np.ndarray:
    """Payload one RB carries in one TTI at the given SINR (capped spectral efficiency)."""
    se = np.minimum(np.log2(1.0 + np.asarray(sinr_lin, dtype=float)), max_se)
    return np.floor(se * rb_bandwidth_mhz * 1e6 * tti_s)


__all__ = [
    "EMBB", "URLLC", "SLICES", "GNB", "UE", "Topology", "RBGrid", "ChannelState", "Allocation",
    "DelayBreakdown", "TrafficQueue", "ObjectiveWeights", "Packet", "TrafficSource",
    "path_loss", "channel_gain", "gain_from_losses", "build_topology", "build_channel",
    "site_positions", "sinr", "sinr_jammed", "per_rb_sinr", "throughput", "shannon_mbps",
    "total_delay", "generate_traffic", "objective_reward", "check_constraints", "bits_per_rb",
    "db_to_linear", "linear_to_db", "dbm_to_mw", "mw_to_dbm",
]
