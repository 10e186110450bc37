"""Jammers: constant (CJA), random (RJA), DRL-driven (DRL-JA) and an FNN predictor.

All jammers share one interface: :meth:`Jammer.act` turns the TTI's
:class:`JammerObservation` into a :class:`JammerAction` (after paying for it
out of the energy ledger) and :meth:`Jammer.feedback` hands back what the
victim's SINR looked like afterwards.

Energy is booked in integer nanojoules so that
``initial == spent + remaining`` holds exactly.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .nn import FNN, LSTMNet, make_optimizer
from .netmodel import dbm_to_mw, mw_to_dbm

ATTACKS = ("none", "cja", "rja", "drlja", "fnn")

NJ_PER_MJ = 1_000_000


# --- sensing ---------------------------------------------------------------

def t_max(b_q_mhz: float) -> float:
    """Energy-detection reference level (dBm) for one RB bandwidth in MHz."""
    if not b_q_mhz > 0:
        raise ValueError("bandwidth must be positive")
    return 10.0 * math.log10(3.16228e-8 * b_q_mhz)


def detection_threshold(t_max_dbm: float, x_r_dbm: float) -> float:
    return min(t_max_dbm + 10.0, x_r_dbm)


def sense_slot(trace_dbm, e_theta_dbm: float, dt_us: float = 1.0,
               slot_us: float = 9.0, idle_us: float = 4.0) -> str:
    """Classify one sensing slot from its power samples."""
    tr = np.asarray(trace_dbm, dtype=float).ravel()
    if tr.size * dt_us < slot_us - 1e-9:
        raise ValueError(f"trace covers {tr.size * dt_us} us, slot needs {slot_us} us")
    n = int(round(slot_us / dt_us))
    below = np.count_nonzero(tr[:n] < e_theta_dbm) * dt_us
    return "idle" if below >= idle_us - 1e-9 else "busy"


@dataclass
class SensingReport:
    trace_mw: np.ndarray      # (rbs, samples)
    slot_busy: np.ndarray     # (rbs, slots)
    busy: np.ndarray          # (rbs,)
    e_theta_dbm: float
    dt_us: float = 1.0

    @property
    def n_slots(self) -> int:
        return self.slot_busy.shape[1]


def slots_per_tti(tti_us: float, slot_us: float = 9.0) -> int:
    return int(math.floor(tti_us / slot_us + 1e-9))


def sense_tti(rx_mw, e_theta_dbm: float, rng: np.random.Generator, *, noise_mw: float,
              tti_us: float = 142.9, slot_us: float = 9.0, dt_us: float = 1.0,
              idle_us: float = 4.0) -> SensingReport:
    """Energy detection over one TTI.

    Each 1 us sample is the received power times an Exp(1) fading draw plus
    Exp(1) noise.  A slot is busy unless at least ``idle_us`` of it sits below
    the threshold; an RB is busy when most of its slots are.
    """
    rx = np.asarray(rx_mw, dtype=float)
    n_slots = slots_per_tti(tti_us, slot_us)
    per_slot = int(round(slot_us / dt_us))
    shape = (rx.size, n_slots * per_slot)
    trace = rx[:, None] * rng.exponential(1.0, size=shape) + noise_mw * rng.exponential(1.0, size=shape)
    thr = float(dbm_to_mw(e_theta_dbm))
    below = (trace < thr).reshape(rx.size, n_slots, per_slot).sum(axis=2) * dt_us
    slot_busy = below < idle_us - 1e-9
    busy = slot_busy.sum(axis=1) * 2 > n_slots
    return SensingReport(trace, slot_busy, busy, e_theta_dbm, dt_us)


# --- context, actions, ledger ------------------------------------------------

@dataclass
class JammerContext:
    """What the attacker knows about itself: target, threshold, reward weights, energy."""

    target_gnb: int = 0
    e_theta: float = -65.0
    x_r: float = -52.0
    energy_budget: float = 500.0  # mJ, initial per phase
    omega1: float = 0.5
    omega2: float = 0.5
    gamma_j: float = 0.9
    q_net: object | None = None
    budget_nj: int = field(init=False)
    spent_nj: int = field(init=False, default=0)

    def __post_init__(self):
        if self.energy_budget < 0:
            raise ValueError("energy budget must be non-negative")
        self.budget_nj = int(round(self.energy_budget * NJ_PER_MJ))
        self.spent_nj = 0

    @classmethod
    def for_grid(cls, b_q_mhz: float, x_r: float = -52.0, **kw) -> "JammerContext":
        return cls(e_theta=detection_threshold(t_max(b_q_mhz), x_r), x_r=x_r, **kw)

    @property
    def remaining_nj(self) -> int:
        return self.budget_nj - self.spent_nj

    @property
    def remaining(self) -> float:
        return self.remaining_nj / NJ_PER_MJ

    @property
    def spent(self) -> float:
        return self.spent_nj / NJ_PER_MJ

    @property
    def fraction_left(self) -> float:
        return self.remaining_nj / self.budget_nj if self.budget_nj else 0.0

    def affordable(self, cost_nj: int) -> bool:
        return cost_nj <= self.remaining_nj

    def debit(self, cost_nj: int) -> None:
        if cost_nj < 0 or cost_nj > self.remaining_nj:
            raise ValueError("debit outside the remaining budget")
        self.spent_nj += cost_nj

    def reset_budget(self) -> None:
        self.spent_nj = 0


@dataclass
class JammerAction:
    powers_mw: np.ndarray
    duration_tti: int = 1
    energy_nj: int = 0

    @classmethod
    def empty(cls, n_rbs: int) -> "JammerAction":
        return cls(np.zeros(n_rbs))

    @property
    def jammed(self) -> np.ndarray:
        return self.powers_mw > 0

    @property
    def total_power(self) -> float:
        return float(self.powers_mw.sum())

    @property
    def energy_mj(self) -> float:
        return self.energy_nj / NJ_PER_MJ


def jam_energy_nj(powers_mw, duration_tti: int, tti_s: float) -> int:
    """Ẽ = P·T for the action, rounded up to whole nanojoules."""
    mj = float(np.sum(powers_mw)) * duration_tti * tti_s
    return int(math.ceil(mj * NJ_PER_MJ - 1e-6))


@dataclass
class JammerObservation:
    tti: int
    sensing: SensingReport
    legit_sinr: np.ndarray  # per RB of the target gNB, 0 where vacant


@dataclass
class JammerOutcome:
    allocated: np.ndarray
    sinr_before: np.ndarray
    sinr_after: np.ndarray


def cja_power(l_values, rb_count: int) -> float:
    """|sum of legit SINRs|^2 / number of RBs, in mW."""
    if rb_count <= 0:
        raise ValueError("rb_count must be positive")
    s = complex(np.sum(np.asarray(l_values)))
    return abs(s) ** 2 / rb_count


def drlja_reward(sinr_after: float, energy_spent: float, omega1: float = 0.5,
                 omega2: float = 0.5) -> float:
    """Higher for a weaker victim and a cheaper attack."""
    if energy_spent < 0:
        raise ValueError("energy must be non-negative")
    return -omega1 * sinr_after - omega2 * energy_spent


def drlja_state(sensing: SensingReport, ctx: JammerContext) -> np.ndarray:
    """Occupancy bits (1 = treated as allocated) followed by the budget fraction left."""
    return np.append(sensing.busy.astype(float), ctx.fraction_left)


def policy_value(P, R, policy, gamma: float) -> np.ndarray:
    """Exact Q^pi of a finite MDP.

    P is (S, A, S), R is (S, A) and policy is either (S, A) probabilities or
    an (S,) array of deterministic action indices.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    P = np.asarray(P, dtype=float)
    R = np.asarray(R, dtype=float)
    S, A = R.shape
    pi = np.asarray(policy)
    if pi.ndim == 1:
        pi = np.eye(A)[pi.astype(int)]
    M = np.einsum("ijk,kl->ijkl", P, pi).reshape(S * A, S * A)
    q = np.linalg.solve(np.eye(S * A) - gamma * M, R.ravel())
    return q.reshape(S, A)


def windows(n_rbs: int, width: int, count: int | None = None) -> np.ndarray:
    """Boolean masks of cyclic RB windows, one per start index."""
    count = n_rbs if count is None else count
    m = np.zeros((count, n_rbs), dtype=bool)
    for k in range(count):
        m[k, [(k + i) % n_rbs for i in range(width)]] = True
    return m


# --- jammers -----------------------------------------------------------------

class Jammer:
    kind = "none"

    def __init__(self, ctx: JammerContext, n_rbs: int, tti_s: float, rng: np.random.Generator,
                 max_power_dbm: float = 50.0):
        self.ctx = ctx
        self.n_rbs = n_rbs
        self.tti_s = tti_s
        self.rng = rng
        self.p_max = float(dbm_to_mw(max_power_dbm))

    def new_phase(self) -> None:
        self.ctx.reset_budget()

    def _pay(self, powers: np.ndarray) -> JammerAction:
        cost = jam_energy_nj(powers, 1, self.tti_s)
        if cost == 0 or not self.ctx.affordable(cost):
            return JammerAction.empty(self.n_rbs)
        self.ctx.debit(cost)
        return JammerAction(powers, 1, cost)

    def act(self, obs: JammerObservation) -> JammerAction:
        return JammerAction.empty(self.n_rbs)

    def feedback(self, outcome: JammerOutcome) -> None:
        pass


class NoJammer(Jammer):
    pass


class ConstantJammer(Jammer):
    """Watches the target for ``sense_ttis`` TTIs, then locks a window and a power forever."""

    kind = "cja"

    def __init__(self, *a, width: int = 4, sense_ttis: int = 20, **kw):
        super().__init__(*a, **kw)
        self.width = width
        self.sense_ttis = sense_ttis
        self.windows = windows(self.n_rbs, width)
        self.counts = np.zeros(self.n_rbs)
        self.l_sum = np.zeros(self.n_rbs)
        self.seen = 0
        self.window: np.ndarray | None = None
        self.power = 0.0

    def _observe(self, obs: JammerObservation) -> None:
        if self.window is not None:
            return
        self.counts += obs.sensing.busy
        self.l_sum += obs.legit_sinr
        self.seen += 1
        if self.seen >= self.sense_ttis:
            k = int(np.argmax(self.windows.astype(float) @ self.counts))
            self.window = self.windows[k]
            self.power = min(cja_power(self.l_sum / self.seen, self.n_rbs), self.p_max)

    @property
    def locked(self) -> bool:
        return self.window is not None

    def target_rbs(self) -> np.ndarray:
        return self.window

    def act(self, obs: JammerObservation) -> JammerAction:
        self._observe(obs)
        if self.window is None or self.power <= 0:
            return JammerAction.empty(self.n_rbs)
        return self._pay(np.where(self.target_rbs(), self.power, 0.0))


class RandomJammer(ConstantJammer):
    """CJA power on a random subset of RBs each TTI; the subset size is uniform over {0..n}.

    ``scope="grid"`` draws from every RB, ``scope="window"`` from the CJA window only.
    """

    kind = "rja"

    def __init__(self, *a, scope: str = "grid", **kw):
        super().__init__(*a, **kw)
        if scope not in ("grid", "window"):
            raise ValueError("scope must be 'grid' or 'window'")
        self.scope = scope

    def target_rbs(self) -> np.ndarray:
        idx = np.flatnonzero(self.window) if self.scope == "window" else np.arange(self.n_rbs)
        n = int(self.rng.integers(0, idx.size + 1))
        mask = np.zeros(self.n_rbs, dtype=bool)
        mask[self.rng.choice(idx, size=n, replace=False)] = True
        return mask


class DRLJammer(Jammer):
    """Reactive DQN jammer.

    Action 0 stays silent; action k >= 1 jams the estimated-busy RBs inside
    cyclic window k-1 at full power.  The Q-net is a stacked LSTM over the
    last ``seq_len`` sensed states.
    """

    kind = "drlja"

    def __init__(self, *a, width: int = 4, hidden: int = 20, layers: int = 1, seq_len: int = 2,
                 epsilon: float = 0.1, lr: float = 3e-3, optimizer: str = "adam",
                 replay: int = 2000, batch: int = 32, train_every: int = 2,
                 copy_every: int = 200, warmup: int = 64, reward_norm: str = "ratio",
                 init_scale: float = 0.1, **kw):
        super().__init__(*a, **kw)
        if reward_norm not in ("ratio", "minmax"):
            raise ValueError("reward_norm must be 'ratio' or 'minmax'")
        self.width = width
        self.windows = windows(self.n_rbs, width, self.n_rbs - 1)
        self.n_actions = self.windows.shape[0] + 1
        self.seq_len = seq_len
        self.epsilon = epsilon
        self.batch, self.train_every, self.copy_every, self.warmup = batch, train_every, copy_every, warmup
        self.reward_norm = reward_norm
        n_in = self.n_rbs + 1
        self.net = LSTMNet(n_in, hidden, self.n_actions, layers, self.rng, init_scale)
        self.ctx.q_net = self.net
        self.target = self.net.copy()
        self.opt = make_optimizer(optimizer, lr, 1.0)
        self.buf_s = np.zeros((replay, seq_len, n_in))
        self.buf_a = np.zeros(replay, dtype=int)
        self.buf_r = np.zeros(replay)
        self.buf_n = np.zeros((replay, seq_len, n_in))
        self.size = 0
        self.ptr = 0
        self.history: deque = deque(maxlen=seq_len)
        self.pending: tuple | None = None
        self.steps = 0
        self.l_min, self.l_max = math.inf, -math.inf
        self.last_reward = 0.0

    def _seq(self) -> np.ndarray:
        h = list(self.history)
        pad = [np.zeros_like(h[0])] * (self.seq_len - len(h))
        return np.array(pad + h)

    def q_values(self, seq: np.ndarray | None = None) -> np.ndarray:
        seq = self._seq() if seq is None else seq
        return self.net.forward(seq[None])[0]

    def plan(self, busy: np.ndarray, action: int) -> np.ndarray:
        if action == 0:
            return np.zeros(self.n_rbs, dtype=bool)
        return self.windows[action - 1] & busy

    def act(self, obs: JammerObservation) -> JammerAction:
        self.history.append(drlja_state(obs.sensing, self.ctx))
        seq = self._seq()
        if self.pending is not None:
            s, a, r = self.pending
            self._store(s, a, r, seq)
            self.pending = None
        if self.rng.random() < self.epsilon:
            a = int(self.rng.integers(self.n_actions))
        else:
            a = int(np.argmax(self.q_values(seq)))
        mask = self.plan(obs.sensing.busy, a)
        act = self._pay(np.where(mask, self.p_max, 0.0)) if mask.any() else JammerAction.empty(self.n_rbs)
        self._last = (seq, a, act)
        return act

    def _normalize(self, outcome: JammerOutcome, act: JammerAction) -> tuple[float, float]:
        e = act.jammed.sum() / self.width
        alloc = outcome.allocated
        if self.reward_norm == "ratio":
            before = outcome.sinr_before[alloc].sum()
            l = outcome.sinr_after[alloc].sum() / before if before > 0 else 1.0
            return l, e
        l_raw = float(outcome.sinr_after[alloc].mean()) if alloc.any() else 0.0
        self.l_min, self.l_max = min(self.l_min, l_raw), max(self.l_max, l_raw)
        span = self.l_max - self.l_min
        return ((l_raw - self.l_min) / span if span > 0 else 0.0), e

    def feedback(self, outcome: JammerOutcome) -> None:
        seq, a, act = self._last
        l, e = self._normalize(outcome, act)
        r = drlja_reward(l, e, self.ctx.omega1, self.ctx.omega2)
        self.last_reward = r
        self.pending = (seq, a, r)
        self.steps += 1
        if self.size >= max(self.warmup, self.batch) and self.steps % self.train_every == 0:
            self.train_step()
        if self.steps % self.copy_every == 0:
            self.target.load_params(self.net.params)

    def _store(self, s, a, r, n) -> None:
        i = self.ptr
        self.buf_s[i], self.buf_a[i], self.buf_r[i], self.buf_n[i] = s, a, r, n
        self.ptr = (i + 1) % self.buf_a.size
        self.size = min(self.size + 1, self.buf_a.size)

    def train_step(self) -> float:
        idx = self.rng.integers(0, self.size, size=self.batch)
        s, a, r, n = self.buf_s[idx], self.buf_a[idx], self.buf_r[idx], self.buf_n[idx]
        y = r + self.ctx.gamma_j * self.target.forward(n).max(axis=1)
        q, cache = self.net.forward(s, keep=True)
        rows = np.arange(self.batch)
        err = q[rows, a] - y
        dy = np.zeros_like(q)
        dy[rows, a] = 2.0 * err / self.batch
        self.opt.step(self.net.params, self.net.backward(dy, cache))
        return float(np.mean(err ** 2))


class FNNJammer(Jammer):
    """Predicts next TTI's allocation from the last ``history`` sensed maps and jams one RB."""

    kind = "fnn"

    def __init__(self, *a, history: int = 10, hidden: int = 50, lr: float = 0.5,
                 init_range: float = 1.0, **kw):
        super().__init__(*a, **kw)
        self.h = history
        self.net = FNN([history * self.n_rbs, hidden, hidden, self.n_rbs], init_range, self.rng)
        self.lr = lr
        self.hist: deque = deque(maxlen=history)

    def ready(self) -> bool:
        return len(self.hist) >= self.h

    def predict(self) -> int | None:
        if not self.ready():
            return None
        return int(np.argmax(self.net.forward(np.concatenate(self.hist))[0]))

    def learn(self, busy: np.ndarray) -> None:
        if self.ready() and busy.any():
            x = np.concatenate(self.hist)
            _, g = self.net.loss_and_grad(x, busy / busy.sum())
            for k, v in g.items():
                self.net.params[k] -= self.lr * v
        self.hist.append(busy.astype(float))

    def act(self, obs: JammerObservation) -> JammerAction:
        busy = obs.sensing.busy
        target = self.predict()
        self.learn(busy)
        if target is None or not busy[target]:
            return JammerAction.empty(self.n_rbs)
        p = np.zeros(self.n_rbs)
        p[target] = self.p_max
        return self._pay(p)


def fnn_jammer_step(jammer: FNNJammer, history) -> int | None:
    """Target RB predicted from the last 10 allocations, or None when history is short."""
    hist = list(history)
    if len(hist) < jammer.h:
        return None
    x = np.concatenate([np.asarray(h, dtype=float) for h in hist[-jammer.h:]])
    return int(np.argmax(jammer.net.forward(x)[0]))


def cja_step(jammer: ConstantJammer, obs: JammerObservation) -> JammerAction:
    return jammer.act(obs)


def rja_step(jammer: RandomJammer, obs: JammerObservation) -> JammerAction:
    return jammer.act(obs)


def drlja_step(jammer: DRLJammer, obs: JammerObservation) -> JammerAction:
    return jammer.act(obs)


def make_jammer(kind: str, ctx: JammerContext, n_rbs: int, tti_s: float,
                rng: np.random.Generator, **params) -> Jammer:
    kinds = {"none": NoJammer, "cja": ConstantJammer, "rja": RandomJammer,
             "drlja": DRLJammer, "fnn": FNNJammer}
    if kind not in kinds:
        raise ValueError(f"unknown attack {kind!r}; allowed: {sorted(kinds)}")
    return kinds[kind](ctx, n_rbs, tti_s, rng, **params)
