"""Defences: decoy transmissions picked by a DQN or an FNN, and suspend-learning.

The decoy defender energises vacant RBs at gNB power so an energy-detecting
jammer reads them as busy.  It acts after the slicing agent and before the
jammer senses, and it sees the jammer's emissions one TTI late.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .attacks import windows
from .nn import FNN, LSTMNet, make_optimizer

MITIGATIONS = ("none", "suspend", "decoy-DRL", "decoy-FNN")


@dataclass
class DefenderState:
    jammed: np.ndarray
    allocated: np.ndarray
    vacant: np.ndarray

    def __post_init__(self):
        if not (self.jammed.shape == self.allocated.shape == self.vacant.shape):
            raise ValueError("defender bit-vectors must have equal length")
        if np.any(self.allocated & self.vacant):
            raise ValueError("an RB cannot be both allocated and vacant")

    def vector(self) -> np.ndarray:
        return np.concatenate([self.jammed, self.allocated]).astype(float)


def defender_state(allocated, observed_attack) -> DefenderState:
    """Bit-vectors for this TTI; ``observed_attack`` is last TTI's jammed set."""
    alloc = np.asarray(allocated, dtype=bool)
    jam = np.asarray(observed_attack, dtype=bool)
    return DefenderState(jam.copy(), alloc.copy(), ~alloc)


@dataclass
class DecoyPlan:
    rbs: np.ndarray                       # bool mask, the set B
    samples: dict = field(default_factory=dict)   # rb -> xi[n]
    powers_mw: np.ndarray | None = None

    def __post_init__(self):
        self.rbs = np.asarray(self.rbs, dtype=bool)
        if self.powers_mw is None:
            self.powers_mw = np.zeros(self.rbs.size)
            for r, xi in self.samples.items():
                self.powers_mw[r] = avg_signal_power(xi)
        if np.any(self.powers_mw < 0):
            raise ValueError("decoy powers must be non-negative")

    @classmethod
    def empty(cls, n_rbs: int) -> "DecoyPlan":
        return cls(np.zeros(n_rbs, dtype=bool))

    @classmethod
    def at_power(cls, mask, power_mw: float, n_samples: int = 16) -> "DecoyPlan":
        """Constant-envelope decoys whose mean |xi|^2 is the requested power."""
        mask = np.asarray(mask, dtype=bool)
        amp = math.sqrt(power_mw)
        samples = {int(r): np.full(n_samples, amp) for r in np.flatnonzero(mask)}
        return cls(mask, samples)


def avg_signal_power(samples) -> float:
    xi = np.asarray(samples)
    if xi.size == 0:
        raise ValueError("no samples")
    return float(np.mean(np.abs(xi) ** 2))


def decoy_power_total(plan: DecoyPlan) -> float:
    return float(sum(plan.powers_mw[r] for r in np.flatnonzero(plan.rbs)))


def mitigation_reward(sinr_after, allocated=None) -> float:
    """Mean linear SINR over the allocated RBs (0 when nothing is allocated)."""
    s = np.asarray(sinr_after, dtype=float)
    if allocated is not None:
        s = s[np.asarray(allocated, dtype=bool)]
    return float(s.mean()) if s.size else 0.0


def decoy_patterns(n_rbs: int, width: int = 4, n_patterns: int = 13) -> np.ndarray:
    """Pattern 0 is silence, 1 is every vacant RB, the rest are cyclic windows."""
    w = windows(n_rbs, width, n_patterns - 2)
    return np.vstack([np.zeros(n_rbs, bool), np.ones(n_rbs, bool), w])


class Defender:
    kind = "none"

    def __init__(self, n_rbs: int, power_mw: float, rng: np.random.Generator,
                 width: int = 4, n_patterns: int = 13):
        self.n_rbs = n_rbs
        self.power = power_mw
        self.rng = rng
        self.patterns = decoy_patterns(n_rbs, width, n_patterns)
        self.width = width
        self.last_pattern = 0

    def plan_for(self, state: DefenderState, pattern: int) -> DecoyPlan:
        mask = self.patterns[pattern] & state.vacant
        if not mask.any():
            return DecoyPlan.empty(self.n_rbs)
        return DecoyPlan.at_power(mask, self.power)

    def act(self, state: DefenderState) -> DecoyPlan:
        return DecoyPlan.empty(self.n_rbs)

    def feedback(self, reward: float, jammed: np.ndarray) -> None:
        pass


class NoDefender(Defender):
    pass


class DRLDefender(Defender):
    """DQN over decoy patterns; its regression target is the chi-weighted Bellman step."""

    kind = "decoy-DRL"

    def __init__(self, *a, chi: float = 0.5, gamma: float = 0.9, epsilon: float = 0.1,
                 hidden: int = 20, seq_len: int = 1, lr: float = 3e-3, optimizer: str = "adam",
                 replay: int = 2000, batch: int = 32, train_every: int = 2,
                 copy_every: int = 200, warmup: int = 64, **kw):
        super().__init__(*a, **kw)
        self.chi, self.gamma, self.epsilon = chi, gamma, epsilon
        n_in = 2 * self.n_rbs
        self.net = LSTMNet(n_in, hidden, self.patterns.shape[0], 1, self.rng, 0.1)
        self.target = self.net.copy()
        self.opt = make_optimizer(optimizer, lr, 1.0)
        self.seq_len = seq_len
        self.history: deque = deque(maxlen=seq_len)
        self.batch, self.train_every, self.copy_every, self.warmup = batch, train_every, copy_every, warmup
        self.buf_s = np.zeros((replay, seq_len, n_in))
        self.buf_a = np.zeros(replay, dtype=int)
        self.buf_r = np.zeros(replay)
        self.buf_n = np.zeros((replay, seq_len, n_in))
        self.size = self.ptr = self.steps = 0
        self.pending: tuple | None = None
        self.n_r, self.mu_r, self.m2_r = 0, 0.0, 0.0

    def _seq(self) -> np.ndarray:
        h = list(self.history)
        return np.array([np.zeros_like(h[0])] * (self.seq_len - len(h)) + h)

    def q_values(self, seq=None) -> np.ndarray:
        seq = self._seq() if seq is None else seq
        return self.net.forward(seq[None])[0]

    def act(self, state: DefenderState) -> DecoyPlan:
        self.history.append(state.vector())
        seq = self._seq()
        if self.pending is not None:
            s, a, r = self.pending
            self._store(s, a, r, seq)
            self.pending = None
        if self.rng.random() < self.epsilon:
            a = int(self.rng.integers(self.patterns.shape[0]))
        else:
            a = int(np.argmax(self.q_values(seq)))
        self._last = (seq, a)
        self.last_pattern = a
        return self.plan_for(state, a)

    def feedback(self, reward: float, jammed: np.ndarray) -> None:
        seq, a = self._last
        # Linear SINR is heavy-tailed; standardize with running moments.
        self.n_r += 1
        d = reward - self.mu_r
        self.mu_r += d / self.n_r
        self.m2_r += d * (reward - self.mu_r)
        sd = math.sqrt(self.m2_r / self.n_r) if self.n_r > 1 else 0.0
        r = (reward - self.mu_r) / sd if sd > 0 else 0.0
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
        q, cache = self.net.forward(s, keep=True)
        rows = np.arange(self.batch)
        q_sa = q[rows, a]
        y = q_sa + self.chi * (r + self.gamma * self.target.forward(n).max(axis=1) - q_sa)
        err = q_sa - y
        dy = np.zeros_like(q)
        dy[rows, a] = 2.0 * err / self.batch
        self.opt.step(self.net.params, self.net.backward(dy, cache))
        return float(np.mean(err ** 2))


class FNNDefender(Defender):
    """Guesses the jammer's next window from recent defender states."""

    kind = "decoy-FNN"

    def __init__(self, *a, history: int = 4, hidden: int = 60, init_range: float = 4.0,
                 lr: float = 0.1, **kw):
        super().__init__(*a, **kw)
        self.h = history
        self.net = FNN([history * 2 * self.n_rbs, hidden, hidden, self.patterns.shape[0]],
                       init_range, self.rng)
        self.lr = lr
        self.hist: deque = deque(maxlen=history)

    def label(self, jammed: np.ndarray) -> int | None:
        """Window pattern that best covers the jammed RBs (centre-closest on ties)."""
        if not jammed.any():
            return None
        win = self.patterns[2:]
        overlap = win.astype(int) @ jammed.astype(int)
        best = np.flatnonzero(overlap == overlap.max())
        centre = np.mean(np.flatnonzero(jammed))
        starts = best.astype(float)
        mids = starts + (self.width - 1) / 2.0
        return int(best[np.argmin(np.abs(mids - centre))]) + 2

    def _x(self) -> np.ndarray | None:
        if len(self.hist) < self.h:
            return None
        return np.concatenate(list(self.hist))

    def probs(self) -> np.ndarray | None:
        x = self._x()
        return None if x is None else self.net.forward(x)[0]

    def act(self, state: DefenderState) -> DecoyPlan:
        # Newest jammed bits label the previous history window.
        x = self._x()
        y = self.label(state.jammed)
        if x is not None and y is not None:
            t = np.zeros(self.patterns.shape[0])
            t[y] = 1.0
            _, g = self.net.loss_and_grad(x, t)
            for k, v in g.items():
                self.net.params[k] -= self.lr * v
        self.hist.append(state.vector())
        p = self.probs()
        a = 0 if p is None else int(np.argmax(p))
        self.last_pattern = a
        return self.plan_for(state, a)


def decoy_step(defender: Defender, state: DefenderState) -> DecoyPlan:
    return defender.act(state)


def fnn_defender_step(defender: FNNDefender, state: DefenderState) -> DecoyPlan:
    return defender.act(state)


def make_defender(kind: str, n_rbs: int, power_mw: float, rng: np.random.Generator,
                  **params) -> Defender:
    kinds = {"none": NoDefender, "suspend": NoDefender, "decoy-DRL": DRLDefender,
             "decoy-FNN": FNNDefender}
    if kind not in kinds:
        raise ValueError(f"unknown mitigation {kind!r}; allowed: {sorted(kinds)}")
    return kinds[kind](n_rbs, power_mw, rng, **params)


# --- suspend-learning baseline ---------------------------------------------------

@dataclass(frozen=True)
class KnowledgeRepository:
    power_mw: float
    sinr: float

    def __post_init__(self):
        if not (math.isfinite(self.power_mw) and math.isfinite(self.sinr)):
            raise ValueError("repository entries must be finite")


@dataclass(frozen=True)
class SuspendDecision:
    flagged: bool
    action: tuple | None = None


def suspend_learning_step(repo: KnowledgeRepository | None, observed: tuple[float, float],
                          agent=None, guard_band: float = 0.05) -> SuspendDecision:
    """Flag an attack when power rises and SINR drops past the guard band."""
    if repo is None:
        raise ValueError("suspend-learning needs a knowledge repository")
    power, sinr = observed
    flagged = power > repo.power_mw * (1 + guard_band) and sinr < repo.sinr * (1 - guard_band)
    action = None
    if flagged and agent is not None and agent.action is not None:
        action = agent.current()
    return SuspendDecision(bool(flagged), action)


def build_knowledge_repo(runner: Callable[[int], tuple[float, float, float]],
                         seeds: Sequence[int], keep: int = 5) -> KnowledgeRepository:
    """Run no-attack monitors and average the central ``keep`` runs by reward.

    ``runner(seed)`` returns (mean power mW, mean SINR, mean reward).
    """
    seeds = list(seeds)
    if len(seeds) < 10:
        raise ValueError("the knowledge repository needs at least 10 monitoring runs")
    rows = [runner(s) for s in seeds]
    order = sorted(range(len(rows)), key=lambda i: (rows[i][2], i))
    lo = (len(rows) - keep) // 2
    mid = [rows[i] for i in order[lo:lo + keep]]
    return KnowledgeRepository(float(np.mean([m[0] for m in mid])), float(np.mean([m[1] for m in mid])))
