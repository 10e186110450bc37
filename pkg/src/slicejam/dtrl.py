"""Expert and learner slicing agents.

A Q table over the (q_eMBB, q_uRLLC) queue state does the bookkeeping; in
``lstm`` mode a small LSTM (trained DQN style from a replay ring) fills in
values for state/action pairs the table has never seen.  The learner starts
from a read-only snapshot of the expert's table through a :class:`TransferMap`.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .nn import LSTMNet, SGD, load_weights, save_weights


class Experience(NamedTuple):
    s_t: tuple
    a_t: int
    r_t1: float
    s_t1: tuple


def q_update_expert(q_old: float, r: float, max_next: float, alpha: float, gamma: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return (1.0 - alpha) * q_old + alpha * (r + gamma * max_next)


def q_update_learner(q_mapped: float, q_old: float, r: float, max_next: float,
                     alpha: float, gamma: float) -> float:
    """Transfer update with the mapped expert value added on top."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return q_mapped + q_old + alpha * (r + gamma * max_next - q_old)


def epsilon_greedy(q_values, epsilon: float, rng: np.random.Generator) -> int:
    q = np.asarray(q_values, dtype=float).ravel()
    if q.size == 0:
        raise ValueError("empty action set")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


class ReplayBuffer:
    """Fixed-capacity ring of experiences."""

    def __init__(self, capacity: int = 60):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.items: deque = deque(maxlen=capacity)

    def __len__(self):
        return len(self.items)

    def push(self, exp) -> None:
        self.items.append(exp)

    def sample(self, n: int, rng: np.random.Generator) -> list:
        idx = rng.choice(len(self.items), size=n, replace=False)
        return [self.items[i] for i in idx]


@dataclass(frozen=True)
class ActionSpace:
    """Enumerated slice quotas.

    Expert actions are radio splits (r_eMBB, r_uRLLC); learner actions add the
    compute split (c_eMBB, c_uRLLC) paired with the same radio level.
    """

    actions: tuple
    n_rbs: int
    compute_hz: float | None = None

    @classmethod
    def expert(cls, n_rbs: int = 13) -> "ActionSpace":
        return cls(tuple((n_rbs - k, k) for k in range(n_rbs)), n_rbs)

    @classmethod
    def learner(cls, n_rbs: int = 13, compute_hz: float = 1e9) -> "ActionSpace":
        acts = []
        for k in range(n_rbs):
            c_u = compute_hz * (k + 1) / (n_rbs + 1)
            acts.append((n_rbs - k, k, compute_hz - c_u, c_u))
        return cls(tuple(acts), n_rbs, compute_hz)

    def __len__(self):
        return len(self.actions)

    def index(self, action: tuple) -> int:
        return self.actions.index(tuple(action))

    def is_feasible(self, action: tuple) -> bool:
        r_e, r_u = action[0], action[1]
        ok = r_e >= 0 and r_u >= 0 and r_e + r_u <= self.n_rbs
        if len(action) == 4:
            ok = ok and min(action[2], action[3]) >= 0 and \
                action[2] + action[3] <= (self.compute_hz or 0) * (1 + 1e-12)
        return ok


def encode_state(state: Sequence[int], q_max: int = 100) -> float:
    """(q_e, q_u) packed into one scalar in [0, 1]."""
    q_e = min(int(state[0]), q_max)
    q_u = min(int(state[1]), q_max)
    return (q_e * (q_max + 1) + q_u) / ((q_max + 1) ** 2 - 1)


class QApproximator:
    """Q table plus (in ``lstm`` mode) an online/target LSTM pair and replay ring."""

    def __init__(self, n_actions: int = 13, mode: str = "lstm", *, q_max: int = 100,
                 hidden: int = 20, replay_capacity: int = 60, minibatch: int = 20,
                 train_interval: int = 60, copy_interval: int = 120, alpha: float = 0.5,
                 gamma: float = 0.9, epsilon: float = 0.1, lr: float = 0.01, clip: float = 1.0,
                 init_scale: float = 0.1, rng: np.random.Generator | None = None):
        if mode not in ("table", "lstm"):
            raise ValueError(f"mode must be 'table' or 'lstm', got {mode!r}")
        if not 10 <= hidden <= 40 and mode == "lstm":
            raise ValueError("hidden units must lie in [10, 40]")
        self.mode = mode
        self.n_actions = n_actions
        self.q_max = q_max
        self.alpha, self.gamma, self.epsilon = alpha, gamma, epsilon
        self.minibatch, self.train_interval, self.copy_interval = minibatch, train_interval, copy_interval
        n_states = (q_max + 1) ** 2
        self.table = np.zeros((n_states, n_actions))
        self.visited = np.zeros((n_states, n_actions), dtype=bool)
        self.replay = ReplayBuffer(replay_capacity)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.net = LSTMNet(1, hidden, n_actions, 1, rng, init_scale)
        self.target = self.net.copy()
        self.opt = SGD(lr, clip)
        self._cache: dict[int, np.ndarray] = {}

    def sidx(self, state) -> int:
        return min(int(state[0]), self.q_max) * (self.q_max + 1) + min(int(state[1]), self.q_max)

    def predict(self, state, target: bool = False) -> np.ndarray:
        """LSTM estimate for one state (cached between weight changes)."""
        s = self.sidx(state)
        if not target and s in self._cache:
            return self._cache[s]
        net = self.target if target else self.net
        q = lstm_forward(net, [state], self.q_max)
        if not target:
            self._cache[s] = q
        return q

    def values(self, state, prior: np.ndarray | None = None) -> np.ndarray:
        """Table entries where visited, ``prior`` (or the LSTM / zero) elsewhere."""
        s = self.sidx(state)
        seen = self.visited[s]
        if seen.all():
            return self.table[s]
        if prior is None:
            prior = self.predict(state) if self.mode == "lstm" else np.zeros(self.n_actions)
        return np.where(seen, self.table[s], prior)

    def sync_target(self) -> None:
        self.target.load_params(self.net.params)

    def train(self, rng: np.random.Generator) -> float | None:
        if self.mode != "lstm":
            return None
        if len(self.replay) < self.minibatch:
            return None
        loss = lstm_train(self, self.replay.sample(self.minibatch, rng))
        self._cache.clear()
        return loss


def _encode_batch(states, q_max: int) -> np.ndarray:
    return np.array([[[encode_state(s, q_max)]] for s in states])


def lstm_forward(net: LSTMNet, state_sequence, q_max: int = 100) -> np.ndarray:
    """Q values for the last state of a (q_e, q_u) sequence."""
    seq = list(state_sequence)
    if not seq:
        raise ValueError("state sequence must be non-empty")
    if net.n_in != 1:
        raise ValueError("network input size must be 1")
    x = np.array([[encode_state(s, q_max)] for s in seq])[None]
    return net.forward(x)[0]


def lstm_train(approx: QApproximator, batch: Sequence[Experience]) -> float:
    """One gradient step on the squared TD error; returns the pre-step mean loss."""
    if len(batch) == 0:
        raise ValueError("empty minibatch")
    xs = _encode_batch([e.s_t for e in batch], approx.q_max)
    xn = _encode_batch([e.s_t1 for e in batch], approx.q_max)
    a = np.array([e.a_t for e in batch])
    r = np.array([e.r_t1 for e in batch], dtype=float)
    y_next = approx.target.forward(xn).max(axis=1)
    target = r + approx.gamma * y_next
    q, cache = approx.net.forward(xs, keep=True)
    rows = np.arange(len(batch))
    err = q[rows, a] - target
    loss = float(np.mean(err ** 2))
    dy = np.zeros_like(q)
    dy[rows, a] = 2.0 * err / len(batch)
    grads = approx.net.backward(dy, cache)
    approx.opt.step(approx.net.params, grads)
    return loss


@dataclass
class TransferMap:
    """F (state) and F' (action) plus a frozen copy of the expert's Q."""

    expert_table: np.ndarray
    expert_visited: np.ndarray
    expert_space: ActionSpace
    learner_space: ActionSpace
    q_max: int = 100
    state_map: Callable = field(default=lambda s: tuple(s))

    def __post_init__(self):
        self.expert_table = np.array(self.expert_table, dtype=float)
        self.expert_visited = np.array(self.expert_visited, dtype=bool)
        self.expert_table.flags.writeable = False
        self.expert_visited.flags.writeable = False
        self._amap = np.array([self.expert_space.index(map_action(a))
                               for a in self.learner_space.actions])

    @property
    def expert_q(self) -> np.ndarray:
        return self.expert_table

    def sidx(self, state) -> int:
        s = map_state(self.state_map, state)
        return min(int(s[0]), self.q_max) * (self.q_max + 1) + min(int(s[1]), self.q_max)

    def q_mapped(self, state, learner_action: int) -> float:
        return float(self.expert_table[self.sidx(state), self._amap[learner_action]])

    def row(self, state) -> tuple[np.ndarray, np.ndarray]:
        s = self.sidx(state)
        return self.expert_table[s, self._amap], self.expert_visited[s, self._amap]

    @classmethod
    def empty(cls, expert_space: ActionSpace, learner_space: ActionSpace, q_max: int = 100):
        n = (q_max + 1) ** 2
        return cls(np.zeros((n, len(expert_space))), np.zeros((n, len(expert_space)), bool),
                   expert_space, learner_space, q_max)


def map_state(F: Callable, learner_state) -> tuple:
    return tuple(F(learner_state))


def map_action(learner_action: tuple) -> tuple:
    """F': drop the compute split."""
    return tuple(learner_action[:2])


class SlicingAgent:
    """Tabular Q-learning agent that picks one slice split per TTI.

    Call :meth:`reset` with the initial state to get the first action, then
    :func:`agent_step` after every TTI.
    """

    def __init__(self, space: ActionSpace, approx: QApproximator, rng: np.random.Generator,
                 transfer: TransferMap | None = None):
        if len(space) != approx.n_actions:
            raise ValueError("Q output width must equal the action count")
        self.space = space
        self.q = approx
        self.rng = rng
        self.transfer = transfer
        self.steps = 0
        self.state: tuple | None = None
        self.action: int | None = None
        self.actions_taken: list[int] = []

    @property
    def is_learner(self) -> bool:
        return self.transfer is not None

    def q_values(self, state) -> np.ndarray:
        prior = None
        if self.transfer is not None:
            t_vals, t_seen = self.transfer.row(state)
            if t_seen.any() or self.q.mode == "table":
                prior = t_vals
            else:
                prior = self.q.predict(state)
        return self.q.values(state, prior)

    def select(self, state) -> int:
        return epsilon_greedy(self.q_values(state), self.q.epsilon, self.rng)

    def reset(self, state) -> tuple:
        self.state = tuple(state)
        self.action = self.select(self.state)
        self.actions_taken.append(self.action)
        return self.space.actions[self.action]

    def update(self, s, a: int, r: float, s_next) -> float:
        q = self.q
        i = q.sidx(s)
        max_next = float(np.max(self.q_values(s_next)))
        if self.transfer is not None and not q.visited[i, a]:
            new = q_update_learner(self.transfer.q_mapped(s, a), q.table[i, a], r, max_next,
                                   q.alpha, q.gamma)
        else:
            new = q_update_expert(q.table[i, a], r, max_next, q.alpha, q.gamma)
        q.table[i, a] = new
        q.visited[i, a] = True
        return new

    def current(self) -> tuple:
        return self.space.actions[self.action]


def agent_step(agent: SlicingAgent, observation, reward: float, learn: bool = True) -> tuple:
    """Close the running transition with ``reward`` and pick the next split.

    ``observation`` is a TrafficQueue (or anything with ``state()``), or a raw
    (q_e, q_u) pair.  With ``learn=False`` nothing is recorded or updated and
    the previous action is repeated.
    """
    s_next = tuple(observation.state()) if hasattr(observation, "state") else tuple(observation)
    if agent.action is None:
        return agent.reset(s_next)
    if not learn:
        agent.state = s_next
        agent.actions_taken.append(agent.action)
        return agent.current()
    q = agent.q
    agent.update(agent.state, agent.action, reward, s_next)
    q.replay.push(Experience(agent.state, agent.action, float(reward), s_next))
    agent.steps += 1
    if q.mode == "lstm":
        if agent.steps % q.train_interval == 0:
            q.train(agent.rng)
        if agent.steps % q.copy_interval == 0:
            q.sync_target()
    agent.state = s_next
    agent.action = agent.select(s_next)
    agent.actions_taken.append(agent.action)
    return agent.current()


def save_checkpoint(path, approx: QApproximator) -> None:
    tensors = {f"online.{k}": v for k, v in approx.net.params.items()}
    tensors.update({f"target.{k}": v for k, v in approx.target.params.items()})
    tensors["table"] = approx.table
    tensors["visited"] = approx.visited.astype(float)
    save_weights(path, tensors)


def load_checkpoint(path, approx: QApproximator) -> None:
    t = load_weights(path)
    approx.net.load_params({k[7:]: v for k, v in t.items() if k.startswith("online.")})
    approx.target.load_params({k[7:]: v for k, v in t.items() if k.startswith("target.")})
    approx.table[...] = t["table"]
    approx.visited[...] = t["visited"] > 0.5
    approx._cache.clear()
