"""Small numpy networks: a stacked LSTM Q-net and a sigmoid/softmax FNN.

Both keep their weights in an ordered dict of float64 arrays so they can be
flattened for gradient checks and dumped to the text checkpoint format.
"""
from __future__ import annotations

import copy
from pathlib import Path

import numpy as np


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class LSTMNet:
    """Stacked LSTM; the readout sees the last hidden state of every layer.

    Gate order inside each ``W{l}`` block is input, forget, output, cell.
    ``W{l}`` has shape (in + hidden, 4*hidden) and acts on [x_t, h_{t-1}].
    """

    def __init__(self, n_in: int, n_hidden: int, n_out: int, n_layers: int = 1,
                 rng: np.random.Generator | None = None, init_scale: float = 0.1,
                 forget_bias: float = 0.0):
        if min(n_in, n_hidden, n_out, n_layers) <= 0:
            raise ValueError("network sizes must be positive")
        self.n_in, self.n_hidden, self.n_out, self.n_layers = n_in, n_hidden, n_out, n_layers
        rng = rng if rng is not None else np.random.default_rng(0)
        H = n_hidden
        self.params: dict[str, np.ndarray] = {}
        for l in range(n_layers):
            d = n_in if l == 0 else H
            self.params[f"W{l}"] = rng.uniform(-init_scale, init_scale, size=(d + H, 4 * H))
            b = rng.uniform(-init_scale, init_scale, size=4 * H)
            b[H:2 * H] += forget_bias
            self.params[f"b{l}"] = b
        self.params["Wy"] = rng.uniform(-init_scale, init_scale, size=(n_layers * H, n_out))
        self.params["by"] = rng.uniform(-init_scale, init_scale, size=n_out)

    def copy(self) -> "LSTMNet":
        return copy.deepcopy(self)

    def load_params(self, other: dict) -> None:
        for k, v in other.items():
            self.params[k][...] = v

    def forward(self, x: np.ndarray, keep: bool = False):
        """x is (batch, time, n_in) or (time, n_in); returns (batch, n_out)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[2] != self.n_in or x.shape[1] == 0:
            raise ValueError(f"expected input (batch, time>0, {self.n_in}), got {x.shape}")
        B, T, _ = x.shape
        H = self.n_hidden
        seq = x
        finals = []
        caches = []
        for l in range(self.n_layers):
            W, b = self.params[f"W{l}"], self.params[f"b{l}"]
            h = np.zeros((B, H))
            c = np.zeros((B, H))
            hs = np.empty((B, T, H))
            steps = []
            for t in range(T):
                xh = np.concatenate([seq[:, t], h], axis=1)
                z = xh @ W + b
                i = sigmoid(z[:, :H])
                f = sigmoid(z[:, H:2 * H])
                o = sigmoid(z[:, 2 * H:3 * H])
                g = np.tanh(z[:, 3 * H:])
                c_prev = c
                c = f * c_prev + i * g
                tc = np.tanh(c)
                h = o * tc
                hs[:, t] = h
                if keep:
                    steps.append((xh, c_prev, i, f, o, g, tc))
            finals.append(h)
            caches.append(steps)
            seq = hs
        hcat = np.concatenate(finals, axis=1)
        y = hcat @ self.params["Wy"] + self.params["by"]
        if keep:
            return y, (caches, hcat, x.shape)
        return y

    def backward(self, dy: np.ndarray, cache) -> dict[str, np.ndarray]:
        caches, hcat, (B, T, _) = cache
        H = self.n_hidden
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        grads["Wy"] = hcat.T @ dy
        grads["by"] = dy.sum(axis=0)
        dhcat = dy @ self.params["Wy"].T
        d_above = None
        for l in reversed(range(self.n_layers)):
            W = self.params[f"W{l}"]
            d_in = self.n_in if l == 0 else H
            dh_seq = np.zeros((B, T, H)) if d_above is None else d_above
            dh_seq[:, -1] += dhcat[:, l * H:(l + 1) * H]
            dx_seq = np.zeros((B, T, d_in))
            dh_next = np.zeros((B, H))
            dc_next = np.zeros((B, H))
            gW, gb = grads[f"W{l}"], grads[f"b{l}"]
            for t in reversed(range(T)):
                xh, c_prev, i, f, o, g, tc = caches[l][t]
                dh = dh_seq[:, t] + dh_next
                do = dh * tc
                dc = dc_next + dh * o * (1.0 - tc * tc)
                di = dc * g
                dg = dc * i
                df = dc * c_prev
                dc_next = dc * f
                dz = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                                     do * o * (1 - o), dg * (1 - g * g)], axis=1)
                gW += xh.T @ dz
                gb += dz.sum(axis=0)
                dxh = dz @ W.T
                dx_seq[:, t] = dxh[:, :d_in]
                dh_next = dxh[:, d_in:]
            d_above = dx_seq
        return grads


class FNN:
    """Sigmoid hidden layers, softmax output, cross-entropy loss."""

    def __init__(self, sizes: list[int], init_range: float = 1.0,
                 rng: np.random.Generator | None = None):
        if len(sizes) < 2 or min(sizes) <= 0:
            raise ValueError("need at least input and output sizes")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.sizes = list(sizes)
        self.params: dict[str, np.ndarray] = {}
        for k in range(len(sizes) - 1):
            self.params[f"W{k}"] = rng.uniform(-init_range, init_range, size=(sizes[k], sizes[k + 1]))
            self.params[f"b{k}"] = rng.uniform(-init_range, init_range, size=sizes[k + 1])

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def copy(self) -> "FNN":
        return copy.deepcopy(self)

    def forward(self, x: np.ndarray, keep: bool = False):
        a = np.atleast_2d(np.asarray(x, dtype=float))
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"expected {self.sizes[0]} inputs, got {a.shape[1]}")
        acts = [a]
        for k in range(self.n_layers):
            z = a @ self.params[f"W{k}"] + self.params[f"b{k}"]
            a = softmax(z) if k == self.n_layers - 1 else sigmoid(z)
            acts.append(a)
        return (a, acts) if keep else a

    def loss_and_grad(self, x, target) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy against target distributions (rows sum to 1)."""
        p, acts = self.forward(x, keep=True)
        t = np.atleast_2d(np.asarray(target, dtype=float))
        n = p.shape[0]
        loss = float(-(t * np.log(np.clip(p, 1e-300, None))).sum() / n)
        grads = {}
        delta = (p * t.sum(axis=1, keepdims=True) - t) / n
        for k in reversed(range(self.n_layers)):
            grads[f"W{k}"] = acts[k].T @ delta
            grads[f"b{k}"] = delta.sum(axis=0)
            if k:
                a = acts[k]
                delta = (delta @ self.params[f"W{k}"].T) * a * (1 - a)
        return loss, grads

    def loss(self, x, target) -> float:
        p = self.forward(x)
        t = np.atleast_2d(np.asarray(target, dtype=float))
        return float(-(t * np.log(np.clip(p, 1e-300, None))).sum() / p.shape[0])


# --- optimizers ------------------------------------------------------------

def clip_by_global_norm(grads: dict, max_norm: float | None) -> float:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm is not None and norm > max_norm > 0:
        s = max_norm / norm
        for g in grads.values():
            g *= s
    return norm


class SGD:
    def __init__(self, lr: float = 0.01, clip: float | None = 1.0):
        self.lr, self.clip = lr, clip

    def step(self, params: dict, grads: dict) -> None:
        clip_by_global_norm(grads, self.clip)
        for k, g in grads.items():
            params[k] -= self.lr * g


class Adam:
    def __init__(self, lr: float = 1e-3, clip: float | None = 1.0,
                 b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.clip, self.b1, self.b2, self.eps = lr, clip, b1, b2, eps
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        clip_by_global_norm(grads, self.clip)
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name: str, lr: float, clip: float | None):
    if name == "sgd":
        return SGD(lr, clip)
    if name == "adam":
        return Adam(lr, clip)
    raise ValueError(f"unknown optimizer {name!r}")


# --- checkpoints -----------------------------------------------------------

MAGIC = "# slicejam-weights v1"


def save_weights(path, params: dict) -> None:
    """Text dump: one ``tensor <name> <ndim> <dims...>`` header per array, values on the next line."""
    lines = [MAGIC]
    for name, arr in params.items():
        a = np.asarray(arr, dtype=float)
        lines.append(f"tensor {name} {a.ndim} " + " ".join(str(s) for s in a.shape))
        lines.append(" ".join(repr(float(v)) for v in a.ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_weights(path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{path}: not a weight checkpoint")
    out = {}
    it = iter(lines[1:])
    for header in it:
        parts = header.split()
        if len(parts) < 3 or parts[0] != "tensor":
            raise ValueError(f"{path}: bad header {header!r}")
        name, ndim = parts[1], int(parts[2])
        shape = tuple(int(s) for s in parts[3:3 + ndim])
        body = next(it, "")
        vals = np.array([float(v) for v in body.split()], dtype=float)
        if vals.size != int(np.prod(shape)):
            raise ValueError(f"{path}: tensor {name} has {vals.size} values for shape {shape}")
        out[name] = vals.reshape(shape)
    return out
