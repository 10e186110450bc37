import numpy as np
import pytest

from helpers import finite_difference_check
from slicejam import nn


def lstm_loss_setup(layers, seed=0, T=3, B=4, n_in=2, H=3, n_out=5):
    rng = np.random.default_rng(seed)
    net = nn.LSTMNet(n_in, H, n_out, layers, rng, init_scale=0.5)
    x = rng.normal(size=(B, T, n_in))
    proj = rng.normal(size=(B, n_out))

    def loss():
        return float((net.forward(x) * proj).sum())

    y, cache = net.forward(x, keep=True)
    grads = net.backward(proj, cache)
    return net, loss, grads, rng


@pytest.mark.parametrize("layers", [1, 2, 3])
def test_lstm_gradients(layers):
    net, loss, grads, rng = lstm_loss_setup(layers)
    assert finite_difference_check(net.params, loss, grads, rng, n_coords=10) < 1e-4


def test_fnn_gradients():
    rng = np.random.default_rng(1)
    net = nn.FNN([6, 5, 5, 4], 1.0, rng)
    x = rng.normal(size=(3, 6))
    t = rng.dirichlet(np.ones(4), size=3)
    _, grads = net.loss_and_grad(x, t)
    err = finite_difference_check(net.params, lambda: net.loss(x, t), grads, rng, n_coords=10)
    assert err < 1e-4


def test_softmax_sums_to_one():
    rng = np.random.default_rng(2)
    for _ in range(20):
        net = nn.FNN([10, 50, 50, 13], 1.0, rng)
        p = net.forward(rng.normal(size=(7, 10)) * 5)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_zero_weights_give_zero_output():
    net = nn.LSTMNet(1, 4, 13)
    for v in net.params.values():
        v[...] = 0.0
    assert np.all(net.forward(np.ones((5, 1))) == 0.0)


def test_deterministic_forward():
    net = nn.LSTMNet(1, 8, 13, rng=np.random.default_rng(4))
    x = np.linspace(0, 1, 6)[:, None]
    assert np.array_equal(net.forward(x), net.forward(x))


def test_hand_computed_cell():
    net = nn.LSTMNet(1, 1, 1)
    # rows: [x, h_prev]; gate columns: i, f, o, g
    net.params["W0"][...] = np.array([[0.5, -0.3, 0.8, 1.2], [0.0, 0.0, 0.0, 0.0]])
    net.params["b0"][...] = np.array([0.1, 0.2, -0.1, 0.05])
    net.params["Wy"][...] = 1.0
    net.params["by"][...] = 0.0
    x = 0.7
    sig = lambda z: 1 / (1 + np.exp(-z))
    i, o = sig(0.5 * x + 0.1), sig(0.8 * x - 0.1)
    g = np.tanh(1.2 * x + 0.05)
    c = i * g
    expected = o * np.tanh(c)
    assert net.forward(np.array([[x]]))[0, 0] == pytest.approx(expected, abs=1e-12)


def test_shape_errors():
    net = nn.LSTMNet(2, 3, 4)
    with pytest.raises(ValueError):
        net.forward(np.ones((3, 1)))
    with pytest.raises(ValueError):
        nn.FNN([3, 2]).forward(np.ones(4))


def test_clip_by_global_norm():
    g = {"a": np.array([3.0, 4.0])}
    norm = nn.clip_by_global_norm(g, 1.0)
    assert norm == pytest.approx(5.0)
    assert np.linalg.norm(g["a"]) == pytest.approx(1.0)


def test_checkpoint_roundtrip(tmp_path):
    net = nn.LSTMNet(1, 5, 13, 2, np.random.default_rng(9))
    path = tmp_path / "w.txt"
    nn.save_weights(path, net.params)
    back = nn.load_weights(path)
    assert set(back) == set(net.params)
    for k in back:
        assert np.array_equal(back[k], net.params[k])


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("hello\n")
    with pytest.raises(ValueError):
        nn.load_weights(path)


def test_optimizer_factory():
    assert isinstance(nn.make_optimizer("sgd", 0.1, 1.0), nn.SGD)
    assert isinstance(nn.make_optimizer("adam", 0.1, 1.0), nn.Adam)
    with pytest.raises(ValueError):
        nn.make_optimizer("rmsprop", 0.1, 1.0)
