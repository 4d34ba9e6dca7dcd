import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tracx2 import corpus as cp, nets
from tracx2.nets import Hyperparams, SrnNet, Tracx2Net


@pytest.fixture(scope="module")
def set1():
    return cp.load_bundled("set1")


def test_activation_shape():
    f = nets.activation
    assert f(0) == 0 and f(5) == 1 and f(-5) == -1 and f(10) == 1 and f(-10) == -1
    assert f(2.5) == 0.5
    x = np.linspace(-20, 20, 4001)
    y = f(x)
    assert np.all(np.diff(y) >= 0)
    assert np.allclose(f(-x), -y)
    assert np.max(np.abs(np.diff(y))) <= 0.01 / 5 + 1e-12
    assert nets.activation_deriv(0.0) == 0.2 and nets.activation_deriv(6.0) == 0.0


def test_delta_gate():
    assert nets.delta_from_error(0.0) == 0.0
    assert nets.delta_from_error(2.0) >= 0.9999
    grid = nets.delta_from_error(np.linspace(0, 2, 201))
    assert np.all(np.diff(grid) >= 0)


def test_next_lhs():
    h, r = np.full(39, 0.2), np.full(39, -1.0)
    assert np.array_equal(nets.next_lhs(h, 1.0, r), r)
    assert np.array_equal(nets.next_lhs(h, 0.0, r), h)
    assert np.allclose(nets.next_lhs(h, 0.5, r), -0.4)


def test_forward_with_zero_weights():
    net = Tracx2Net(seed=0)
    net.W_ih[:] = 0
    net.W_ho[:] = 0
    codes = net.codes
    _, out, E = net.forward(codes[3], codes[30])
    assert np.all(out == 0) and E == 1.0


def _loss(net, lhs, rhs):
    _, out, _ = net.forward(lhs, rhs)
    return 0.5 * np.sum((out - np.concatenate([lhs, rhs])) ** 2)


def _fd_check(net, params, loss, grads, rng, n_probe=60):
    for W, G in zip(params, grads):
        for _ in range(n_probe):
            i, j = rng.integers(W.shape[0]), rng.integers(W.shape[1])
            old = W[i, j]
            h = 1e-6
            W[i, j] = old + h
            up = loss()
            W[i, j] = old - h
            down = loss()
            W[i, j] = old
            fd = (up - down) / (2 * h)
            assert abs(fd - G[i, j]) <= 1e-4 * max(1e-3, abs(fd), abs(G[i, j])), (i, j, fd, G[i, j])


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_tracx2_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    # small weights keep every unit in its linear range, away from the kinks
    net = Tracx2Net(Hyperparams(weight_init_range=0.05), seed=seed)
    lhs = rng.uniform(-1, 1, 39)
    rhs = net.codes[rng.integers(39)]
    gW_ih, gW_ho, _, _ = net.gradients(lhs, rhs, offset=0.0)
    _fd_check(net, [net.W_ih, net.W_ho], lambda: _loss(net, lhs, rhs), [gW_ih, gW_ho], rng)


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_srn_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = SrnNet(Hyperparams(weight_init_range=0.05), seed=seed)
    item, target = net.codes[rng.integers(39)], net.codes[rng.integers(39)]
    ctx = rng.uniform(-1, 1, 39)

    def loss():
        _, out = net.forward(item, ctx)
        return 0.5 * np.sum((out - target) ** 2)

    gW, gV, _, _ = net.gradients(item, ctx, target, offset=0.0)
    _fd_check(net, [net.W, net.V], loss, [gW, gV], rng)


def test_repeated_pair_error_falls():
    net = Tracx2Net(seed=5)
    a, b = net.codes[19], net.codes[21]
    first = net.backprop_step(a, b).E
    for _ in range(500):
        last = net.backprop_step(a, b).E
    assert last < first


def test_step_trace_bounds(set1):
    for mode in nets.MODES:
        trace = []
        net = Tracx2Net(seed=2, mode=mode)
        net.fit(set1, epochs=2, seed=3, trace=trace)
        arr = np.array(trace)
        assert len(arr) == 2 * sum(len(s) - 1 for s in set1)
        assert np.all((arr[:, 0] >= 0) & (arr[:, 0] <= 2))
        assert np.all((arr[:, 1] >= 0) & (arr[:, 1] <= 1))
        if mode == "rae":
            assert np.all(arr[:, 1] == 0)


@pytest.mark.parametrize("mode", nets.MODES)
def test_compiled_training_matches_numpy_steps(set1, mode):
    a = Tracx2Net(seed=11, mode=mode)
    b = a.copy()
    ta, tb = [], []
    for song in list(set1)[:4]:
        a.train_sequence(song.intervals, ta)
        b.train_sequence_stepwise(song.intervals, tb)
    np.testing.assert_allclose(a.W_ih, b.W_ih, rtol=0, atol=1e-10)
    np.testing.assert_allclose(a.W_ho, b.W_ho, rtol=0, atol=1e-10)
    np.testing.assert_allclose(np.array(ta), np.array(tb), rtol=0, atol=1e-10)


def test_compiled_srn_matches_numpy_steps(set1):
    a = SrnNet(seed=11)
    b = a.copy()
    ta, tb = [], []
    for song in list(set1)[:4]:
        a.train_sequence(song.intervals, ta)
        b.train_sequence_stepwise(song.intervals, tb)
    np.testing.assert_allclose(a.W, b.W, rtol=0, atol=1e-10)
    np.testing.assert_allclose(a.V, b.V, rtol=0, atol=1e-10)
    np.testing.assert_allclose(np.array(ta)[:, 0], np.array(tb)[:, 0], rtol=0, atol=1e-10)


def test_rae_equals_tracx2_with_zero_delta(set1, monkeypatch):
    rae = Tracx2Net(seed=7, mode="rae")
    gated = rae.copy()
    gated.mode = "tracx2"
    monkeypatch.setattr(nets, "delta_from_error", lambda E, temperature=5.0: np.zeros_like(np.asarray(E, float)))
    tr, tg = [], []
    for song in list(set1)[:3]:
        rae.train_sequence(song.intervals, tr)
        gated.train_sequence_stepwise(song.intervals, tg)
    assert np.allclose(np.array(tr), np.array(tg), rtol=0, atol=1e-10)
    assert np.allclose(rae.W_ih, gated.W_ih, rtol=0, atol=1e-10)
    words = sorted(cp.word_inventory(set1, 3))[:40]
    assert np.allclose(rae.word_errors(words), gated.word_errors(words), rtol=0, atol=1e-12)


def test_learning_rate_zero_and_zero_epochs(set1):
    net = Tracx2Net(Hyperparams(learning_rate=0.0), seed=1)
    before = {k: v.copy() for k, v in net.weights().items()}
    net.fit(set1, epochs=1, seed=0)
    for k, v in net.weights().items():
        assert np.array_equal(v, before[k])
    for model in nets.MODELS:
        fresh = nets.make_model(model, seed=nets._seed_rngs(3, 2)[0])
        zero = nets.train_model(model, set1, 3, epochs=0)
        for k, v in zero.weights().items():
            assert np.array_equal(v, fresh.weights()[k])


def test_init_range():
    net = Tracx2Net(seed=0)
    assert net.W_ih.shape == (39, 79) and net.W_ho.shape == (78, 40)
    assert np.abs(net.W_ih).max() <= 0.5 and np.abs(net.W_ho).max() <= 0.5
    s = SrnNet(seed=0)
    assert s.W.shape == (39, 79) and s.V.shape == (39, 40)


def test_determinism(set1):
    for model in nets.MODELS:
        a = nets.train_model(model, set1, 42, epochs=3)
        b = nets.train_model(model, set1, 42, epochs=3)
        c = nets.train_model(model, set1, 43, epochs=3)
        for k in a.weights():
            assert np.array_equal(a.weights()[k], b.weights()[k])
            assert not np.array_equal(a.weights()[k], c.weights()[k])


def test_word_error_is_mean_of_pair_errors(set1):
    net = nets.train_model("tracx2", set1, 1, epochs=3)
    w = (0, -2, 0)
    steps = net.step_errors(w)
    assert len(steps) == 2
    assert nets.word_error(net, w) == pytest.approx(steps.mean())
    _, _, E = net.forward(net.codes[19], net.codes[17])
    assert steps[0] == pytest.approx(E)
    with pytest.raises(ValueError):
        net.word_errors([(3,)])


def test_hidden_rep_is_final_pair_hidden(set1):
    net = nets.train_model("tracx2", set1, 1, epochs=3)
    w = (2, -2, 0)
    codes = net.codes
    h1, _, E1 = net.forward(codes[21], codes[17])
    lhs = nets.next_lhs(h1, float(nets.delta_from_error(E1)), codes[17])
    h2, _, _ = net.forward(lhs, codes[19])
    assert np.allclose(nets.hidden_rep(net, w), h2)
    assert np.array_equal(nets.hidden_rep(net, w), nets.hidden_rep(net, w))


def test_srn_scoring_resets_context(set1):
    net = nets.train_model("srn", set1, 1, epochs=3)
    w = (2, -2)
    h, out = net.forward(net.codes[21], np.zeros(39))
    assert nets.srn_word_error(net, w) == pytest.approx(np.mean(np.abs(out - net.codes[17])))
    assert nets.srn_word_error(net, w) == nets.srn_word_error(net, w)
    assert nets.srn_hidden_rep(net, w).shape == (39,)


def test_chunk_recursion_gate():
    # one pair repeated back to back; in the stream the LHS quickly becomes the
    # recycled chunk, so the gate is read off the training trace itself
    stream = cp.Song("rep", (0, 2) * 200)
    trace = []
    net = nets.train_model("tracx2", [stream], 0, epochs=30, trace=trace)
    last_epoch = np.array(trace)[-(len(stream) - 1):, 1]
    assert last_epoch.mean() < 0.5
    _, _, E_new = net.forward(net.codes[5], net.codes[33])
    assert nets.delta_from_error(E_new) > 0.5


def test_short_song_warns():
    net = Tracx2Net(seed=0)
    with pytest.warns(UserWarning):
        net.train_sequence((3,))


def test_non_finite_weights_raise():
    net = Tracx2Net(seed=0)
    net.W_ih[0, 0] = np.nan
    with pytest.raises(nets.NumericError):
        net.train_sequence((0, 1, 2))


def test_momentum_rejected():
    with pytest.raises(ValueError):
        Hyperparams(momentum=0.9)


@pytest.mark.parametrize("model", nets.MODELS)
def test_snapshot_round_trip(tmp_path, set1, model):
    net = nets.train_model(model, set1, 9, epochs=2, encoding="onehot")
    path = tmp_path / "net.txt"
    nets.save_snapshot(net, path)
    back = nets.load_snapshot(path)
    assert (back.kind, back.mode, back.encoding) == (net.kind, net.mode, net.encoding)
    for k, v in net.weights().items():
        assert np.array_equal(back.weights()[k], v)
    words = sorted(cp.word_inventory(set1, 3))
    assert np.array_equal(back.word_errors(words), net.word_errors(words))
